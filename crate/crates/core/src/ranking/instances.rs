//! Scorer inputs: one pairwise re-rank sequence per candidate, or one
//! comma-joined span sequence per mention.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::expansion::ExpandedMention;
use crate::lexicon::{ConceptId, Lexicon};
use crate::num::Real;
use crate::retrieval::CandidateList;
use crate::text::{char_len, char_slice};

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
const SEGMENT_BREAK: &str = " [SEP] ";
pub const CONCEPT_JOINER: &str = ", ";

/// One (mention, candidate) pair rendered as
/// `[CLS] m [SEP] name [SEP] syn_1 [SEP] ... [SEP] class [SEP]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankInstance {
    pub mention: ExpandedMention,
    pub candidate: ConceptId,
    /// BM25 score of the candidate, kept for baselines and tie-breaking.
    pub retrieval_score: f64,
    pub candidate_name: String,
    /// Synonyms in the (shuffled) order they appear in `sequence`.
    pub synonyms: Vec<String>,
    pub class: Option<String>,
    pub sequence: String,
    pub label: Option<bool>,
}

/// Name used for a concept inside scorer inputs.
pub fn rendered_name(lexicon: &Lexicon, id: &ConceptId) -> String {
    if id.is_unlinkable() {
        return id.as_str().to_string();
    }
    lexicon
        .lookup(id)
        .map(|c| c.preferred_name.clone())
        .unwrap_or_else(|| id.as_str().to_string())
}

fn pair_rng(seed: u64, mention: &str, candidate: &ConceptId) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(mention.as_bytes());
    h.update([0u8]);
    h.update(candidate.as_str().as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    ChaCha8Rng::seed_from_u64(u64::from_le_bytes(bytes))
}

fn render_rerank(mention: &str, name: &str, synonyms: &[String], class: Option<&str>) -> String {
    let mut seq = format!("{CLS} {mention} {SEP} {name} {SEP}");
    for s in synonyms {
        seq.push(' ');
        seq.push_str(s);
        seq.push(' ');
        seq.push_str(SEP);
    }
    if let Some(c) = class {
        seq.push(' ');
        seq.push_str(c);
        seq.push(' ');
        seq.push_str(SEP);
    }
    seq
}

/// One instance per candidate. Synonym order is shuffled with a generator
/// seeded from `(synonym_order_seed, expanded mention, candidate)`. Labels are
/// set only when `gold` is given.
pub fn build_rerank_instances<S: Real>(
    mention: &ExpandedMention,
    candidates: &CandidateList<S>,
    lexicon: &Lexicon,
    gold: Option<&ConceptId>,
    synonym_order_seed: u64,
) -> Vec<RerankInstance> {
    candidates
        .candidates
        .iter()
        .map(|cand| {
            let id = &cand.concept;
            let (name, mut synonyms, class) = match lexicon.lookup(id) {
                Some(c) if !id.is_unlinkable() => (
                    c.preferred_name.clone(),
                    c.synonyms.clone(),
                    lexicon.class_of(id).map(str::to_string),
                ),
                _ => (rendered_name(lexicon, id), Vec::new(), None),
            };
            synonyms.shuffle(&mut pair_rng(synonym_order_seed, &mention.expanded, id));
            let sequence = render_rerank(&mention.expanded, &name, &synonyms, class.as_deref());
            RerankInstance {
                mention: mention.clone(),
                candidate: id.clone(),
                retrieval_score: cand.score.to_f64_lossy(),
                candidate_name: name,
                synonyms,
                class,
                sequence,
                label: gold.map(|g| g == id),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateOrder {
    Rank,
    SeededShuffle(u64),
}

/// A candidate's place inside the span sequence (character offsets).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptOffset {
    pub concept: ConceptId,
    pub start: usize,
    pub end: usize,
    pub retrieval_score: f64,
}

/// `[CLS] m [SEP] c_1, c_2, ..., c_n [SEP]` with the character extent of every
/// candidate name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanInstance {
    pub mention: ExpandedMention,
    pub sequence: String,
    pub segment_two_start: usize,
    pub segment_two_end: usize,
    pub concept_offsets: Vec<ConceptOffset>,
    pub gold_span: Option<(usize, usize)>,
}

impl SpanInstance {
    pub fn offsets_of(&self, concept: &ConceptId) -> Option<(usize, usize)> {
        self.concept_offsets
            .iter()
            .find(|c| &c.concept == concept)
            .map(|c| (c.start, c.end))
    }

    pub fn slice(&self, start: usize, end: usize) -> Option<&str> {
        char_slice(&self.sequence, start, end)
    }

    /// Whether this instance can serve as a training example.
    pub fn is_trainable(&self) -> bool {
        self.gold_span.is_some()
    }
}

pub fn build_span_instance<S: Real>(
    mention: &ExpandedMention,
    candidates: &CandidateList<S>,
    lexicon: &Lexicon,
    order: CandidateOrder,
    gold: Option<&ConceptId>,
) -> SpanInstance {
    let mut ordered: Vec<(ConceptId, f64)> = candidates
        .candidates
        .iter()
        .map(|c| (c.concept.clone(), c.score.to_f64_lossy()))
        .collect();
    if let CandidateOrder::SeededShuffle(seed) = order {
        ordered.shuffle(&mut pair_rng(
            seed,
            &mention.expanded,
            &ConceptId::unlinkable(),
        ));
    }
    let mut sequence = format!("{CLS} {} {SEP} ", mention.expanded);
    let segment_two_start = char_len(&sequence);
    let mut cursor = segment_two_start;
    let mut concept_offsets = Vec::with_capacity(ordered.len());
    for (k, (id, retrieval_score)) in ordered.into_iter().enumerate() {
        if k > 0 {
            sequence.push_str(CONCEPT_JOINER);
            cursor += CONCEPT_JOINER.len();
        }
        let name = rendered_name(lexicon, &id);
        let len = char_len(&name);
        sequence.push_str(&name);
        concept_offsets.push(ConceptOffset {
            concept: id,
            start: cursor,
            end: cursor + len,
            retrieval_score,
        });
        cursor += len;
    }
    let segment_two_end = cursor;
    sequence.push(' ');
    sequence.push_str(SEP);
    let gold_span = gold.and_then(|g| {
        concept_offsets
            .iter()
            .find(|c| &c.concept == g)
            .map(|c| (c.start, c.end))
    });
    SpanInstance {
        mention: mention.clone(),
        sequence,
        segment_two_start,
        segment_two_end,
        concept_offsets,
        gold_span,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("sequence must start with `[CLS] `")]
    MissingCls,
    #[error("sequence must end with ` [SEP]`")]
    MissingFinalSep,
    #[error("expected at least {expected} segments, found {found}")]
    TooFewSegments { expected: usize, found: usize },
    #[error("segment {0} is empty")]
    EmptySegment(usize),
    #[error("segment {0} contains a stray marker")]
    StrayMarker(usize),
    #[error("candidate segment is not `, `-joined names")]
    BadJoin,
    #[error("offsets of {0} do not reproduce its name")]
    OffsetMismatch(ConceptId),
}

/// Splits a bracketed sequence into its segments.
pub fn parse_segments(sequence: &str) -> Result<Vec<&str>, GrammarError> {
    let body = sequence
        .strip_prefix("[CLS] ")
        .ok_or(GrammarError::MissingCls)?;
    let body = body
        .strip_suffix(" [SEP]")
        .ok_or(GrammarError::MissingFinalSep)?;
    let segments: Vec<&str> = body.split(SEGMENT_BREAK).collect();
    for (i, s) in segments.iter().enumerate() {
        if s.trim().is_empty() {
            return Err(GrammarError::EmptySegment(i));
        }
        if s.contains(CLS) || s.contains(SEP) {
            return Err(GrammarError::StrayMarker(i));
        }
    }
    Ok(segments)
}

/// Checks a re-rank instance against its template: mention, name, each
/// synonym, then the class when present.
pub fn check_rerank_grammar(instance: &RerankInstance) -> Result<(), GrammarError> {
    let segments = parse_segments(&instance.sequence)?;
    let mut expected: Vec<&str> = vec![&instance.mention.expanded, &instance.candidate_name];
    expected.extend(instance.synonyms.iter().map(String::as_str));
    if let Some(c) = &instance.class {
        expected.push(c);
    }
    if segments.len() < 2 {
        return Err(GrammarError::TooFewSegments {
            expected: 2,
            found: segments.len(),
        });
    }
    if segments != expected {
        return Err(GrammarError::TooFewSegments {
            expected: expected.len(),
            found: segments.len(),
        });
    }
    Ok(())
}

/// Checks a span instance: two segments, `, `-joined names, sound offsets.
pub fn check_span_grammar(instance: &SpanInstance, lexicon: &Lexicon) -> Result<(), GrammarError> {
    let segments = parse_segments(&instance.sequence)?;
    if segments.len() != 2 {
        return Err(GrammarError::TooFewSegments {
            expected: 2,
            found: segments.len(),
        });
    }
    let names: Vec<String> = instance
        .concept_offsets
        .iter()
        .map(|c| rendered_name(lexicon, &c.concept))
        .collect();
    if segments[1] != names.join(CONCEPT_JOINER) {
        return Err(GrammarError::BadJoin);
    }
    if instance.slice(instance.segment_two_start, instance.segment_two_end) != Some(segments[1]) {
        return Err(GrammarError::BadJoin);
    }
    for (c, name) in instance.concept_offsets.iter().zip(&names) {
        if instance.slice(c.start, c.end) != Some(name.as_str()) {
            return Err(GrammarError::OffsetMismatch(c.concept.clone()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::parse_lexicon_str;
    use crate::retrieval::Candidate;

    fn rid(s: &str) -> ConceptId {
        ConceptId::parse(s).unwrap()
    }

    fn lexicon() -> Lexicon {
        parse_lexicon_str(
            "rid\tpreferred_name\tsynonyms\tparents\tdefinition\n\
             RID3\tanatomical entity\t\t\t\n\
             RID1534\tcostophrenic sulcus\tcostophrenic angle\tRID3\t\n\
             RID1301\tlung\t\t\t\n\
             RID40\tthoracostomy tube\tchest tube|chest drain|intercostal drain|pleural drain\t\t\n",
        )
        .unwrap()
    }

    fn list(ids: &[(&str, f64)], mention: &ExpandedMention) -> CandidateList<f64> {
        CandidateList {
            mention: mention.clone(),
            candidates: ids
                .iter()
                .map(|&(i, s)| Candidate {
                    concept: rid(i),
                    score: s,
                })
                .collect(),
        }
    }

    fn expanded(s: &str) -> ExpandedMention {
        ExpandedMention::unexpanded(s)
    }

    #[test]
    fn costophrenic_angle_rerank_sequence() {
        let m = expanded("costophrenic angle costophrenic sulcus");
        let inst = build_rerank_instances(
            &m,
            &list(&[("RID1534", 3.0)], &m),
            &lexicon(),
            Some(&rid("RID1534")),
            7,
        );
        assert_eq!(
            inst[0].sequence,
            "[CLS] costophrenic angle costophrenic sulcus [SEP] costophrenic sulcus [SEP] costophrenic angle [SEP] anatomical entity [SEP]"
        );
        assert_eq!(inst[0].label, Some(true));
        check_rerank_grammar(&inst[0]).unwrap();
    }

    #[test]
    fn bare_candidate_and_sentinel() {
        let m = expanded("m");
        let inst = build_rerank_instances(
            &m,
            &list(&[("RID1301", 1.0), ("XXXXX", 0.5)], &m),
            &lexicon(),
            None,
            0,
        );
        assert_eq!(inst[0].sequence, "[CLS] m [SEP] lung [SEP]");
        assert_eq!(inst[1].sequence, "[CLS] m [SEP] XXXXX [SEP]");
        assert!(inst.iter().all(|i| i.label.is_none()));
        assert_eq!(inst[1].retrieval_score, 0.5);
    }

    #[test]
    fn synonym_shuffle_is_seeded() {
        let m = expanded("chest tube");
        let l = list(&[("RID40", 1.0)], &m);
        let a = build_rerank_instances(&m, &l, &lexicon(), None, 11);
        let b = build_rerank_instances(&m, &l, &lexicon(), None, 11);
        assert_eq!(a, b);
        let mut sorted = a[0].synonyms.clone();
        sorted.sort();
        let mut orig = lexicon().lookup(&rid("RID40")).unwrap().synonyms.clone();
        orig.sort();
        assert_eq!(sorted, orig);
        let orders: std::collections::HashSet<Vec<String>> = (0..20)
            .map(|seed| {
                build_rerank_instances(&m, &l, &lexicon(), None, seed)[0]
                    .synonyms
                    .clone()
            })
            .collect();
        assert!(orders.len() > 1, "seed should change synonym order");
    }

    #[test]
    fn span_sequence_and_offsets() {
        let m = expanded("costophrenic angle");
        let l = list(&[("RID1534", 2.0), ("RID1301", 1.0)], &m);
        let s = build_span_instance(
            &m,
            &l,
            &lexicon(),
            CandidateOrder::Rank,
            Some(&rid("RID1301")),
        );
        assert_eq!(
            s.sequence,
            "[CLS] costophrenic angle [SEP] costophrenic sulcus, lung [SEP]"
        );
        assert_eq!(s.concept_offsets.len(), 2);
        assert_eq!(
            s.slice(s.concept_offsets[1].start, s.concept_offsets[1].end),
            Some("lung")
        );
        assert_eq!(s.gold_span, s.offsets_of(&rid("RID1301")));
        check_span_grammar(&s, &lexicon()).unwrap();
    }

    #[test]
    fn single_candidate_span_has_no_comma() {
        let m = expanded("lung");
        let s = build_span_instance(
            &m,
            &list(&[("RID1301", 1.0)], &m),
            &lexicon(),
            CandidateOrder::Rank,
            Some(&rid("RID9")),
        );
        assert_eq!(s.sequence, "[CLS] lung [SEP] lung [SEP]");
        assert!(s.gold_span.is_none());
        assert!(!s.is_trainable());
    }

    #[test]
    fn shuffled_span_order_is_a_permutation() {
        let m = expanded("tube");
        let l = list(
            &[
                ("RID1534", 4.0),
                ("RID1301", 3.0),
                ("RID40", 2.0),
                ("XXXXX", 1.0),
            ],
            &m,
        );
        let a = build_span_instance(&m, &l, &lexicon(), CandidateOrder::SeededShuffle(5), None);
        let b = build_span_instance(&m, &l, &lexicon(), CandidateOrder::SeededShuffle(5), None);
        assert_eq!(a, b);
        check_span_grammar(&a, &lexicon()).unwrap();
        assert!(a.sequence.contains("XXXXX"));
        let mut ids: Vec<ConceptId> = a
            .concept_offsets
            .iter()
            .map(|c| c.concept.clone())
            .collect();
        ids.sort();
        assert_eq!(
            ids,
            vec![rid("RID40"), rid("RID1301"), rid("RID1534"), rid("XXXXX")]
        );
    }

    #[test]
    fn grammar_rejects_malformed() {
        assert_eq!(parse_segments("m [SEP]"), Err(GrammarError::MissingCls));
        assert_eq!(
            parse_segments("[CLS] m [SEP] x"),
            Err(GrammarError::MissingFinalSep)
        );
        assert_eq!(
            parse_segments("[CLS] m [SEP]  [SEP]"),
            Err(GrammarError::EmptySegment(1))
        );
    }

    #[test]
    fn offsets_are_character_based() {
        let lex = parse_lexicon_str("rid\tpreferred_name\tsynonyms\tparents\tdefinition\nRID1\tœdème\t\t\t\nRID2\tlung\t\t\t").unwrap();
        let m = expanded("œdème");
        let s = build_span_instance(
            &m,
            &list(&[("RID1", 1.0), ("RID2", 0.5)], &m),
            &lex,
            CandidateOrder::Rank,
            None,
        );
        check_span_grammar(&s, &lex).unwrap();
        assert_eq!(
            s.slice(s.concept_offsets[1].start, s.concept_offsets[1].end),
            Some("lung")
        );
    }
}
