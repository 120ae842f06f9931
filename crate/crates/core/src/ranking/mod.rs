//! Choosing one concept from a candidate list.
//!
//! Two scorer-facing formulations are supported. Pairwise re-ranking scores
//! every (mention, candidate) sequence and takes the argmax. Span detection
//! shows all candidates in one sequence and maps the predicted character span
//! back to a concept. Scorers are pluggable: deterministic built-ins live in
//! [`scorers`], remote models are reached through [`protocol`].

pub mod instances;
pub mod protocol;
pub mod scorers;
pub mod stub;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{ConceptId, Lexicon};
use crate::retrieval::{CandidateList, MentionRef};
use crate::span_detection::Tag;

pub use instances::{
    build_rerank_instances, build_span_instance, check_rerank_grammar, check_span_grammar,
    CandidateOrder, ConceptOffset, RerankInstance, SpanInstance,
};
pub use scorers::{ConstantScorer, EchoBm25Scorer, GoldOracleScorer, LexicalScorer};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScorerError {
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("protocol version mismatch: expected {expected}, peer sent {found}")]
    VersionMismatch { expected: u32, found: String },
    #[error("scorer reported an error: {0}")]
    Remote(String),
    #[error("scorer transport failed: {0}")]
    Transport(String),
    #[error("scorer {scorer} does not support {mode} requests")]
    Unsupported { scorer: String, mode: &'static str },
    #[error("scorer returned {found} scores for {expected} instances")]
    ScoreCount { expected: usize, found: usize },
    #[error("scorer {0} needs gold labels")]
    NeedsGold(String),
    #[error("unknown scorer {0:?}; expected echo-bm25, builtin-lexical, oracle, constant[:p], stdio:<command> or an http(s) URL")]
    UnknownScorer(String),
}

/// A scorer failure while ranking one mention.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}/{}: {source}", mention.report_id, mention.mention_id)]
pub struct RankingError {
    pub mention: MentionRef,
    pub source: ScorerError,
}

/// A predicted character span inside a span instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanAnswer {
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

/// Anything that can score ranking inputs. Implementations must be safe to
/// call from several threads.
pub trait Scorer: Send + Sync {
    fn name(&self) -> String;

    /// Whether the scorer reads gold labels; such scorers are diagnostics only.
    fn needs_gold(&self) -> bool {
        false
    }

    /// Whether ties in `score_rerank` are broken by retrieval score before RID.
    fn breaks_ties_by_retrieval(&self) -> bool {
        false
    }

    /// One score per instance, in order.
    fn score_rerank(&self, instances: &[RerankInstance]) -> Result<Vec<f64>, ScorerError>;

    fn score_span(&self, instance: &SpanInstance) -> Result<SpanAnswer, ScorerError>;

    fn tag(&self, _tokens: &[String]) -> Result<Vec<Tag>, ScorerError> {
        Err(ScorerError::Unsupported {
            scorer: self.name(),
            mode: "tag",
        })
    }
}

/// Builds a scorer from its command-line spelling.
pub fn scorer_from_spec(spec: &str, timeout: Duration) -> Result<Box<dyn Scorer>, ScorerError> {
    let spec = spec.trim();
    Ok(match spec {
        "echo-bm25" | "bm25" => Box::new(EchoBm25Scorer),
        "lexical" | "builtin-lexical" => Box::new(LexicalScorer),
        "oracle" => Box::new(GoldOracleScorer),
        "constant" => Box::new(ConstantScorer(0.5)),
        s if s.starts_with("constant:") => {
            let p: f64 = s["constant:".len()..]
                .parse()
                .map_err(|_| ScorerError::UnknownScorer(s.to_string()))?;
            Box::new(ConstantScorer(p))
        }
        s if s.starts_with("stdio:") || s.starts_with("http://") || s.starts_with("https://") => {
            Box::new(protocol::RemoteScorer::connect(s, timeout)?)
        }
        other => return Err(ScorerError::UnknownScorer(other.to_string())),
    })
}

/// What a ranker decided for one mention.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Concept(ConceptId),
    /// The predicted text matched no concept.
    NoMatch,
    /// The predicted span covered more than one candidate name.
    MultiConcept,
}

impl Outcome {
    pub fn concept(&self) -> Option<&ConceptId> {
        match self {
            Outcome::Concept(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_correct(&self, gold: &ConceptId) -> bool {
        self.concept() == Some(gold)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Concept(c) => write!(f, "{c}"),
            Outcome::NoMatch => f.write_str("NO_MATCH"),
            Outcome::MultiConcept => f.write_str("MULTI_CONCEPT"),
        }
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "NO_MATCH" => Ok(Outcome::NoMatch),
            "MULTI_CONCEPT" => Ok(Outcome::MultiConcept),
            other => ConceptId::parse(other)
                .map(Outcome::Concept)
                .map_err(|e| e.to_string()),
        }
    }
}

impl Serialize for Outcome {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankerTag {
    Bm25Top1,
    Lexical,
    Rerank,
    SpanOriginal,
    SpanFirst,
    SpanLast,
}

impl RankerTag {
    pub fn as_str(self) -> &'static str {
        match self {
            RankerTag::Bm25Top1 => "bm25_top1",
            RankerTag::Lexical => "lexical",
            RankerTag::Rerank => "rerank",
            RankerTag::SpanOriginal => "span_original",
            RankerTag::SpanFirst => "span_first",
            RankerTag::SpanLast => "span_last",
        }
    }
}

impl fmt::Display for RankerTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a predicted span is turned into a single concept name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanMode {
    /// Keep the span as is; a span containing a comma is a multi-concept error.
    Original,
    /// Keep the text before the first comma.
    First,
    /// Keep the text after the last comma.
    Last,
}

impl SpanMode {
    pub const ALL: [SpanMode; 3] = [SpanMode::Original, SpanMode::First, SpanMode::Last];

    pub fn tag(self) -> RankerTag {
        match self {
            SpanMode::Original => RankerTag::SpanOriginal,
            SpanMode::First => RankerTag::SpanFirst,
            SpanMode::Last => RankerTag::SpanLast,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SpanMode::Original => "original",
            SpanMode::First => "first",
            SpanMode::Last => "last",
        }
    }
}

impl FromStr for SpanMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(SpanMode::Original),
            "first" => Ok(SpanMode::First),
            "last" => Ok(SpanMode::Last),
            other => Err(format!(
                "unknown span mode {other:?}; expected original, first or last"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mention: MentionRef,
    pub predicted: Outcome,
    pub score: f64,
    pub ranker: RankerTag,
}

impl Prediction {
    pub fn is_correct(&self, gold: &ConceptId) -> bool {
        self.predicted.is_correct(gold)
    }
}

/// Index of the best-scoring instance. Ties go to the lower RID with the
/// unlinkable sentinel last, or first to the higher retrieval score when
/// `by_retrieval` is set.
pub fn argmax(instances: &[RerankInstance], scores: &[f64], by_retrieval: bool) -> Option<usize> {
    let better = |a: usize, b: usize| -> Ordering {
        scores[a]
            .partial_cmp(&scores[b])
            .unwrap_or(Ordering::Equal)
            .then_with(|| {
                if by_retrieval {
                    instances[a]
                        .retrieval_score
                        .partial_cmp(&instances[b].retrieval_score)
                        .unwrap_or(Ordering::Equal)
                } else {
                    Ordering::Equal
                }
            })
            .then_with(|| instances[b].candidate.cmp(&instances[a].candidate))
    };
    (0..instances.len().min(scores.len())).max_by(|&a, &b| better(a, b))
}

/// Scores the instances and keeps the best one.
pub fn rerank(
    instances: &[RerankInstance],
    scorer: &dyn Scorer,
) -> Result<Option<(ConceptId, f64)>, ScorerError> {
    if instances.is_empty() {
        return Ok(None);
    }
    let scores = scorer.score_rerank(instances)?;
    if scores.len() != instances.len() {
        return Err(ScorerError::ScoreCount {
            expected: instances.len(),
            found: scores.len(),
        });
    }
    Ok(
        argmax(instances, &scores, scorer.breaks_ties_by_retrieval())
            .map(|i| (instances[i].candidate.clone(), scores[i])),
    )
}

/// Text extracted from a predicted span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extracted {
    Name(String),
    MultiConcept,
    /// The span is empty or leaves the candidate segment.
    Outside,
}

pub fn extract_concept_from_span(
    instance: &SpanInstance,
    start: usize,
    end: usize,
    mode: SpanMode,
) -> Extracted {
    if start >= end || start < instance.segment_two_start || end > instance.segment_two_end {
        return Extracted::Outside;
    }
    let Some(text) = instance.slice(start, end) else {
        return Extracted::Outside;
    };
    let picked = match mode {
        SpanMode::Original if text.contains(',') => return Extracted::MultiConcept,
        SpanMode::Original => text,
        SpanMode::First => text.split(',').next().unwrap_or(text),
        SpanMode::Last => text.rsplit(',').next().unwrap_or(text),
    };
    let picked = picked.trim();
    if picked.is_empty() {
        Extracted::Outside
    } else {
        Extracted::Name(picked.to_string())
    }
}

/// Maps a concept name back to an id by exact (trimmed, case-sensitive) match:
/// the first candidate whose rendered name matches, then any lexicon concept
/// with that preferred name (lowest RID).
pub fn resolve_concept<'a>(
    name: &str,
    candidates: impl IntoIterator<Item = &'a ConceptId>,
    lexicon: &Lexicon,
) -> Outcome {
    let name = name.trim();
    if name == ConceptId::unlinkable().as_str() {
        return Outcome::Concept(ConceptId::unlinkable());
    }
    for id in candidates {
        if instances::rendered_name(lexicon, id) == name {
            return Outcome::Concept(id.clone());
        }
    }
    lexicon
        .find_by_name(name)
        .iter()
        .filter(|id| lexicon.lookup(id).is_some_and(|c| c.preferred_name == name))
        .min()
        .cloned()
        .map(Outcome::Concept)
        .unwrap_or(Outcome::NoMatch)
}

/// Resolves a span answer under one mode.
pub fn span_outcome(
    instance: &SpanInstance,
    answer: &SpanAnswer,
    mode: SpanMode,
    lexicon: &Lexicon,
) -> Outcome {
    match extract_concept_from_span(instance, answer.start, answer.end, mode) {
        Extracted::Name(name) => resolve_concept(
            &name,
            instance.concept_offsets.iter().map(|c| &c.concept),
            lexicon,
        ),
        Extracted::MultiConcept => Outcome::MultiConcept,
        Extracted::Outside => Outcome::NoMatch,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankerKind {
    Bm25Top1,
    Lexical,
    Rerank,
    Span,
}

impl RankerKind {
    /// Tags of the predictions this ranker emits.
    pub fn tags(self) -> Vec<RankerTag> {
        match self {
            RankerKind::Bm25Top1 => vec![RankerTag::Bm25Top1],
            RankerKind::Lexical => vec![RankerTag::Lexical],
            RankerKind::Rerank => vec![RankerTag::Rerank],
            RankerKind::Span => SpanMode::ALL.iter().map(|m| m.tag()).collect(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RankerKind::Bm25Top1 => "bm25_top1",
            RankerKind::Lexical => "lexical",
            RankerKind::Rerank => "rerank",
            RankerKind::Span => "span",
        }
    }
}

impl FromStr for RankerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bm25_top1" | "bm25" => Ok(RankerKind::Bm25Top1),
            "lexical" => Ok(RankerKind::Lexical),
            "rerank" => Ok(RankerKind::Rerank),
            "span" => Ok(RankerKind::Span),
            other => Err(format!(
                "unknown ranker {other:?}; expected bm25_top1, lexical, rerank or span"
            )),
        }
    }
}

/// Ranker settings that do not depend on the mention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankerConfig {
    pub kind: RankerKind,
    pub synonym_order_seed: u64,
    pub candidate_order: CandidateOrder,
}

impl Default for RankerConfig {
    fn default() -> Self {
        RankerConfig {
            kind: RankerKind::Bm25Top1,
            synonym_order_seed: 0,
            candidate_order: CandidateOrder::Rank,
        }
    }
}

/// Runs one ranker on one candidate list. Span rankers emit one prediction per
/// mode. An empty list always predicts the unlinkable sentinel with score 0.
pub fn predict(
    config: &RankerConfig,
    scorer: &dyn Scorer,
    mention: &MentionRef,
    candidates: &CandidateList<f64>,
    lexicon: &Lexicon,
    gold: Option<&ConceptId>,
) -> Result<Vec<Prediction>, RankingError> {
    predict_inner(config, scorer, mention, candidates, lexicon, gold).map_err(|source| {
        RankingError {
            mention: mention.clone(),
            source,
        }
    })
}

fn predict_inner(
    config: &RankerConfig,
    scorer: &dyn Scorer,
    mention: &MentionRef,
    candidates: &CandidateList<f64>,
    lexicon: &Lexicon,
    gold: Option<&ConceptId>,
) -> Result<Vec<Prediction>, ScorerError> {
    let make = |predicted: Outcome, score: f64, ranker: RankerTag| Prediction {
        mention: mention.clone(),
        predicted,
        score,
        ranker,
    };
    if candidates.is_empty() {
        return Ok(config
            .kind
            .tags()
            .into_iter()
            .map(|t| make(Outcome::Concept(ConceptId::unlinkable()), 0.0, t))
            .collect());
    }
    let uses_scorer = matches!(config.kind, RankerKind::Rerank | RankerKind::Span);
    if uses_scorer && scorer.needs_gold() && gold.is_none() {
        return Err(ScorerError::NeedsGold(scorer.name()));
    }
    let labels = if uses_scorer && scorer.needs_gold() {
        gold
    } else {
        None
    };
    match config.kind {
        RankerKind::Bm25Top1 => {
            let head = candidates.head().expect("non-empty");
            Ok(vec![make(
                Outcome::Concept(head.concept.clone()),
                head.score,
                RankerTag::Bm25Top1,
            )])
        }
        RankerKind::Lexical | RankerKind::Rerank => {
            let insts = build_rerank_instances(
                &candidates.mention,
                candidates,
                lexicon,
                labels,
                config.synonym_order_seed,
            );
            let (tag, result) = if config.kind == RankerKind::Lexical {
                (RankerTag::Lexical, rerank(&insts, &LexicalScorer)?)
            } else {
                (RankerTag::Rerank, rerank(&insts, scorer)?)
            };
            let (concept, score) = result.expect("non-empty");
            Ok(vec![make(Outcome::Concept(concept), score, tag)])
        }
        RankerKind::Span => {
            let inst = build_span_instance(
                &candidates.mention,
                candidates,
                lexicon,
                config.candidate_order,
                labels,
            );
            let answer = scorer.score_span(&inst)?;
            Ok(SpanMode::ALL
                .iter()
                .map(|&m| {
                    make(
                        span_outcome(&inst, &answer, m, lexicon),
                        answer.score,
                        m.tag(),
                    )
                })
                .collect())
        }
    }
}
