//! Okapi BM25 candidate generation over concept preferred names and
//! training-set mention surfaces.
//!
//! Term weight for a query term `t` in document `d`:
//!
//! ```text
//! idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))
//! w(t,d) = idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(d) / avglen))
//! ```
//!
//! summed over query tokens (a repeated query token counts once per
//! occurrence). Documents are merged into concepts by keeping the best
//! document score; ties are ordered by ascending RID with `XXXXX` last.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::Read;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Mention, Report};
use crate::expansion::ExpandedMention;
use crate::lexicon::{ConceptId, Lexicon};
use crate::num::{ratio, Real};
use crate::text::normalize_ws;

/// English stop set applied when stopword removal is on.
pub const STOPWORDS: [&str; 33] = [
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "if", "in", "into", "is", "it",
    "no", "not", "of", "on", "or", "such", "that", "the", "their", "then", "there", "these",
    "they", "this", "to", "was", "will", "with",
];

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cannot build an index over an empty document collection")]
    EmptyCollection,
    #[error("unknown document id {0}")]
    UnknownDocument(usize),
    #[error("invalid BM25 parameters: {0}")]
    InvalidParams(String),
    #[error("{left} candidate lists but {right} gold concepts")]
    LengthMismatch { left: usize, right: usize },
    #[error("index file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Text analysis shared by indexing and querying: case folding, splitting on
/// non-alphanumeric characters, optional stopword removal and stemming.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Analyzer {
    pub stemming: bool,
    pub stopwords: bool,
}

impl Analyzer {
    pub fn tokens(&self, text: &str) -> Vec<String> {
        let lower = text.to_lowercase();
        let stemmer = self.stemming.then(|| Stemmer::create(Algorithm::English));
        lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .filter(|t| !self.stopwords || !STOPWORDS.contains(t))
            .map(|t| match &stemmer {
                Some(s) => s.stem(t).into_owned(),
                None => t.to_string(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params<S> {
    pub k1: S,
    pub b: S,
    pub n_candidates: usize,
    pub analyzer: Analyzer,
}

impl<S: Real> Default for Bm25Params<S> {
    fn default() -> Self {
        Bm25Params {
            k1: S::lit(1.2),
            b: S::lit(0.75),
            n_candidates: 10,
            analyzer: Analyzer::default(),
        }
    }
}

impl<S: Real> Bm25Params<S> {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if !(self.k1 >= S::zero()) || !self.k1.is_finite() {
            return Err(RetrievalError::InvalidParams(format!(
                "k1 must be >= 0, got {}",
                self.k1
            )));
        }
        if !(self.b >= S::zero() && self.b <= S::one()) {
            return Err(RetrievalError::InvalidParams(format!(
                "b must lie in [0, 1], got {}",
                self.b
            )));
        }
        if self.n_candidates == 0 {
            return Err(RetrievalError::InvalidParams(
                "n_candidates must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn with_n_candidates(mut self, n: usize) -> Self {
        self.n_candidates = n;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocSource {
    Lexicon,
    TrainingMention,
}

impl DocSource {
    fn as_str(self) -> &'static str {
        match self {
            DocSource::Lexicon => "lexicon",
            DocSource::TrainingMention => "training_mention",
        }
    }
}

/// Where a training-mention document came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MentionRef {
    pub report_id: String,
    pub mention_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexDocument {
    pub doc_id: usize,
    pub text: String,
    pub concept: ConceptId,
    pub source: DocSource,
    pub origin: Option<MentionRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate<S> {
    pub concept: ConceptId,
    pub score: S,
}

/// Ranked, deduplicated candidate concepts for one expanded mention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList<S> {
    pub mention: ExpandedMention,
    pub candidates: Vec<Candidate<S>>,
}

impl<S: Real> CandidateList<S> {
    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn contains(&self, concept: &ConceptId) -> bool {
        self.candidates.iter().any(|c| &c.concept == concept)
    }

    pub fn head(&self) -> Option<&Candidate<S>> {
        self.candidates.first()
    }

    pub fn concepts(&self) -> impl Iterator<Item = &ConceptId> {
        self.candidates.iter().map(|c| &c.concept)
    }
}

/// Descending score, then ascending concept id.
pub fn rank_order<S: Real>(a: &Candidate<S>, b: &Candidate<S>) -> std::cmp::Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then_with(|| a.concept.cmp(&b.concept))
}

/// Immutable BM25 inverted index.
#[derive(Debug, Clone, PartialEq)]
pub struct Bm25Index<S> {
    docs: Vec<IndexDocument>,
    doc_len: Vec<usize>,
    avg_len: S,
    postings: BTreeMap<String, Vec<(usize, usize)>>,
    params: Bm25Params<S>,
}

/// Accumulates documents before freezing them into an index.
#[derive(Debug, Clone, Default)]
pub struct IndexBuilder {
    docs: Vec<IndexDocument>,
}

impl IndexBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(
        &mut self,
        text: &str,
        concept: ConceptId,
        source: DocSource,
        origin: Option<MentionRef>,
    ) -> usize {
        let doc_id = self.docs.len();
        self.docs.push(IndexDocument {
            doc_id,
            text: normalize_ws(text),
            concept,
            source,
            origin,
        });
        doc_id
    }

    /// One lexicon-source document per concept, over its preferred name.
    pub fn add_lexicon(&mut self, lexicon: &Lexicon) -> &mut Self {
        for c in lexicon.concepts() {
            self.add(&c.preferred_name, c.id.clone(), DocSource::Lexicon, None);
        }
        self
    }

    pub fn add_mention(&mut self, mention: &Mention, origin: Option<MentionRef>) -> &mut Self {
        self.add(
            &mention.surface,
            mention.gold_concept.clone(),
            DocSource::TrainingMention,
            origin,
        );
        self
    }

    pub fn add_reports<'a>(&mut self, reports: impl IntoIterator<Item = &'a Report>) -> &mut Self {
        for r in reports {
            for m in &r.mentions {
                let origin = MentionRef {
                    report_id: r.report_id.clone(),
                    mention_id: m.id.clone(),
                };
                self.add_mention(m, Some(origin));
            }
        }
        self
    }

    pub fn build<S: Real>(self, params: Bm25Params<S>) -> Result<Bm25Index<S>, RetrievalError> {
        Bm25Index::from_documents(self.docs, params)
    }
}

/// Indexes every concept of `lexicon` plus the given training mentions.
pub fn build_index<S: Real>(
    lexicon: &Lexicon,
    training_mentions: &[Mention],
    params: Bm25Params<S>,
) -> Result<Bm25Index<S>, RetrievalError> {
    let mut b = IndexBuilder::new();
    b.add_lexicon(lexicon);
    for m in training_mentions {
        b.add_mention(m, None);
    }
    b.build(params)
}

impl<S: Real> Bm25Index<S> {
    /// Builds from documents whose `doc_id`s are `0..n` in order.
    pub fn from_documents(
        docs: Vec<IndexDocument>,
        params: Bm25Params<S>,
    ) -> Result<Self, RetrievalError> {
        params.validate()?;
        if docs.is_empty() {
            return Err(RetrievalError::EmptyCollection);
        }
        let mut postings: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
        let mut doc_len = Vec::with_capacity(docs.len());
        for (i, doc) in docs.iter().enumerate() {
            debug_assert_eq!(doc.doc_id, i);
            let tokens = params.analyzer.tokens(&doc.text);
            doc_len.push(tokens.len());
            let mut tf: BTreeMap<String, usize> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push((i, count));
            }
        }
        let total: usize = doc_len.iter().sum();
        let avg_len = if total == 0 {
            S::one()
        } else {
            S::from_count(total) / S::from_count(docs.len())
        };
        Ok(Bm25Index {
            docs,
            doc_len,
            avg_len,
            postings,
            params,
        })
    }

    pub fn params(&self) -> &Bm25Params<S> {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn avg_len(&self) -> S {
        self.avg_len
    }

    pub fn documents(&self) -> &[IndexDocument] {
        &self.docs
    }

    pub fn document(&self, doc_id: usize) -> Option<&IndexDocument> {
        self.docs.get(doc_id)
    }

    pub fn doc_len(&self, doc_id: usize) -> Option<usize> {
        self.doc_len.get(doc_id).copied()
    }

    /// Number of documents containing `term` (already analyzed).
    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    fn idf(&self, df: usize) -> S {
        let half = S::lit(0.5);
        let n = S::from_count(self.docs.len());
        let df = S::from_count(df);
        (S::one() + (n - df + half) / (df + half)).ln()
    }

    fn weight(&self, idf: S, tf: usize, len: usize, k1: S, b: S) -> S {
        let tf = S::from_count(tf);
        let norm = k1 * (S::one() - b + b * S::from_count(len) / self.avg_len);
        idf * (tf * (k1 + S::one())) / (tf + norm)
    }

    /// BM25 score of one document for `query`, using the index parameters.
    pub fn score(&self, query: &str, doc_id: usize) -> Result<S, RetrievalError> {
        self.score_with(query, doc_id, self.params.k1, self.params.b)
    }

    pub fn score_with(&self, query: &str, doc_id: usize, k1: S, b: S) -> Result<S, RetrievalError> {
        let len = self
            .doc_len(doc_id)
            .ok_or(RetrievalError::UnknownDocument(doc_id))?;
        let mut total = S::zero();
        for term in self.params.analyzer.tokens(query) {
            let Some(list) = self.postings.get(&term) else {
                continue;
            };
            if let Ok(pos) = list.binary_search_by_key(&doc_id, |&(d, _)| d) {
                total = total + self.weight(self.idf(list.len()), list[pos].1, len, k1, b);
            }
        }
        Ok(total)
    }

    /// Scores of every document sharing at least one term with `query`.
    pub fn score_documents(&self, query: &str, k1: S, b: S) -> BTreeMap<usize, S> {
        let mut acc: BTreeMap<usize, S> = BTreeMap::new();
        for term in self.params.analyzer.tokens(query) {
            let Some(list) = self.postings.get(&term) else {
                continue;
            };
            let idf = self.idf(list.len());
            for &(doc, tf) in list {
                let w = self.weight(idf, tf, self.doc_len[doc], k1, b);
                let slot = acc.entry(doc).or_insert_with(S::zero);
                *slot = *slot + w;
            }
        }
        acc
    }

    /// Candidate concepts for an expanded mention. `params.k1`, `params.b`
    /// and `params.n_candidates` apply; the analyzer is the index's own.
    pub fn retrieve(&self, mention: &ExpandedMention, params: &Bm25Params<S>) -> CandidateList<S> {
        let mut best: BTreeMap<&ConceptId, S> = BTreeMap::new();
        for (doc, score) in self.score_documents(&mention.expanded, params.k1, params.b) {
            let concept = &self.docs[doc].concept;
            let slot = best.entry(concept).or_insert(score);
            if score > *slot {
                *slot = score;
            }
        }
        let mut candidates: Vec<Candidate<S>> = best
            .into_iter()
            .map(|(concept, score)| Candidate {
                concept: concept.clone(),
                score,
            })
            .collect();
        candidates.sort_by(rank_order);
        candidates.truncate(params.n_candidates);
        CandidateList {
            mention: mention.clone(),
            candidates,
        }
    }

    /// Training-mention origins present in the index.
    pub fn mention_origins(&self) -> HashSet<&MentionRef> {
        self.docs.iter().filter_map(|d| d.origin.as_ref()).collect()
    }

    /// Versioned TSV serialization; see [`Bm25Index::read_tsv`].
    pub fn to_tsv(&self) -> String {
        let p = &self.params;
        let on_off = |b: bool| if b { "on" } else { "off" };
        let mut out = String::new();
        let _ = writeln!(out, "{INDEX_MAGIC}\t{INDEX_VERSION}");
        let _ = writeln!(out, "param\tk1\t{}", p.k1);
        let _ = writeln!(out, "param\tb\t{}", p.b);
        let _ = writeln!(out, "param\tn_candidates\t{}", p.n_candidates);
        let _ = writeln!(out, "param\tstemming\t{}", on_off(p.analyzer.stemming));
        let _ = writeln!(out, "param\tstopwords\t{}", on_off(p.analyzer.stopwords));
        let _ = writeln!(out, "stat\tdocuments\t{}", self.docs.len());
        let _ = writeln!(out, "stat\tavg_len\t{}", self.avg_len);
        for (d, len) in self.docs.iter().zip(&self.doc_len) {
            let (r, m) = match &d.origin {
                Some(o) => (o.report_id.as_str(), o.mention_id.as_str()),
                None => ("-", "-"),
            };
            let _ = writeln!(
                out,
                "doc\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                d.doc_id,
                d.concept,
                d.source.as_str(),
                len,
                r,
                m,
                d.text
            );
        }
        for (term, list) in &self.postings {
            let runs: Vec<String> = list.iter().map(|(d, tf)| format!("{d}:{tf}")).collect();
            let _ = writeln!(out, "post\t{term}\t{}", runs.join(" "));
        }
        out
    }

    /// Reads an index written by [`Bm25Index::to_tsv`]. Postings are checked
    /// against the stored document lengths.
    pub fn read_tsv(mut source: impl Read) -> Result<Self, RetrievalError> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        let err = |line: usize, message: String| RetrievalError::Format { line, message };
        let mut params = Bm25Params::<S>::default();
        let mut docs = Vec::new();
        let mut doc_len = Vec::new();
        let mut postings: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
        let mut declared_docs = None;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l == format!("{INDEX_MAGIC}\t{INDEX_VERSION}") => {}
            Some((_, l)) => return Err(err(1, format!("unsupported index header {l:?}"))),
            None => return Err(err(1, "empty index file".into())),
        }
        let num = |line: usize, s: &str| {
            s.parse::<usize>()
                .map_err(|_| err(line, format!("bad integer {s:?}")))
        };
        let real = |line: usize, s: &str| {
            s.parse::<f64>()
                .map(S::lit)
                .map_err(|_| err(line, format!("bad number {s:?}")))
        };
        let flag = |line: usize, s: &str| match s {
            "on" => Ok(true),
            "off" => Ok(false),
            _ => Err(err(line, format!("expected on|off, got {s:?}"))),
        };
        for (idx, raw) in lines {
            let line = idx + 1;
            let cells: Vec<&str> = raw.split('\t').collect();
            match (cells[0], cells.len()) {
                ("param", 3) => match cells[1] {
                    "k1" => params.k1 = real(line, cells[2])?,
                    "b" => params.b = real(line, cells[2])?,
                    "n_candidates" => params.n_candidates = num(line, cells[2])?,
                    "stemming" => params.analyzer.stemming = flag(line, cells[2])?,
                    "stopwords" => params.analyzer.stopwords = flag(line, cells[2])?,
                    other => return Err(err(line, format!("unknown parameter {other:?}"))),
                },
                ("stat", 3) => {
                    if cells[1] == "documents" {
                        declared_docs = Some(num(line, cells[2])?);
                    }
                }
                ("doc", 8) => {
                    let doc_id = num(line, cells[1])?;
                    if doc_id != docs.len() {
                        return Err(err(
                            line,
                            format!("document ids must be sequential, got {doc_id}"),
                        ));
                    }
                    let concept =
                        ConceptId::parse(cells[2]).map_err(|e| err(line, e.to_string()))?;
                    let source = match cells[3] {
                        "lexicon" => DocSource::Lexicon,
                        "training_mention" => DocSource::TrainingMention,
                        other => return Err(err(line, format!("unknown source {other:?}"))),
                    };
                    let origin = (cells[5] != "-").then(|| MentionRef {
                        report_id: cells[5].to_string(),
                        mention_id: cells[6].to_string(),
                    });
                    doc_len.push(num(line, cells[4])?);
                    docs.push(IndexDocument {
                        doc_id,
                        text: cells[7].to_string(),
                        concept,
                        source,
                        origin,
                    });
                }
                ("post", 3) => {
                    let mut list = Vec::new();
                    for run in cells[2].split(' ') {
                        let (d, tf) = run
                            .split_once(':')
                            .ok_or_else(|| err(line, format!("bad posting {run:?}")))?;
                        list.push((num(line, d)?, num(line, tf)?));
                    }
                    postings.insert(cells[1].to_string(), list);
                }
                _ => return Err(err(line, format!("unrecognised record {:?}", cells[0]))),
            }
        }
        if declared_docs != Some(docs.len()) {
            return Err(err(
                0,
                "document count does not match the stat record".into(),
            ));
        }
        let mut sums = vec![0usize; docs.len()];
        for list in postings.values() {
            for &(d, tf) in list {
                *sums
                    .get_mut(d)
                    .ok_or_else(|| err(0, format!("posting names unknown document {d}")))? += tf;
            }
        }
        if sums != doc_len {
            return Err(err(
                0,
                "postings disagree with stored document lengths".into(),
            ));
        }
        let rebuilt = Bm25Index::from_documents(docs, params)?;
        if rebuilt.postings != postings {
            return Err(err(0, "postings disagree with document texts".into()));
        }
        Ok(rebuilt)
    }
}

pub const INDEX_MAGIC: &str = "radnorm-bm25-index";
pub const INDEX_VERSION: u32 = 1;

/// Free-function form of [`Bm25Index::score`].
pub fn score<S: Real>(
    index: &Bm25Index<S>,
    query: &str,
    doc_id: usize,
) -> Result<S, RetrievalError> {
    index.score(query, doc_id)
}

/// Free-function form of [`Bm25Index::retrieve`].
pub fn retrieve_candidates<S: Real>(
    index: &Bm25Index<S>,
    mention: &ExpandedMention,
    params: &Bm25Params<S>,
) -> CandidateList<S> {
    index.retrieve(mention, params)
}

/// Whether `gold` counts as retrieved: present in the list, or the list is
/// empty and the gold is RID-less.
pub fn gold_retrieved<S: Real>(list: &CandidateList<S>, gold: &ConceptId) -> bool {
    list.contains(gold) || (gold.is_unlinkable() && list.is_empty())
}

/// Fraction of mentions whose gold concept is retrieved.
pub fn recall_at_n<S: Real>(
    candidate_lists: &[CandidateList<S>],
    golds: &[ConceptId],
) -> Result<S, RetrievalError> {
    if candidate_lists.len() != golds.len() {
        return Err(RetrievalError::LengthMismatch {
            left: candidate_lists.len(),
            right: golds.len(),
        });
    }
    let hits = candidate_lists
        .iter()
        .zip(golds)
        .filter(|(l, g)| gold_retrieved(l, g))
        .count();
    Ok(ratio(hits, golds.len(), S::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::ExpandedMention;
    use crate::lexicon::parse_lexicon_str;

    fn rid(s: &str) -> ConceptId {
        ConceptId::parse(s).unwrap()
    }

    fn q(text: &str) -> ExpandedMention {
        ExpandedMention::unexpanded(text)
    }

    fn lexicon() -> Lexicon {
        parse_lexicon_str(
            "rid\tpreferred_name\tsynonyms\tparents\tdefinition\n\
             RID1534\tcostophrenic sulcus\t\t\t\n\
             RID1301\tlung\t\t\t\n\
             RID5\tthoracostomy tube\t\t\t\n",
        )
        .unwrap()
    }

    fn mention(surface: &str, gold: &str) -> Mention {
        Mention {
            id: "T1".into(),
            span_start: 0,
            span_end: surface.chars().count(),
            surface: surface.into(),
            entity_class: crate::corpus::EntityClass::MedicalDevice,
            gold_concept: rid(gold),
        }
    }

    #[test]
    fn analyzer_splits_on_non_alphanumerics() {
        let a = Analyzer::default();
        assert_eq!(
            a.tokens("Naso-Gastric  tube(s)"),
            vec!["naso", "gastric", "tube", "s"]
        );
        let a = Analyzer {
            stemming: true,
            stopwords: true,
        };
        assert_eq!(a.tokens("effusions of the lungs"), vec!["effus", "lung"]);
    }

    #[test]
    fn lexicon_only_index() {
        let idx = build_index::<f64>(&lexicon(), &[], Bm25Params::default()).unwrap();
        assert_eq!(idx.len(), 3);
        assert!((idx.avg_len() - 5.0 / 3.0).abs() < 1e-12);
        assert!(idx
            .documents()
            .iter()
            .all(|d| d.source == DocSource::Lexicon));
    }

    #[test]
    fn training_mentions_become_documents() {
        let idx = build_index::<f64>(
            &lexicon(),
            &[mention("chest tube", "RID5")],
            Bm25Params::default(),
        )
        .unwrap();
        assert_eq!(idx.len(), 4);
        let d = idx.document(3).unwrap();
        assert_eq!(d.concept, rid("RID5"));
        assert_eq!(d.source, DocSource::TrainingMention);
        let list = idx.retrieve(&q("chest tube"), &Bm25Params::default());
        assert_eq!(list.head().unwrap().concept, rid("RID5"));
    }

    #[test]
    fn duplicate_training_mentions_are_distinct_documents() {
        let ms = [mention("chest tube", "RID5"), mention("chest tube", "RID5")];
        let idx = build_index::<f64>(&lexicon(), &ms, Bm25Params::default()).unwrap();
        assert_eq!(idx.len(), 5);
        assert_eq!(idx.doc_freq("chest"), 2);
        assert_eq!(idx.doc_freq("tube"), 3);
        assert_eq!(
            idx.score("chest tube", 3).unwrap(),
            idx.score("chest tube", 4).unwrap()
        );
    }

    #[test]
    fn empty_collection_and_bad_params() {
        assert!(matches!(
            build_index::<f64>(&Lexicon::default(), &[], Bm25Params::default()),
            Err(RetrievalError::EmptyCollection)
        ));
        let bad = Bm25Params::<f64> {
            b: 1.5,
            ..Default::default()
        };
        assert!(matches!(
            build_index(&lexicon(), &[], bad),
            Err(RetrievalError::InvalidParams(_))
        ));
    }

    #[test]
    fn score_without_overlap_is_zero() {
        let idx = build_index::<f64>(&lexicon(), &[], Bm25Params::default()).unwrap();
        assert_eq!(idx.score("pleural effusion", 0).unwrap(), 0.0);
        assert!(matches!(
            idx.score("lung", 99),
            Err(RetrievalError::UnknownDocument(99))
        ));
    }

    #[test]
    fn single_document_closed_form() {
        // One document "pleural effusion": N = 1, df = 1, tf = 1, len = avglen.
        let lex = parse_lexicon_str(
            "rid\tpreferred_name\tsynonyms\tparents\tdefinition\nRID1\tpleural effusion\t\t\t",
        )
        .unwrap();
        let idx = build_index::<f64>(&lex, &[], Bm25Params::default()).unwrap();
        let idf = (1.0f64 + (1.0 - 1.0 + 0.5) / (1.0 + 0.5)).ln();
        let per_term = idf * (1.2 + 1.0) * 1.0 / (1.0 + 1.2);
        let expected = 2.0 * per_term;
        assert!((idx.score("pleural effusion", 0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 2.0 * (4.0f64 / 3.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn max_over_documents_of_one_concept() {
        let ms = [mention("costophrenic angle", "RID1534")];
        let idx = build_index::<f64>(&lexicon(), &ms, Bm25Params::default()).unwrap();
        let list = idx.retrieve(&q("costophrenic angle"), &Bm25Params::default());
        assert_eq!(list.len(), 1);
        assert_eq!(list.candidates[0].concept, rid("RID1534"));
        let via_mention_doc = idx.score("costophrenic angle", 3).unwrap();
        let via_name_doc = idx.score("costophrenic angle", 0).unwrap();
        assert!(via_mention_doc > via_name_doc);
        assert_eq!(list.candidates[0].score, via_mention_doc);
        assert!(!list.contains(&rid("RID1301")));
    }

    #[test]
    fn no_overlap_gives_empty_list() {
        let idx = build_index::<f64>(&lexicon(), &[], Bm25Params::default()).unwrap();
        assert!(idx
            .retrieve(&q("hydrocephalus"), &Bm25Params::default())
            .is_empty());
    }

    #[test]
    fn ties_order_by_rid_with_sentinel_last() {
        let ms = [
            mention("tube", "XXXXX"),
            mention("tube", "RID90"),
            mention("tube", "RID7"),
        ];
        let idx = build_index::<f64>(&Lexicon::default(), &ms, Bm25Params::default()).unwrap();
        let list = idx.retrieve(&q("tube"), &Bm25Params::default());
        let order: Vec<&str> = list.concepts().map(ConceptId::as_str).collect();
        assert_eq!(order, vec!["RID7", "RID90", "XXXXX"]);
    }

    #[test]
    fn smaller_n_is_prefix() {
        let ms: Vec<Mention> = (0..30)
            .map(|i| mention(&format!("tube w{i}"), &format!("RID{}", 100 + i)))
            .collect();
        let idx = build_index::<f64>(&lexicon(), &ms, Bm25Params::default()).unwrap();
        let ten = idx.retrieve(&q("thoracostomy tube w3"), &Bm25Params::default());
        let twenty_five = idx.retrieve(
            &q("thoracostomy tube w3"),
            &Bm25Params::default().with_n_candidates(25),
        );
        assert_eq!(ten.len(), 10);
        assert_eq!(twenty_five.len(), 25);
        assert_eq!(ten.candidates[..], twenty_five.candidates[..10]);
    }

    #[test]
    fn recall_rules() {
        let list = |ids: &[&str]| CandidateList::<f64> {
            mention: q("m"),
            candidates: ids
                .iter()
                .map(|i| Candidate {
                    concept: rid(i),
                    score: 1.0,
                })
                .collect(),
        };
        let lists = vec![
            list(&["RID1"]),
            list(&["RID2", "RID3"]),
            list(&["RID4"]),
            list(&[]),
        ];
        let golds = vec![rid("RID1"), rid("RID3"), rid("RID4"), rid("XXXXX")];
        assert_eq!(recall_at_n::<f64>(&lists, &golds).unwrap(), 1.0);
        let misses = vec![rid("RID9"), rid("RID9"), rid("RID9"), rid("RID9")];
        assert_eq!(recall_at_n::<f64>(&lists, &misses).unwrap(), 0.0);
        assert!(recall_at_n::<f64>(&lists, &golds[..2]).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let ms = [mention("chest tube", "RID5"), mention("left lung", "XXXXX")];
        let mut b = IndexBuilder::new();
        b.add_lexicon(&lexicon());
        b.add_mention(
            &ms[0],
            Some(MentionRef {
                report_id: "r1".into(),
                mention_id: "T1".into(),
            }),
        );
        b.add_mention(&ms[1], None);
        let params = Bm25Params::<f64> {
            k1: 0.9,
            b: 0.4,
            n_candidates: 25,
            analyzer: Analyzer {
                stemming: true,
                stopwords: false,
            },
        };
        let idx = b.build(params).unwrap();
        let text = idx.to_tsv();
        let back = Bm25Index::<f64>::read_tsv(text.as_bytes()).unwrap();
        assert_eq!(back, idx);
        assert!(
            Bm25Index::<f64>::read_tsv(text.replace("post\ttube", "post\ttubes").as_bytes())
                .is_err()
        );
        assert!(Bm25Index::<f64>::read_tsv("radnorm-bm25-index\t2\n".as_bytes()).is_err());
    }

    #[test]
    fn f32_index_agrees_with_f64_ordering_on_small_fixture() {
        let ms = [
            mention("costophrenic angle", "RID1534"),
            mention("chest tube", "RID5"),
        ];
        let i64_ = build_index::<f64>(&lexicon(), &ms, Bm25Params::default()).unwrap();
        let i32_ = build_index::<f32>(&lexicon(), &ms, Bm25Params::default()).unwrap();
        let a: Vec<ConceptId> = i64_
            .retrieve(&q("costophrenic tube"), &Bm25Params::default())
            .concepts()
            .cloned()
            .collect();
        let b: Vec<ConceptId> = i32_
            .retrieve(&q("costophrenic tube"), &Bm25Params::default())
            .concepts()
            .cloned()
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn concurrent_readers_match_serial() {
        let idx = build_index::<f64>(
            &lexicon(),
            &[mention("chest tube", "RID5")],
            Bm25Params::default(),
        )
        .unwrap();
        let queries = ["lung", "chest tube", "costophrenic", "tube lung"];
        let serial: Vec<_> = queries
            .iter()
            .map(|m| idx.retrieve(&q(m), &Bm25Params::default()))
            .collect();
        let parallel: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = queries
                .iter()
                .map(|m| {
                    let idx = &idx;
                    s.spawn(move || idx.retrieve(&q(m), &Bm25Params::default()))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert_eq!(serial, parallel);
    }
}
