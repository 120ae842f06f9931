//! Normalization of radiology entity mentions to RadLex-style concepts.
//!
//! The pipeline expands each mention (abbreviations, lexicon synonyms),
//! retrieves BM25 candidates from an index over concept names and training
//! mentions, and picks one concept with a pluggable ranker. Around it sit a
//! BRAT corpus toolkit and a report-level cross-validation harness.
//!
//! Scoring and metric code is generic over [`Real`]; the aliases below fix it
//! to `f64`, which is what the pipeline and the command-line tool use.

pub mod corpus;
pub mod evaluation;
pub mod expansion;
pub mod lexicon;
pub mod num;
pub mod ranking;
pub mod retrieval;
pub mod span_detection;
pub mod synthetic;
pub mod text;

pub use num::Real;

/// Score type used throughout the pipeline.
pub type Score = f64;
pub type Bm25Index = retrieval::Bm25Index<Score>;
pub type Bm25Params = retrieval::Bm25Params<Score>;
pub type Candidate = retrieval::Candidate<Score>;
pub type CandidateList = retrieval::CandidateList<Score>;
pub type SpanScores = span_detection::SpanScores<Score>;

/// Single-precision variants, for memory-constrained indexes.
pub type Bm25Index32 = retrieval::Bm25Index<f32>;
pub type Bm25Params32 = retrieval::Bm25Params<f32>;

pub use corpus::{Corpus, EntityClass, Mention, Report};
pub use expansion::{AbbreviationDict, ExpandedMention};
pub use lexicon::{Concept, ConceptId, Lexicon};
