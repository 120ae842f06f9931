//! Deterministic in-process scorers: baselines, a lexical heuristic and
//! diagnostic stubs.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use super::instances::{ConceptOffset, RerankInstance, SpanInstance};
use super::{Scorer, ScorerError, SpanAnswer};
use crate::text::fold;

/// Returns each candidate's retrieval score. Re-ranking with it reproduces
/// the BM25 top-1 ranking.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoBm25Scorer;

/// Highest token-set Jaccard overlap between the mention and the candidate's
/// name or any synonym; ties fall back to retrieval score.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer;

/// Scores the gold candidate 1 and everything else 0. Needs labels, so it is
/// only useful for checking the plumbing.
#[derive(Debug, Clone, Copy, Default)]
pub struct GoldOracleScorer;

/// Gives every instance the same score.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

fn token_set(s: &str) -> BTreeSet<String> {
    fold(s)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn jaccard(a: &str, b: &str) -> f64 {
    let (a, b) = (token_set(a), token_set(b));
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

fn best_offset(
    offsets: &[ConceptOffset],
    key: impl Fn(&ConceptOffset) -> (f64, f64),
) -> Option<&ConceptOffset> {
    offsets.iter().max_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.partial_cmp(&kb.0)
            .unwrap_or(Ordering::Equal)
            .then(ka.1.partial_cmp(&kb.1).unwrap_or(Ordering::Equal))
            .then_with(|| b.concept.cmp(&a.concept))
    })
}

fn answer(o: Option<&ConceptOffset>, instance: &SpanInstance, score: f64) -> SpanAnswer {
    match o {
        Some(o) => SpanAnswer {
            start: o.start,
            end: o.end,
            score,
        },
        None => SpanAnswer {
            start: instance.segment_two_start,
            end: instance.segment_two_start,
            score: 0.0,
        },
    }
}

impl Scorer for EchoBm25Scorer {
    fn name(&self) -> String {
        "echo-bm25".into()
    }

    fn score_rerank(&self, instances: &[RerankInstance]) -> Result<Vec<f64>, ScorerError> {
        Ok(instances.iter().map(|i| i.retrieval_score).collect())
    }

    fn score_span(&self, instance: &SpanInstance) -> Result<SpanAnswer, ScorerError> {
        let best = best_offset(&instance.concept_offsets, |o| (o.retrieval_score, 0.0));
        Ok(answer(
            best,
            instance,
            best.map_or(0.0, |o| o.retrieval_score),
        ))
    }
}

impl Scorer for LexicalScorer {
    fn name(&self) -> String {
        "lexical".into()
    }

    fn breaks_ties_by_retrieval(&self) -> bool {
        true
    }

    fn score_rerank(&self, instances: &[RerankInstance]) -> Result<Vec<f64>, ScorerError> {
        Ok(instances
            .iter()
            .map(|i| {
                std::iter::once(&i.candidate_name)
                    .chain(&i.synonyms)
                    .map(|s| jaccard(&i.mention.expanded, s))
                    .fold(0.0, f64::max)
            })
            .collect())
    }

    fn score_span(&self, instance: &SpanInstance) -> Result<SpanAnswer, ScorerError> {
        let m = &instance.mention.expanded;
        let sim = |o: &ConceptOffset| jaccard(m, instance.slice(o.start, o.end).unwrap_or(""));
        let best = best_offset(&instance.concept_offsets, |o| (sim(o), o.retrieval_score));
        Ok(answer(best, instance, best.map_or(0.0, sim)))
    }
}

impl Scorer for GoldOracleScorer {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn needs_gold(&self) -> bool {
        true
    }

    fn score_rerank(&self, instances: &[RerankInstance]) -> Result<Vec<f64>, ScorerError> {
        instances
            .iter()
            .map(|i| match i.label {
                Some(true) => Ok(1.0),
                Some(false) => Ok(0.0),
                None => Err(ScorerError::NeedsGold(self.name())),
            })
            .collect()
    }

    fn score_span(&self, instance: &SpanInstance) -> Result<SpanAnswer, ScorerError> {
        // Without a gold span, answer with an empty span so nothing resolves.
        Ok(match instance.gold_span {
            Some((start, end)) => SpanAnswer {
                start,
                end,
                score: 1.0,
            },
            None => answer(None, instance, 0.0),
        })
    }
}

impl Scorer for ConstantScorer {
    fn name(&self) -> String {
        format!("constant:{}", self.0)
    }

    fn score_rerank(&self, instances: &[RerankInstance]) -> Result<Vec<f64>, ScorerError> {
        Ok(vec![self.0; instances.len()])
    }

    fn score_span(&self, instance: &SpanInstance) -> Result<SpanAnswer, ScorerError> {
        Ok(answer(instance.concept_offsets.first(), instance, self.0))
    }
}
