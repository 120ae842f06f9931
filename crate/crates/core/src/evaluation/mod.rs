//! Cross-validated evaluation of normalization and span tagging.
//!
//! Each fold rebuilds the BM25 index from the lexicon plus that fold's
//! training mentions, so test mentions can never be retrieved as documents.
//! Folds run in parallel; results are merged in fold order, so output does
//! not depend on the number of workers.

mod folds;
mod output;

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{to_bio, Corpus, CorpusError, Report};
use crate::expansion::{expand_mention_with, AbbreviationDict, ExpansionOptions};
use crate::lexicon::{ConceptId, Lexicon};
use crate::num::{mean, ratio, Real};
use crate::ranking::{
    predict, Outcome, Prediction, RankerConfig, RankerTag, RankingError, Scorer, ScorerError,
};
use crate::retrieval::{
    gold_retrieved, Bm25Params, CandidateList, IndexBuilder, MentionRef, RetrievalError,
};
use crate::span_detection::{evaluate_spans, DictionaryTagger, SpanError, TaggedSentence};

pub use folds::{make_folds, make_folds_stratified, FoldPlan};
pub use output::{normalization_markdown, predictions_tsv, tagging_markdown, PREDICTIONS_HEADER};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("{reports} reports cannot fill {folds} folds")]
    TooFewReports { reports: usize, folds: usize },
    #[error("duplicate report id {0}")]
    DuplicateReport(String),
    #[error("fold plan names unknown report {0}")]
    UnknownReport(String),
    #[error("{predictions} predictions, {golds} gold concepts and {lists} candidate lists")]
    LengthMismatch {
        predictions: usize,
        golds: usize,
        lists: usize,
    },
    #[error("test mention {}/{} is present in the index", .0.report_id, .0.mention_id)]
    Leakage(MentionRef),
    #[error("cannot start worker pool: {0}")]
    ThreadPool(String),
    #[error("fold {fold}: {source}")]
    Fold { fold: usize, source: Box<EvalError> },
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Span(#[from] SpanError),
}

impl EvalError {
    fn in_fold(self, fold: usize) -> Self {
        EvalError::Fold {
            fold,
            source: Box::new(self),
        }
    }
}

/// Top-1 accuracy in which a mention with an empty candidate list is correct
/// exactly when its gold concept is the unlinkable sentinel.
pub fn adjusted_accuracy<S: Real, T: Real>(
    predictions: &[Prediction],
    golds: &[ConceptId],
    candidate_lists: &[CandidateList<T>],
) -> Result<S, EvalError> {
    if predictions.len() != golds.len() || golds.len() != candidate_lists.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
            lists: candidate_lists.len(),
        });
    }
    let correct = predictions
        .iter()
        .zip(golds)
        .zip(candidate_lists)
        .filter(|((p, g), l)| {
            if l.is_empty() {
                g.is_unlinkable()
            } else {
                p.is_correct(g)
            }
        })
        .count();
    Ok(ratio(correct, golds.len(), S::zero()))
}

/// Everything that determines a normalization run's results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationConfig {
    pub bm25: Bm25Params<f64>,
    pub expansion: ExpansionOptions,
    pub ranker: RankerConfig,
    pub scorer: String,
    pub folds: usize,
    pub seed: u64,
    pub stratify_modality: bool,
    /// Extra recall cutoffs; recall at `bm25.n_candidates` is always reported.
    pub recall_at: Vec<usize>,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        NormalizationConfig {
            bm25: Bm25Params::default(),
            expansion: ExpansionOptions::default(),
            ranker: RankerConfig::default(),
            scorer: "echo-bm25".into(),
            folds: 10,
            seed: 0,
            stratify_modality: false,
            recall_at: Vec::new(),
        }
    }
}

impl NormalizationConfig {
    /// Recall cutoffs in ascending order, deduplicated.
    pub fn cutoffs(&self) -> Vec<usize> {
        let mut c = self.recall_at.clone();
        c.push(self.bm25.n_candidates);
        c.sort_unstable();
        c.dedup();
        c.retain(|&n| n > 0);
        c
    }

    pub fn plan(&self, corpus: &Corpus) -> Result<Vec<FoldPlan>, EvalError> {
        plan_folds(corpus, self.folds, self.seed, self.stratify_modality)
    }
}

pub fn plan_folds(
    corpus: &Corpus,
    k: usize,
    seed: u64,
    stratify: bool,
) -> Result<Vec<FoldPlan>, EvalError> {
    if stratify {
        let pairs: Vec<_> = corpus
            .reports
            .iter()
            .map(|r| (r.report_id.clone(), r.modality_group))
            .collect();
        make_folds_stratified(&pairs, k, seed)
    } else {
        make_folds(&corpus.report_ids(), k, seed)
    }
}

/// Counts and metrics for one fold. Metric names are `recall@<n>`,
/// `accuracy` (single-prediction rankers) or `accuracy_<mode>` (span ranker),
/// and `precision`/`recall`/`f1` for tagging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold_id: usize,
    pub train_reports: usize,
    pub validation_reports: usize,
    pub test_reports: usize,
    pub test_items: usize,
    pub index_documents: usize,
    pub empty_candidate_lists: usize,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: serde_json::Value,
    pub per_fold: Vec<FoldMetrics>,
    pub averaged: BTreeMap<String, f64>,
}

impl EvalReport {
    fn assemble(config: serde_json::Value, per_fold: Vec<FoldMetrics>) -> Self {
        let mut names: Vec<&String> = per_fold.iter().flat_map(|f| f.metrics.keys()).collect();
        names.sort();
        names.dedup();
        let averaged = names
            .into_iter()
            .map(|name| {
                let values: Vec<f64> = per_fold
                    .iter()
                    .filter_map(|f| f.metrics.get(name).copied())
                    .collect();
                (name.clone(), mean(&values))
            })
            .collect();
        EvalReport {
            config,
            per_fold,
            averaged,
        }
    }

    /// Pretty JSON with a trailing newline; stable for identical inputs.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// One evaluated test mention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub fold_id: usize,
    pub report_id: String,
    pub mention_id: String,
    pub gold: ConceptId,
    pub predicted: Outcome,
    pub ranker: RankerTag,
    pub score: f64,
    /// Gold found among the ranker's `n_candidates` candidates.
    pub retrieved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationRun {
    pub report: EvalReport,
    pub predictions: Vec<PredictionRecord>,
}

fn metric_name_accuracy(tag: RankerTag) -> String {
    match tag {
        RankerTag::SpanOriginal => "accuracy_original".into(),
        RankerTag::SpanFirst => "accuracy_first".into(),
        RankerTag::SpanLast => "accuracy_last".into(),
        _ => "accuracy".into(),
    }
}

pub fn recall_metric_name(n: usize) -> String {
    format!("recall@{n}")
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, EvalError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| EvalError::ThreadPool(e.to_string()))
}

fn select<'a>(
    by_id: &BTreeMap<&str, &'a Report>,
    ids: &[String],
) -> Result<Vec<&'a Report>, EvalError> {
    ids.iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| EvalError::UnknownReport(id.clone()))
        })
        .collect()
}

struct Inputs<'a> {
    by_id: BTreeMap<&'a str, &'a Report>,
    lexicon: &'a Lexicon,
    dict: &'a AbbreviationDict,
    config: &'a NormalizationConfig,
    scorer: &'a dyn Scorer,
}

fn normalization_fold(
    inputs: &Inputs<'_>,
    plan: &FoldPlan,
) -> Result<(FoldMetrics, Vec<PredictionRecord>), EvalError> {
    let config = inputs.config;
    let train = select(&inputs.by_id, &plan.train)?;
    let test = select(&inputs.by_id, &plan.test)?;

    let mut builder = IndexBuilder::new();
    builder
        .add_lexicon(inputs.lexicon)
        .add_reports(train.iter().copied());
    let index = builder.build(config.bm25)?;

    let test_refs: HashSet<MentionRef> = test
        .iter()
        .flat_map(|r| {
            r.mentions.iter().map(|m| MentionRef {
                report_id: r.report_id.clone(),
                mention_id: m.id.clone(),
            })
        })
        .collect();
    if let Some(leak) = index
        .mention_origins()
        .into_iter()
        .find(|o| test_refs.contains(*o))
    {
        return Err(EvalError::Leakage(leak.clone()));
    }

    let cutoffs = config.cutoffs();
    let deepest = config
        .bm25
        .with_n_candidates(*cutoffs.last().expect("at least one cutoff"));
    let n = config.bm25.n_candidates;
    let tags = config.ranker.kind.tags();

    let mut hits: BTreeMap<usize, usize> = cutoffs.iter().map(|&c| (c, 0)).collect();
    let mut correct: BTreeMap<RankerTag, usize> = tags.iter().map(|&t| (t, 0)).collect();
    let mut records = Vec::new();
    let mut items = 0;
    let mut empty = 0;

    for report in &test {
        for m in &report.mentions {
            items += 1;
            let mention_ref = MentionRef {
                report_id: report.report_id.clone(),
                mention_id: m.id.clone(),
            };
            let expanded =
                expand_mention_with(&m.surface, inputs.lexicon, inputs.dict, config.expansion);
            let deep = index.retrieve(&expanded, &deepest);
            for (&cut, count) in hits.iter_mut() {
                let mut at = deep.clone();
                at.candidates.truncate(cut);
                if gold_retrieved(&at, &m.gold_concept) {
                    *count += 1;
                }
            }
            let mut list = deep;
            list.candidates.truncate(n);
            if list.is_empty() {
                empty += 1;
            }
            let retrieved = gold_retrieved(&list, &m.gold_concept);
            let preds = predict(
                &config.ranker,
                inputs.scorer,
                &mention_ref,
                &list,
                inputs.lexicon,
                Some(&m.gold_concept),
            )?;
            for p in preds {
                let ok = if list.is_empty() {
                    m.gold_concept.is_unlinkable()
                } else {
                    p.is_correct(&m.gold_concept)
                };
                if ok {
                    *correct.entry(p.ranker).or_default() += 1;
                }
                records.push(PredictionRecord {
                    fold_id: plan.fold_id,
                    report_id: p.mention.report_id,
                    mention_id: p.mention.mention_id,
                    gold: m.gold_concept.clone(),
                    predicted: p.predicted,
                    ranker: p.ranker,
                    score: p.score,
                    retrieved,
                });
            }
        }
    }

    let mut metrics = BTreeMap::new();
    for (cut, h) in hits {
        metrics.insert(recall_metric_name(cut), ratio(h, items, 0.0));
    }
    for (tag, c) in correct {
        metrics.insert(metric_name_accuracy(tag), ratio(c, items, 0.0));
    }
    let fold = FoldMetrics {
        fold_id: plan.fold_id,
        train_reports: plan.train.len(),
        validation_reports: plan.validation.len(),
        test_reports: plan.test.len(),
        test_items: items,
        index_documents: index.len(),
        empty_candidate_lists: empty,
        metrics,
    };
    Ok((fold, records))
}

/// Cross-validated normalization: per fold, index the lexicon plus training
/// mentions, retrieve candidates for each gold test mention, rank, and score
/// recall at every cutoff and adjusted accuracy for every prediction kind.
pub fn evaluate_normalization(
    corpus: &Corpus,
    lexicon: &Lexicon,
    dict: &AbbreviationDict,
    config: &NormalizationConfig,
    plans: &[FoldPlan],
    scorer: &dyn Scorer,
    jobs: usize,
) -> Result<NormalizationRun, EvalError> {
    config.bm25.validate()?;
    let inputs = Inputs {
        by_id: corpus.by_id(),
        lexicon,
        dict,
        config,
        scorer,
    };
    let results: Vec<_> = thread_pool(jobs)?.install(|| {
        plans
            .par_iter()
            .map(|p| normalization_fold(&inputs, p).map_err(|e| e.in_fold(p.fold_id)))
            .collect()
    });
    let mut per_fold = Vec::with_capacity(plans.len());
    let mut predictions = Vec::new();
    for r in results {
        let (m, recs) = r?;
        per_fold.push(m);
        predictions.extend(recs);
    }
    let echo = serde_json::to_value(config).expect("config serializes");
    Ok(NormalizationRun {
        report: EvalReport::assemble(echo, per_fold),
        predictions,
    })
}

/// Where predicted tags come from.
#[derive(Clone, Copy)]
pub enum TaggerSource<'a> {
    /// Greedy longest match over lexicon terms plus training-fold mention surfaces.
    Dictionary,
    /// The gold tags themselves; a sanity check.
    Gold,
    /// A remote tagger speaking the scorer protocol.
    Remote(&'a dyn Scorer),
}

impl TaggerSource<'_> {
    pub fn name(&self) -> String {
        match self {
            TaggerSource::Dictionary => "dictionary".into(),
            TaggerSource::Gold => "gold".into(),
            TaggerSource::Remote(s) => s.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggingConfig {
    pub tagger: String,
    pub folds: usize,
    pub seed: u64,
    pub stratify_modality: bool,
}

fn tagging_fold(
    by_id: &BTreeMap<&str, &Report>,
    lexicon: &Lexicon,
    source: TaggerSource<'_>,
    plan: &FoldPlan,
) -> Result<FoldMetrics, EvalError> {
    let train = select(by_id, &plan.train)?;
    let test = select(by_id, &plan.test)?;
    let tagger = match source {
        TaggerSource::Dictionary => Some(DictionaryTagger::new(
            lexicon,
            train
                .iter()
                .flat_map(|r| r.mentions.iter().map(|m| m.surface.as_str())),
        )),
        _ => None,
    };
    let mut gold: Vec<TaggedSentence> = Vec::new();
    for r in &test {
        gold.extend(to_bio(r)?);
    }
    let predicted = gold
        .iter()
        .map(|g| match source {
            TaggerSource::Gold => Ok(g.clone()),
            TaggerSource::Dictionary => Ok(tagger
                .as_ref()
                .expect("built above")
                .tag_tokens(g.tokens.clone())),
            TaggerSource::Remote(s) => {
                let texts: Vec<String> = g.tokens.iter().map(|t| t.text.clone()).collect();
                let tags = s.tag(&texts)?;
                Ok(TaggedSentence::new(g.tokens.clone(), tags)?)
            }
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let scores = evaluate_spans::<f64>(&predicted, &gold)?;
    let metrics = BTreeMap::from([
        ("precision".to_string(), scores.precision),
        ("recall".to_string(), scores.recall),
        ("f1".to_string(), scores.f1),
    ]);
    Ok(FoldMetrics {
        fold_id: plan.fold_id,
        train_reports: plan.train.len(),
        validation_reports: plan.validation.len(),
        test_reports: plan.test.len(),
        test_items: gold.len(),
        index_documents: tagger.as_ref().map_or(0, DictionaryTagger::len),
        empty_candidate_lists: 0,
        metrics,
    })
}

/// Cross-validated exact-match span tagging. P/R/F1 are micro-pooled within a
/// fold, then averaged over folds.
pub fn evaluate_tagging(
    corpus: &Corpus,
    lexicon: &Lexicon,
    source: TaggerSource<'_>,
    config: &TaggingConfig,
    plans: &[FoldPlan],
    jobs: usize,
) -> Result<EvalReport, EvalError> {
    let by_id = corpus.by_id();
    let results: Vec<_> = thread_pool(jobs)?.install(|| {
        plans
            .par_iter()
            .map(|p| tagging_fold(&by_id, lexicon, source, p).map_err(|e| e.in_fold(p.fold_id)))
            .collect()
    });
    let per_fold = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let echo = serde_json::to_value(config).expect("config serializes");
    Ok(EvalReport::assemble(echo, per_fold))
}
