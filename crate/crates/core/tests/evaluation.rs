//! Cross-validation harness on the bundled synthetic corpus.

use radnorm::evaluation::{
    evaluate_normalization, evaluate_tagging, plan_folds, NormalizationConfig, TaggerSource,
    TaggingConfig,
};
use radnorm::ranking::{ConstantScorer, LexicalScorer, RankerKind, Scorer};
use radnorm::synthetic::{self, SyntheticBundle, DEFAULT_SEED};

fn bundle() -> SyntheticBundle {
    synthetic::generate(DEFAULT_SEED)
}

fn run(
    b: &SyntheticBundle,
    config: &NormalizationConfig,
    scorer: &dyn Scorer,
) -> radnorm::evaluation::NormalizationRun {
    let plans = config.plan(&b.corpus).unwrap();
    evaluate_normalization(
        &b.corpus,
        &b.lexicon,
        &b.abbreviations,
        config,
        &plans,
        scorer,
        2,
    )
    .unwrap()
}

#[test]
fn averages_are_means_of_folds() {
    let b = bundle();
    let config = NormalizationConfig {
        recall_at: vec![1, 5, 25],
        ..Default::default()
    };
    let report = run(&b, &config, &ConstantScorer(0.5)).report;
    assert_eq!(report.per_fold.len(), 10);
    for (name, avg) in &report.averaged {
        let values: Vec<f64> = report.per_fold.iter().map(|f| f.metrics[name]).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!((avg - mean).abs() < 1e-12, "{name}");
    }
}

#[test]
fn fold_indexes_hold_only_lexicon_and_training_mentions() {
    let b = bundle();
    let config = NormalizationConfig::default();
    let plans = config.plan(&b.corpus).unwrap();
    let report = run(&b, &config, &ConstantScorer(0.5)).report;
    for (fold, plan) in report.per_fold.iter().zip(&plans) {
        let train_mentions: usize = plan
            .train
            .iter()
            .map(|id| b.corpus.get(id).unwrap().mentions.len())
            .sum();
        assert_eq!(fold.index_documents, b.lexicon.len() + train_mentions);
        let test_mentions: usize = plan
            .test
            .iter()
            .map(|id| b.corpus.get(id).unwrap().mentions.len())
            .sum();
        assert_eq!(fold.test_items, test_mentions);
    }
}

#[test]
fn rerank_accuracy_never_exceeds_recall() {
    let b = bundle();
    let scorers: Vec<Box<dyn Scorer>> = vec![
        Box::new(ConstantScorer(0.5)),
        Box::new(LexicalScorer),
        Box::new(radnorm::ranking::EchoBm25Scorer),
    ];
    for scorer in &scorers {
        let mut config = NormalizationConfig::default();
        config.ranker.kind = RankerKind::Rerank;
        let report = run(&b, &config, scorer.as_ref()).report;
        for f in &report.per_fold {
            if f.empty_candidate_lists == 0 {
                assert!(
                    f.metrics["accuracy"] <= f.metrics["recall@10"],
                    "{} fold {}",
                    scorer.name(),
                    f.fold_id
                );
            }
        }
    }
}

#[test]
fn dictionary_tagger_snapshot() {
    let b = bundle();
    let config = TaggingConfig {
        tagger: "dictionary".into(),
        folds: 10,
        seed: 0,
        stratify_modality: false,
    };
    let plans = plan_folds(&b.corpus, 10, 0, false).unwrap();
    let report = evaluate_tagging(
        &b.corpus,
        &b.lexicon,
        TaggerSource::Dictionary,
        &config,
        &plans,
        3,
    )
    .unwrap();
    let got = (
        report.averaged["precision"],
        report.averaged["recall"],
        report.averaged["f1"],
    );
    let snapshot = (0.9055195447573118, 0.9121698696227298, 0.9083521987138304);
    assert!((got.0 - snapshot.0).abs() < 1e-12, "{got:?}");
    assert!((got.1 - snapshot.1).abs() < 1e-12, "{got:?}");
    assert!((got.2 - snapshot.2).abs() < 1e-12, "{got:?}");

    let gold = evaluate_tagging(
        &b.corpus,
        &b.lexicon,
        TaggerSource::Gold,
        &config,
        &plans,
        1,
    )
    .unwrap();
    assert_eq!(gold.averaged["f1"], 1.0);
}

#[test]
fn stratified_folds_balance_modalities() {
    let b = bundle();
    let plans = plan_folds(&b.corpus, 5, 0, true).unwrap();
    for p in &plans {
        let chest = p.test.iter().filter(|id| id.starts_with("cxr")).count();
        assert!((3..=4).contains(&chest), "{chest}");
    }
}
