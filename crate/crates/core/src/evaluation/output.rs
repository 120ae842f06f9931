//! Human-readable tables and the per-mention prediction dump.

use super::{recall_metric_name, EvalReport, PredictionRecord};

pub const PREDICTIONS_HEADER: &str = "report_id\tmention_id\tgold\tpredicted\tranker\tscore";

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn cutoffs(report: &EvalReport) -> Vec<usize> {
    let mut c: Vec<usize> = report
        .averaged
        .keys()
        .filter_map(|k| k.strip_prefix("recall@")?.parse().ok())
        .collect();
    c.sort_unstable();
    c
}

/// Two tables: recall and accuracy per candidate count, then accuracy per
/// prediction kind. Percentages with two decimals.
pub fn normalization_markdown(report: &EvalReport) -> String {
    let n = report.config["bm25"]["n_candidates"]
        .as_u64()
        .map(|v| v as usize);
    let cuts = cutoffs(report);
    let mut out = String::from("| Metric |");
    for c in &cuts {
        out.push_str(&format!(" {c} candidates |"));
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(cuts.len()));
    out.push_str("\n| Recall (%) |");
    for c in &cuts {
        out.push_str(&format!(
            " {} |",
            pct(report.averaged[&recall_metric_name(*c)])
        ));
    }
    out.push_str("\n| Accuracy (%) |");
    let main_accuracy = report.averaged.get("accuracy").copied();
    for c in &cuts {
        match main_accuracy {
            Some(a) if Some(*c) == n => out.push_str(&format!(" {} |", pct(a))),
            _ => out.push_str(" n/a |"),
        }
    }
    out.push_str("\n\n| Method | Average accuracy (%) |\n|---|---:|\n");
    let ranker = report.config["ranker"]["kind"].as_str().unwrap_or("ranker");
    let rows = [
        ("accuracy", ranker.to_string()),
        (
            "accuracy_original",
            "span (original predictions)".to_string(),
        ),
        (
            "accuracy_first",
            "span (first concept in the predicted span)".to_string(),
        ),
        (
            "accuracy_last",
            "span (last concept in the predicted span)".to_string(),
        ),
    ];
    for (key, label) in rows {
        if let Some(v) = report.averaged.get(key) {
            out.push_str(&format!("| {label} | {} |\n", pct(*v)));
        }
    }
    out
}

pub fn tagging_markdown(report: &EvalReport, model: &str) -> String {
    let get = |k: &str| report.averaged.get(k).copied().unwrap_or(0.0);
    format!(
        "| Model | Precision (%) | Recall (%) | F1 |\n|---|---:|---:|---:|\n| {model} | {} | {} | {} |\n",
        pct(get("precision")),
        pct(get("recall")),
        pct(get("f1"))
    )
}

/// One row per prediction: report_id, mention_id, gold, predicted, ranker, score.
pub fn predictions_tsv(records: &[PredictionRecord]) -> String {
    let mut out = String::from(PREDICTIONS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.report_id, r.mention_id, r.gold, r.predicted, r.ranker, r.score
        ));
    }
    out
}
