//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::PathBuf;

use radnorm::ConceptId;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// Lowercased alphanumeric runs; no stemming, no stopwords.
pub fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Scores every document from scratch, keeps each concept's best document
/// and sorts by score descending, then RID ascending with the sentinel last.
pub fn brute_force_bm25(
    docs: &[(String, ConceptId)],
    query: &str,
    k1: f64,
    b: f64,
) -> Vec<(ConceptId, f64)> {
    let analyzed: Vec<Vec<String>> = docs.iter().map(|(t, _)| tokens(t)).collect();
    let n = docs.len() as f64;
    let avg = analyzed.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let mut best: BTreeMap<ConceptId, f64> = BTreeMap::new();
    for (d, terms) in analyzed.iter().enumerate() {
        let mut score = 0.0;
        let mut matched = false;
        for q in tokens(query) {
            let tf = terms.iter().filter(|t| **t == q).count() as f64;
            if tf == 0.0 {
                continue;
            }
            matched = true;
            let df = analyzed.iter().filter(|ts| ts.contains(&q)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * terms.len() as f64 / avg));
        }
        if matched {
            let slot = best.entry(docs[d].1.clone()).or_insert(score);
            if score > *slot {
                *slot = score;
            }
        }
    }
    let mut out: Vec<(ConceptId, f64)> = best.into_iter().collect();
    out.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| match (a.0.is_unlinkable(), b.0.is_unlinkable()) {
                (true, false) => Ordering::Greater,
                (false, true) => Ordering::Less,
                _ => rid_number(&a.0).cmp(&rid_number(&b.0)),
            })
    });
    out
}

fn rid_number(id: &ConceptId) -> u64 {
    id.as_str()
        .trim_start_matches("RID")
        .parse()
        .unwrap_or(u64::MAX)
}
