//! Inter-annotator agreement: exact-span F1 and normalization accuracy.

use std::collections::{BTreeSet, HashSet};

use super::{CorpusError, Mention, Report};
use crate::num::{f1, ratio, Real};

fn report_ids(reports: &[Report]) -> BTreeSet<&str> {
    reports.iter().map(|r| r.report_id.as_str()).collect()
}

fn check_same_reports(a: &[Report], b: &[Report]) -> Result<(), CorpusError> {
    let ia = report_ids(a);
    let ib = report_ids(b);
    if ia != ib {
        let only_a: Vec<&str> = ia.difference(&ib).copied().collect();
        let only_b: Vec<&str> = ib.difference(&ia).copied().collect();
        return Err(CorpusError::ReportSetMismatch(format!(
            "only in A: {only_a:?}; only in B: {only_b:?}"
        )));
    }
    Ok(())
}

/// Exact-span F1 between two annotators, micro-pooled over all reports.
///
/// A match is an identical `(report_id, start, end)` triple. Precision is taken
/// against B and recall against A.
pub fn span_agreement_f1<S: Real>(
    annotator_a: &[Report],
    annotator_b: &[Report],
) -> Result<S, CorpusError> {
    check_same_reports(annotator_a, annotator_b)?;
    let spans = |reports: &[Report]| -> HashSet<(String, usize, usize)> {
        reports
            .iter()
            .flat_map(|r| {
                r.mentions
                    .iter()
                    .map(|m| (r.report_id.clone(), m.span_start, m.span_end))
            })
            .collect()
    };
    let a = spans(annotator_a);
    let b = spans(annotator_b);
    if a.is_empty() && b.is_empty() {
        return Ok(S::one());
    }
    let matches = a.intersection(&b).count();
    let precision = ratio(matches, b.len(), S::zero());
    let recall = ratio(matches, a.len(), S::zero());
    Ok(f1(precision, recall))
}

/// Pairs of mentions (A, B) that share a report and an exact span, in report
/// then offset order.
pub fn align_mentions(
    annotator_a: &[Report],
    annotator_b: &[Report],
) -> Result<(Vec<Mention>, Vec<Mention>), CorpusError> {
    check_same_reports(annotator_a, annotator_b)?;
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut a_sorted: Vec<&Report> = annotator_a.iter().collect();
    a_sorted.sort_by(|x, y| x.report_id.cmp(&y.report_id));
    for ra in a_sorted {
        let rb = annotator_b
            .iter()
            .find(|r| r.report_id == ra.report_id)
            .expect("report sets checked equal");
        for ma in &ra.mentions {
            if let Some(mb) = rb
                .mentions
                .iter()
                .find(|mb| mb.span_start == ma.span_start && mb.span_end == ma.span_end)
            {
                left.push(ma.clone());
                right.push(mb.clone());
            }
        }
    }
    Ok((left, right))
}

/// Fraction of span-aligned mentions given the same gold concept. The RID-less
/// sentinel agrees with itself. Two empty sequences agree fully.
pub fn normalization_agreement<S: Real>(
    annotator_a: &[Mention],
    annotator_b: &[Mention],
) -> Result<S, CorpusError> {
    if annotator_a.len() != annotator_b.len() {
        return Err(CorpusError::LengthMismatch {
            left: annotator_a.len(),
            right: annotator_b.len(),
        });
    }
    let mut agree = 0;
    for (index, (a, b)) in annotator_a.iter().zip(annotator_b).enumerate() {
        if (a.span_start, a.span_end) != (b.span_start, b.span_end) {
            return Err(CorpusError::Misaligned { index });
        }
        if a.gold_concept == b.gold_concept {
            agree += 1;
        }
    }
    Ok(ratio(agree, annotator_a.len(), S::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EntityClass, ModalityGroup};
    use crate::lexicon::ConceptId;

    fn m(start: usize, end: usize, gold: &str) -> Mention {
        Mention {
            id: format!("T{start}"),
            span_start: start,
            span_end: end,
            surface: String::new(),
            entity_class: EntityClass::ClinicalFinding,
            gold_concept: ConceptId::parse(gold).unwrap(),
        }
    }

    fn report(id: &str, spans: &[(usize, usize)]) -> Report {
        Report {
            report_id: id.into(),
            modality_group: ModalityGroup::Other,
            text: String::new(),
            sentences: vec![],
            mentions: spans.iter().map(|&(s, e)| m(s, e, "RID1")).collect(),
        }
    }

    #[test]
    fn identical_and_disjoint() {
        let a = vec![report("r1", &[(0, 3), (5, 9)])];
        assert_eq!(span_agreement_f1::<f64>(&a, &a).unwrap(), 1.0);
        let b = vec![report("r1", &[(1, 3), (5, 8)])];
        assert_eq!(span_agreement_f1::<f64>(&a, &b).unwrap(), 0.0);
        let empty = vec![report("r1", &[])];
        assert_eq!(span_agreement_f1::<f64>(&empty, &empty).unwrap(), 1.0);
        assert_eq!(span_agreement_f1::<f64>(&a, &empty).unwrap(), 0.0);
    }

    #[test]
    fn four_versus_five_with_three_shared() {
        let a = vec![
            report("r1", &[(0, 2), (3, 5)]),
            report("r2", &[(0, 4), (6, 8)]),
        ];
        let b = vec![
            report("r1", &[(0, 2), (3, 5), (9, 12)]),
            report("r2", &[(0, 4), (7, 8)]),
        ];
        let f: f64 = span_agreement_f1(&a, &b).unwrap();
        let expected = 2.0 * (0.6 * 0.75) / (0.6 + 0.75);
        assert!((f - expected).abs() < 1e-12);
        let g: f64 = span_agreement_f1(&b, &a).unwrap();
        assert!((f - g).abs() < 1e-15);
    }

    #[test]
    fn report_set_mismatch() {
        let a = vec![report("r1", &[])];
        let b = vec![report("r2", &[])];
        assert!(matches!(
            span_agreement_f1::<f64>(&a, &b),
            Err(CorpusError::ReportSetMismatch(_))
        ));
    }

    #[test]
    fn normalization_accuracy() {
        let a = vec![
            m(0, 1, "RID1"),
            m(2, 3, "RID2"),
            m(4, 5, "XXXXX"),
            m(6, 7, "RID4"),
        ];
        let b = vec![
            m(0, 1, "RID1"),
            m(2, 3, "RID2"),
            m(4, 5, "XXXXX"),
            m(6, 7, "RID5"),
        ];
        assert_eq!(normalization_agreement::<f64>(&a, &b).unwrap(), 0.75);
        assert_eq!(normalization_agreement::<f64>(&a, &a).unwrap(), 1.0);
        assert!(matches!(
            normalization_agreement::<f64>(&a, &b[..3]),
            Err(CorpusError::LengthMismatch { .. })
        ));
        assert!(matches!(
            normalization_agreement::<f64>(&a[..1], &b[1..2]),
            Err(CorpusError::Misaligned { index: 0 })
        ));
    }

    #[test]
    fn alignment_pairs_exact_spans() {
        let a = vec![report("r1", &[(0, 2), (3, 5)])];
        let b = vec![report("r1", &[(0, 2), (3, 6)])];
        let (l, r) = align_mentions(&a, &b).unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!((r[0].span_start, r[0].span_end), (0, 2));
    }
}
