//! Report-level k-fold plans with rotating validation blocks.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::ModalityGroup;

/// One fold: disjoint train, validation and test report ids, each sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub fold_id: usize,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl FoldPlan {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }
}

fn check(n: usize, k: usize, ids: &[String]) -> Result<(), EvalError> {
    if k <= 1 {
        return Err(EvalError::TooFewFolds(k));
    }
    if n < k {
        return Err(EvalError::TooFewReports {
            reports: n,
            folds: k,
        });
    }
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(EvalError::DuplicateReport(id.clone()));
        }
    }
    Ok(())
}

fn plans_from_blocks(blocks: Vec<Vec<String>>) -> Vec<FoldPlan> {
    let k = blocks.len();
    (0..k)
        .map(|i| {
            let v = (i + 1) % k;
            let mut train: Vec<String> = blocks
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i && j != v)
                .flat_map(|(_, b)| b.iter().cloned())
                .collect();
            let mut validation = blocks[v].clone();
            let mut test = blocks[i].clone();
            train.sort();
            validation.sort();
            test.sort();
            FoldPlan {
                fold_id: i,
                train,
                validation,
                test,
            }
        })
        .collect()
}

/// Shuffles the ids with `seed` and cuts them into `k` contiguous blocks,
/// earlier blocks taking the remainder. Fold `i` tests on block `i`,
/// validates on block `i + 1` (cyclically) and trains on the rest.
///
/// Ids are sorted before shuffling, so the plan depends only on the set.
pub fn make_folds(report_ids: &[String], k: usize, seed: u64) -> Result<Vec<FoldPlan>, EvalError> {
    check(report_ids.len(), k, report_ids)?;
    let mut ids = report_ids.to_vec();
    ids.sort();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (ids.len() / k, ids.len() % k);
    let mut blocks = Vec::with_capacity(k);
    let mut rest = ids.as_slice();
    for i in 0..k {
        let (head, tail) = rest.split_at(base + usize::from(i < extra));
        blocks.push(head.to_vec());
        rest = tail;
    }
    Ok(plans_from_blocks(blocks))
}

/// Like [`make_folds`], but deals each modality group round-robin over the
/// blocks so every test block mixes modalities in proportion.
pub fn make_folds_stratified(
    reports: &[(String, ModalityGroup)],
    k: usize,
    seed: u64,
) -> Result<Vec<FoldPlan>, EvalError> {
    let ids: Vec<String> = reports.iter().map(|(id, _)| id.clone()).collect();
    check(ids.len(), k, &ids)?;
    let mut groups: BTreeMap<ModalityGroup, Vec<String>> = BTreeMap::new();
    for (id, g) in reports {
        groups.entry(*g).or_default().push(id.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = vec![Vec::new(); k];
    let mut slot = 0;
    for members in groups.values_mut() {
        members.sort();
        members.shuffle(&mut rng);
        for id in members.drain(..) {
            blocks[slot % k].push(id);
            slot += 1;
        }
    }
    Ok(plans_from_blocks(blocks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("r{i:03}")).collect()
    }

    fn assert_partition(plans: &[FoldPlan], all: &[String]) {
        let mut tested: Vec<String> = plans.iter().flat_map(|p| p.test.iter().cloned()).collect();
        tested.sort();
        let mut expected = all.to_vec();
        expected.sort();
        assert_eq!(tested, expected, "every report tests exactly once");
        for p in plans {
            let mut union: Vec<&String> =
                p.train.iter().chain(&p.validation).chain(&p.test).collect();
            union.sort();
            union.dedup();
            assert_eq!(
                union.len(),
                all.len(),
                "fold {} sets must be disjoint and cover",
                p.fold_id
            );
        }
    }

    #[test]
    fn fifty_reports_ten_folds() {
        let all = ids(50);
        let plans = make_folds(&all, 10, 42).unwrap();
        assert_eq!(plans.len(), 10);
        assert!(plans.iter().all(|p| p.sizes() == (40, 5, 5)));
        assert_partition(&plans, &all);
    }

    #[test]
    fn ten_reports_five_folds() {
        let plans = make_folds(&ids(10), 5, 1).unwrap();
        assert!(plans.iter().all(|p| p.sizes() == (6, 2, 2)));
    }

    #[test]
    fn validation_is_next_test_block() {
        let plans = make_folds(&ids(23), 4, 3).unwrap();
        for p in &plans {
            assert_eq!(p.validation, plans[(p.fold_id + 1) % 4].test);
        }
        // 23 = 6 + 6 + 6 + 5: larger blocks first.
        let sizes: Vec<usize> = plans.iter().map(|p| p.test.len()).collect();
        assert_eq!(sizes, vec![6, 6, 6, 5]);
    }

    #[test]
    fn seeded_and_order_independent() {
        let all = ids(30);
        let mut rev = all.clone();
        rev.reverse();
        assert_eq!(
            make_folds(&all, 10, 9).unwrap(),
            make_folds(&rev, 10, 9).unwrap()
        );
        assert_ne!(
            make_folds(&all, 10, 9).unwrap(),
            make_folds(&all, 10, 10).unwrap()
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            make_folds(&ids(5), 1, 0),
            Err(EvalError::TooFewFolds(1))
        ));
        assert!(matches!(
            make_folds(&ids(3), 5, 0),
            Err(EvalError::TooFewReports { .. })
        ));
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(matches!(
            make_folds(&dup, 2, 0),
            Err(EvalError::DuplicateReport(_))
        ));
    }

    #[test]
    fn stratified_balances_modalities() {
        let mut reports = Vec::new();
        for (g, n) in [
            (ModalityGroup::ChestXray, 17),
            (ModalityGroup::BrainMri, 16),
            (ModalityGroup::Babygram, 17),
        ] {
            for i in 0..n {
                reports.push((format!("{}{i:02}", g.as_str()), g));
            }
        }
        let plans = make_folds_stratified(&reports, 10, 5).unwrap();
        let all: Vec<String> = reports.iter().map(|r| r.0.clone()).collect();
        assert_partition(&plans, &all);
        assert!(plans.iter().all(|p| p.sizes() == (40, 5, 5)));
        for p in &plans {
            let brain = p.test.iter().filter(|id| id.starts_with("brain")).count();
            assert!(
                (1..=2).contains(&brain),
                "fold {} has {brain} brain reports",
                p.fold_id
            );
        }
    }
}
