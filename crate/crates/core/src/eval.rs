//! Restricted (MCA) and generalized (seen / unseen / harmonic mean) scoring.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZslError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GzslScores {
    pub acc_seen: f64,
    pub acc_unseen: f64,
    pub harmonic_mean: f64,
}

pub fn harmonic_mean(acc_seen: f64, acc_unseen: f64) -> f64 {
    let sum = acc_seen + acc_unseen;
    if sum > 0.0 {
        2.0 * acc_seen * acc_unseen / sum
    } else {
        0.0
    }
}

impl GzslScores {
    pub fn new(acc_seen: f64, acc_unseen: f64) -> Self {
        GzslScores {
            acc_seen,
            acc_unseen,
            harmonic_mean: harmonic_mean(acc_seen, acc_unseen),
        }
    }
}

/// Mean per-class accuracy over the classes in `classes` that actually occur
/// in `labels`.
pub fn mca(predictions: &[u32], labels: &[u32], classes: &[u32]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(ZslError::Dimension(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(ZslError::InvalidArgument("mca over an empty label list".into()));
    }
    let allowed: HashSet<u32> = classes.iter().copied().collect();
    let mut per_class: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for (&p, &l) in predictions.iter().zip(labels) {
        if !allowed.contains(&l) {
            return Err(ZslError::InvalidArgument(format!(
                "label {l} is not among the evaluated classes"
            )));
        }
        let entry = per_class.entry(l).or_default();
        entry.1 += 1;
        if p == l {
            entry.0 += 1;
        }
    }
    let total: f64 = per_class
        .values()
        .map(|&(hit, n)| hit as f64 / n as f64)
        .sum();
    Ok(total / per_class.len() as f64)
}

/// Generalized scores; predictions must come from the joint seen + unseen
/// candidate set.
pub fn gzsl_eval(
    pred_seen: &[u32],
    labels_seen: &[u32],
    pred_unseen: &[u32],
    labels_unseen: &[u32],
    seen_classes: &[u32],
    unseen_classes: &[u32],
) -> Result<GzslScores> {
    if labels_seen.is_empty() {
        return Err(ZslError::EmptySplit("test_seen"));
    }
    if labels_unseen.is_empty() {
        return Err(ZslError::EmptySplit("test_unseen"));
    }
    let acc_seen = mca(pred_seen, labels_seen, seen_classes)?;
    let acc_unseen = mca(pred_unseen, labels_unseen, unseen_classes)?;
    Ok(GzslScores::new(acc_seen, acc_unseen))
}

/// Fraction to percentage, rounded to two decimals.
pub fn percent(fraction: f64) -> f64 {
    (fraction * 10_000.0).round() / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mca_examples() {
        assert_eq!(mca(&[0, 1, 2], &[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        // one class perfect (9 instances), one all wrong (1 instance)
        let labels = [vec![0u32; 9], vec![1]].concat();
        let preds = [vec![0u32; 9], vec![0]].concat();
        assert_eq!(mca(&preds, &labels, &[0, 1]).unwrap(), 0.5);
        // sizes (10, 1, 1), correct (5, 1, 0)
        let labels = [vec![0u32; 10], vec![1, 2]].concat();
        let preds = [vec![0u32; 5], vec![1u32; 5], vec![1, 0]].concat();
        assert!((mca(&preds, &labels, &[0, 1, 2]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_classes_are_excluded() {
        assert_eq!(mca(&[0, 0], &[0, 0], &[0, 1, 2]).unwrap(), 1.0);
    }

    #[test]
    fn mca_errors() {
        assert!(mca(&[], &[], &[0]).is_err());
        assert!(mca(&[0], &[0, 1], &[0, 1]).is_err());
        assert!(mca(&[0], &[3], &[0, 1]).is_err());
    }

    #[test]
    fn gzsl_examples() {
        let s = GzslScores::new(0.5, 0.5);
        assert_eq!(s.harmonic_mean, 0.5);
        assert_eq!(GzslScores::new(0.9, 0.0).harmonic_mean, 0.0);
        assert_eq!(GzslScores::new(0.0, 0.0).harmonic_mean, 0.0);
        // published pair (U 4.66, S 87.07): the exact mean is 8.8465, printed as 8.86
        let h = harmonic_mean(87.07, 4.66);
        assert!((h - 8.8465).abs() < 1e-4);
        assert!((h - 8.86).abs() < 0.015);
        assert!(gzsl_eval(&[], &[], &[1], &[1], &[0], &[1]).is_err());
        assert!(gzsl_eval(&[0], &[0], &[], &[], &[0], &[1]).is_err());
        let g = gzsl_eval(&[0, 0], &[0, 0], &[0, 1], &[1, 1], &[0], &[1]).unwrap();
        assert_eq!((g.acc_seen, g.acc_unseen), (1.0, 0.5));
    }

    #[test]
    fn percent_rounds_to_two_decimals() {
        assert_eq!(percent(0.551149), 55.11);
        assert_eq!(percent(1.0), 100.0);
    }

    proptest! {
        #[test]
        fn harmonic_mean_is_between_inputs(s in 1e-6f64..1.0, u in 1e-6f64..1.0) {
            let h = harmonic_mean(s, u);
            prop_assert!(h >= s.min(u) - 1e-15 && h <= s.max(u) + 1e-15);
        }

        #[test]
        fn mca_is_invariant_under_relabeling(
            pairs in prop::collection::vec((0u32..5, 0u32..5), 1..80),
            perm_seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut perm: Vec<u32> = (0..5).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
            let (preds, labels): (Vec<u32>, Vec<u32>) = pairs.into_iter().unzip();
            let classes: Vec<u32> = (0..5).collect();
            let a = mca(&preds, &labels, &classes).unwrap();
            let p2: Vec<u32> = preds.iter().map(|&p| perm[p as usize]).collect();
            let l2: Vec<u32> = labels.iter().map(|&l| perm[l as usize]).collect();
            let b = mca(&p2, &l2, &classes).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn balanced_mca_equals_accuracy(
            per_class in 1usize..8,
            n_classes in 1usize..6,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let labels: Vec<u32> = (0..n_classes * per_class).map(|i| (i / per_class) as u32).collect();
            let preds: Vec<u32> = labels.iter().map(|_| rng.random_range(0..n_classes as u32)).collect();
            let classes: Vec<u32> = (0..n_classes as u32).collect();
            let acc = preds.iter().zip(&labels).filter(|(p, l)| p == l).count() as f64 / labels.len() as f64;
            prop_assert!((mca(&preds, &labels, &classes).unwrap() - acc).abs() < 1e-12);
        }
    }
}
