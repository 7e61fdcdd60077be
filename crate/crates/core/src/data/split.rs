use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ZslError};

/// Instance and class partition of one dataset.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_idx: Vec<usize>,
    pub test_unseen_idx: Vec<usize>,
    pub test_seen_idx: Vec<usize>,
    #[serde(default)]
    pub val_idx: Vec<usize>,
    pub seen_classes: Vec<u32>,
    pub unseen_classes: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SplitPart {
    Train,
    TestUnseen,
    TestSeen,
    Val,
}

impl SplitPart {
    pub fn name(self) -> &'static str {
        match self {
            SplitPart::Train => "train",
            SplitPart::TestUnseen => "test_unseen",
            SplitPart::TestSeen => "test_seen",
            SplitPart::Val => "val",
        }
    }
}

/// Fraction of each class's training instances held out when no validation
/// indices ship with the dataset.
pub const HOLDOUT_FRACTION: f64 = 0.2;

impl SplitSpec {
    pub fn indices(&self, part: SplitPart) -> &[usize] {
        match part {
            SplitPart::Train => &self.train_idx,
            SplitPart::TestUnseen => &self.test_unseen_idx,
            SplitPart::TestSeen => &self.test_seen_idx,
            SplitPart::Val => &self.val_idx,
        }
    }

    /// Seen classes followed by unseen classes.
    pub fn all_classes(&self) -> Vec<u32> {
        let mut all = self.seen_classes.clone();
        all.extend_from_slice(&self.unseen_classes);
        all
    }

    /// Checks every split invariant against the instance labels.
    pub fn validate(&self, labels: &[u32], n_classes: usize) -> Result<()> {
        let n = labels.len();
        let seen: HashSet<u32> = self.seen_classes.iter().copied().collect();
        let unseen: HashSet<u32> = self.unseen_classes.iter().copied().collect();
        if seen.len() != self.seen_classes.len() {
            return Err(ZslError::Split("seen_classes has duplicates".into()));
        }
        if unseen.len() != self.unseen_classes.len() {
            return Err(ZslError::Split("unseen_classes has duplicates".into()));
        }
        if let Some(c) = seen.intersection(&unseen).min() {
            return Err(ZslError::Split(format!(
                "class {c} is listed as both seen and unseen"
            )));
        }
        if let Some(c) = seen.iter().chain(&unseen).find(|&&c| c as usize >= n_classes) {
            return Err(ZslError::Split(format!(
                "class {c} out of range for {n_classes} classes"
            )));
        }
        for part in [
            SplitPart::Train,
            SplitPart::TestUnseen,
            SplitPart::TestSeen,
            SplitPart::Val,
        ] {
            let idx = self.indices(part);
            let mut uniq = HashSet::with_capacity(idx.len());
            for &i in idx {
                if i >= n {
                    return Err(ZslError::Split(format!(
                        "{}: index {i} out of range for {n} instances",
                        part.name()
                    )));
                }
                if !uniq.insert(i) {
                    return Err(ZslError::Split(format!(
                        "{}: duplicate index {i}",
                        part.name()
                    )));
                }
            }
        }
        let check = |part: SplitPart, allowed: &HashSet<u32>, what: &str| -> Result<()> {
            for &i in self.indices(part) {
                if !allowed.contains(&labels[i]) {
                    return Err(ZslError::Split(format!(
                        "{}: instance {i} has label {} which is not a {what} class",
                        part.name(),
                        labels[i]
                    )));
                }
            }
            Ok(())
        };
        check(SplitPart::Train, &seen, "seen")?;
        check(SplitPart::TestSeen, &seen, "seen")?;
        check(SplitPart::TestUnseen, &unseen, "unseen")?;
        Ok(())
    }

    /// Instances used to fit and to score hyper-parameter candidates.
    ///
    /// Official validation indices win when present (and are removed from the
    /// fitting set). Otherwise 20% of every training class is held out using a
    /// seeded shuffle; classes with a single instance keep it for fitting.
    pub fn validation_partition(&self, labels: &[u32], seed: u64) -> (Vec<usize>, Vec<usize>) {
        if !self.val_idx.is_empty() {
            let val: HashSet<usize> = self.val_idx.iter().copied().collect();
            let fit = self
                .train_idx
                .iter()
                .copied()
                .filter(|i| !val.contains(i))
                .collect();
            return (fit, self.val_idx.clone());
        }
        let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for &i in &self.train_idx {
            by_class.entry(labels[i]).or_default().push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fit = Vec::new();
        let mut val = Vec::new();
        for (_, mut idx) in by_class {
            idx.shuffle(&mut rng);
            let hold = if idx.len() < 2 {
                0
            } else {
                ((idx.len() as f64 * HOLDOUT_FRACTION).round() as usize).max(1)
            };
            val.extend_from_slice(&idx[..hold]);
            fit.extend_from_slice(&idx[hold..]);
        }
        fit.sort_unstable();
        val.sort_unstable();
        (fit, val)
    }
}
