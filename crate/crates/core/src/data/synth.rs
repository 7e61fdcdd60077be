//! Seeded synthetic datasets for tests, demos and timing runs.
//!
//! Features are a noisy linear image of the class attributes,
//! `x = M s_y + 0.1 + noise`, so projection methods have signal to find.
//! The last `n_unseen` classes are unseen; every seen class is split
//! 60/20/20 into train, test-seen and validation instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DatasetBundle, SplitSpec};
use crate::matrix::Matrix;

#[derive(Clone, Debug)]
pub struct SyntheticSpec {
    pub name: String,
    pub backbone_tag: String,
    pub n_classes: usize,
    pub n_unseen: usize,
    pub per_class: usize,
    pub feature_dim: usize,
    pub attribute_dim: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// The standard fixture: N = 60, d = 8, C = 6, a = 4, two unseen classes.
    fn default() -> Self {
        SyntheticSpec {
            name: "fixture".into(),
            backbone_tag: "synthetic".into(),
            n_classes: 6,
            n_unseen: 2,
            per_class: 10,
            feature_dim: 8,
            attribute_dim: 4,
            noise: 0.05,
            seed: 42,
        }
    }
}

pub fn synthetic_bundle(spec: &SyntheticSpec) -> DatasetBundle {
    assert!(spec.n_unseen < spec.n_classes, "need at least one seen class");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (c, a, d) = (spec.n_classes, spec.attribute_dim, spec.feature_dim);

    let attributes = Matrix::from_fn(c, a, |_, _| rng.random::<f64>()).quantized();
    let map = Matrix::from_fn(d, a, |_, _| rng.random::<f64>());
    let class_means = attributes.matmul_nt(&map); // C x d

    let n = c * spec.per_class;
    let mut labels = Vec::with_capacity(n);
    let mut features = Matrix::zeros(n, d);
    for i in 0..n {
        let class = i / spec.per_class;
        labels.push(class as u32);
        for (j, v) in features.row_mut(i).iter_mut().enumerate() {
            let eps: f64 = rng.sample(StandardNormal);
            *v = class_means.get(class, j) + 0.1 + spec.noise * eps;
        }
    }
    let features = features.quantized();

    let n_seen = c - spec.n_unseen;
    let held = spec.per_class / 5;
    let mut split = SplitSpec {
        seen_classes: (0..n_seen as u32).collect(),
        unseen_classes: (n_seen as u32..c as u32).collect(),
        ..Default::default()
    };
    for class in 0..c {
        let base = class * spec.per_class;
        if class < n_seen {
            let n_train = spec.per_class - 2 * held;
            split.train_idx.extend(base..base + n_train);
            split.test_seen_idx.extend(base + n_train..base + n_train + held);
            split.val_idx.extend(base + n_train + held..base + spec.per_class);
        } else {
            split.test_unseen_idx.extend(base..base + spec.per_class);
        }
    }

    DatasetBundle {
        name: spec.name.clone(),
        features,
        labels,
        attributes,
        split,
        class_names: (0..c).map(|k| format!("class_{k:03}")).collect(),
        backbone_tag: spec.backbone_tag.clone(),
        manifest_hash: String::new(),
    }
}
