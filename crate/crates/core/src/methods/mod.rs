//! Zero-shot classifiers.
//!
//! Every method exposes a `*_fit` function and a batch `*_predict` function.
//! Single-sample inference goes through [`Prepared`]: candidate-dependent work
//! and scratch buffers are set up once by [`ZslModel::prepare`], after which
//! [`Prepared::classify`] performs no heap allocation.

pub mod dap;
pub mod decoder;
pub mod dem;
pub mod eszsl;
pub mod generative;
pub mod generator;
pub mod mlp;
pub mod model;
pub mod sae;
pub mod select;
pub mod softmax_clf;

use std::collections::BTreeMap;

use crate::data::DatasetBundle;
use crate::error::{Result, ZslError};
use crate::matrix::Matrix;

pub use dap::{dap_fit, dap_predict, DapModel, DapParams};
pub use decoder::{decoder_augmented_predict, decoder_fit, DecoderModel, DecoderParams};
pub use dem::{dem_fit, dem_predict, DemModel, DemParams};
pub use eszsl::{eszsl_fit, eszsl_predict, EszslModel, EszslSystem};
pub use generative::{gen_decoder_fit, gen_softmax_fit, GenerativeParams};
pub use generator::{gaussian_generate, GaussianGenerator};
pub use model::{load_model, save_model, Method, ModelHeader, ZslModel};
pub use sae::{sae_fit, sae_predict, Direction, SaeModel, SaeSystem};
pub use softmax_clf::{softmax_clf_fit, LinearSoftmaxModel, SoftmaxParams};

/// A classifier bound to a fixed candidate set.
pub trait Prepared: Send {
    /// Expected length of `x` in [`Prepared::classify`].
    fn input_dim(&self) -> usize;

    fn n_candidates(&self) -> usize;

    /// Index into the candidate list. `x.len()` must equal `input_dim()`.
    fn classify(&mut self, x: &[f64]) -> usize;
}

/// The classes a prediction may choose from, with their attribute vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidates {
    pub class_ids: Vec<u32>,
    /// One row per entry of `class_ids`.
    pub attributes: Matrix,
}

impl Candidates {
    pub fn new(class_ids: Vec<u32>, attributes: Matrix) -> Result<Self> {
        if class_ids.len() != attributes.rows() {
            return Err(ZslError::Dimension(format!(
                "{} candidate ids for {} attribute rows",
                class_ids.len(),
                attributes.rows()
            )));
        }
        if class_ids.is_empty() {
            return Err(ZslError::InvalidArgument("empty candidate set".into()));
        }
        Ok(Candidates {
            class_ids,
            attributes,
        })
    }

    pub fn from_bundle(bundle: &DatasetBundle, classes: &[u32]) -> Result<Self> {
        if let Some(&c) = classes.iter().find(|&&c| c as usize >= bundle.n_classes()) {
            return Err(ZslError::InvalidArgument(format!(
                "class {c} outside [0, {})",
                bundle.n_classes()
            )));
        }
        Candidates::new(classes.to_vec(), bundle.class_attributes(classes))
    }

    pub fn len(&self) -> usize {
        self.class_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_ids.is_empty()
    }

    /// Maps candidate indices back to class ids.
    pub fn to_class_ids(&self, indices: &[usize]) -> Vec<u32> {
        indices.iter().map(|&i| self.class_ids[i]).collect()
    }
}

/// Labeled training instances with the attribute vectors of their classes.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    /// N x d
    pub features: Matrix,
    pub labels: Vec<u32>,
    /// Distinct labels, ascending.
    pub classes: Vec<u32>,
    /// z x a, row `k` belongs to `classes[k]`.
    pub class_attributes: Matrix,
    /// Row of `class_attributes` for every instance.
    pub class_index: Vec<usize>,
}

impl TrainingSet {
    /// `attributes` holds one row per class id (C_total x a).
    pub fn new(features: Matrix, labels: Vec<u32>, attributes: &Matrix) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(ZslError::Dimension(format!(
                "{} feature rows for {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(ZslError::EmptySplit("train"));
        }
        let mut position = BTreeMap::new();
        for &l in &labels {
            if l as usize >= attributes.rows() {
                return Err(ZslError::InvalidArgument(format!(
                    "label {l} has no attribute row"
                )));
            }
            position.insert(l, 0usize);
        }
        for (k, v) in position.values_mut().enumerate() {
            *v = k;
        }
        let classes: Vec<u32> = position.keys().copied().collect();
        let idx: Vec<usize> = classes.iter().map(|&c| c as usize).collect();
        let class_attributes = attributes.select_rows(&idx);
        let class_index = labels.iter().map(|l| position[l]).collect();
        Ok(TrainingSet {
            features,
            labels,
            classes,
            class_attributes,
            class_index,
        })
    }

    pub fn from_bundle(bundle: &DatasetBundle, idx: &[usize]) -> Result<Self> {
        let (features, labels) = bundle.view_indices(idx);
        TrainingSet::new(features, labels, &bundle.attributes)
    }

    /// The bundle's full training split.
    pub fn train_split(bundle: &DatasetBundle) -> Result<Self> {
        TrainingSet::from_bundle(bundle, &bundle.split.train_idx)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn attribute_dim(&self) -> usize {
        self.class_attributes.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for &k in &self.class_index {
            counts[k] += 1;
        }
        counts
    }

    /// Per-class sums of feature rows (z x d).
    pub fn class_feature_sums(&self) -> Matrix {
        let mut sums = Matrix::zeros(self.classes.len(), self.feature_dim());
        for (i, &k) in self.class_index.iter().enumerate() {
            crate::matrix::axpy(1.0, self.features.row(i), sums.row_mut(k));
        }
        sums
    }

    /// Attribute vector of every instance (N x a).
    pub fn instance_attributes(&self) -> Matrix {
        self.class_attributes.select_rows(&self.class_index)
    }
}

pub(crate) fn check_dim(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(ZslError::Dimension(format!(
            "{what}: expected {expected}, found {found}"
        )));
    }
    Ok(())
}

/// Runs a prepared classifier over every row.
pub(crate) fn classify_rows(prepared: &mut dyn Prepared, x: &Matrix) -> Result<Vec<usize>> {
    check_dim("feature dimension", prepared.input_dim(), x.cols())?;
    Ok(x.row_iter().map(|row| prepared.classify(row)).collect())
}

pub(crate) fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
