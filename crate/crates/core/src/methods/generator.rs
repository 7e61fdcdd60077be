//! Conditional Gaussian feature generator: class means are a ridge
//! regression of seen-class means on attributes, the spread is one shared
//! diagonal standard deviation.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_dim, seeded_rng, TrainingSet};
use crate::data::DatasetBundle;
use crate::error::{Result, ZslError};
use crate::matrix::Matrix;
use crate::numerics::ridge_solve;

pub const DEFAULT_RIDGE: f64 = 1.0;
pub const DEFAULT_SAMPLES_PER_CLASS: usize = 300;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianGenerator {
    /// (a + 1) x d; the last row is the intercept.
    pub map: Matrix,
    /// Per-dimension standard deviation, length d.
    pub sigma: Vec<f64>,
}

fn with_intercept(s: &Matrix) -> Matrix {
    Matrix::from_fn(s.rows(), s.cols() + 1, |i, j| {
        if j < s.cols() {
            s.get(i, j)
        } else {
            1.0
        }
    })
}

impl GaussianGenerator {
    pub fn fit(t: &TrainingSet, ridge: f64) -> Result<Self> {
        let counts = t.class_counts();
        let mut means = t.class_feature_sums();
        for (k, row) in means.as_mut_slice().chunks_exact_mut(t.feature_dim()).enumerate() {
            row.iter_mut().for_each(|v| *v /= counts[k] as f64);
        }
        let s1 = with_intercept(&t.class_attributes);
        let map = ridge_solve(&s1.gram(), ridge, &s1.transpose().matmul(&means))?;

        let d = t.feature_dim();
        let mut var = vec![0.0; d];
        for (i, &k) in t.class_index.iter().enumerate() {
            for ((v, x), m) in var.iter_mut().zip(t.features.row(i)).zip(means.row(k)) {
                *v += (x - m) * (x - m);
            }
        }
        let sigma = var.iter().map(|v| (v / t.len() as f64).sqrt()).collect();
        Ok(GaussianGenerator { map, sigma })
    }

    pub fn feature_dim(&self) -> usize {
        self.map.cols()
    }

    pub fn attribute_dim(&self) -> usize {
        self.map.rows() - 1
    }

    /// Predicted class mean for attribute vector `s`.
    pub fn mean_for(&self, s: &[f64]) -> Vec<f64> {
        let a = self.attribute_dim();
        let intercept = self.map.row(a);
        (0..self.feature_dim())
            .map(|j| {
                let col: f64 = (0..a).map(|m| s[m] * self.map.get(m, j)).sum();
                col + intercept[j]
            })
            .collect()
    }

    /// `n_per_class` samples for every row of `attributes`, grouped by class.
    pub fn sample(
        &self,
        class_ids: &[u32],
        attributes: &Matrix,
        n_per_class: usize,
        seed: u64,
    ) -> Result<(Matrix, Vec<u32>)> {
        check_dim("attribute dimension", self.attribute_dim(), attributes.cols())?;
        check_dim("class count", attributes.rows(), class_ids.len())?;
        let d = self.feature_dim();
        let mut rng = seeded_rng(seed);
        let mut out = Matrix::zeros(class_ids.len() * n_per_class, d);
        let mut labels = Vec::with_capacity(out.rows());
        for (c, &id) in class_ids.iter().enumerate() {
            let mu = self.mean_for(attributes.row(c));
            for r in 0..n_per_class {
                let row = out.row_mut(c * n_per_class + r);
                for j in 0..d {
                    let eps: f64 = rng.sample(StandardNormal);
                    row[j] = mu[j] + self.sigma[j] * eps;
                }
                labels.push(id);
            }
        }
        Ok((out, labels))
    }
}

/// Synthetic features for every unseen class of the bundle.
pub fn gaussian_generate(
    bundle: &DatasetBundle,
    ridge: f64,
    n_per_class: usize,
    seed: u64,
) -> Result<(Matrix, Vec<u32>)> {
    if bundle.split.unseen_classes.is_empty() {
        return Err(ZslError::InvalidArgument("no unseen classes to generate".into()));
    }
    let t = TrainingSet::train_split(bundle)?;
    let g = GaussianGenerator::fit(&t, ridge)?;
    let unseen = &bundle.split.unseen_classes;
    g.sample(unseen, &bundle.class_attributes(unseen), n_per_class, seed)
}
