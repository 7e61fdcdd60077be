//! Closed-form bilinear compatibility `x^T V s`.

use super::{check_dim, classify_rows, Prepared, TrainingSet};
use crate::data::DatasetBundle;
use crate::error::{Result, ZslError};
use crate::matrix::{dot, Matrix};
use crate::numerics::{argmax, ridge_solve};

#[derive(Clone, Debug, PartialEq)]
pub struct EszslModel {
    /// d x a
    pub v: Matrix,
}

impl EszslModel {
    pub fn new(v: Matrix) -> Result<Self> {
        if !v.is_finite() {
            return Err(ZslError::InvalidArgument("ESZSL matrix has non-finite entries".into()));
        }
        Ok(EszslModel { v })
    }

    pub fn feature_dim(&self) -> usize {
        self.v.rows()
    }

    pub fn attribute_dim(&self) -> usize {
        self.v.cols()
    }

    pub fn prepare(&self, s_cand: &Matrix) -> Result<EszslPrepared> {
        check_dim("candidate attribute dimension", self.attribute_dim(), s_cand.cols())?;
        // row c = (V s_c)^T
        let projected = s_cand.matmul_nt(&self.v);
        Ok(EszslPrepared {
            scores: vec![0.0; projected.rows()],
            projected,
        })
    }
}

/// Training statistics shared by every `(gamma, lambda)` pair.
#[derive(Clone, Debug)]
pub struct EszslSystem {
    /// X X^T (d x d)
    gram: Matrix,
    /// X Y S^T (d x a)
    xys: Matrix,
    /// S S^T (a x a)
    sst: Matrix,
}

impl EszslSystem {
    pub fn new(t: &TrainingSet) -> Self {
        let sums = t.class_feature_sums();
        let total: Vec<f64> = (0..t.feature_dim())
            .map(|j| (0..sums.rows()).map(|k| sums.get(k, j)).sum())
            .collect();
        // column k of X Y is sum_i y_ik x_i = 2 * sum_k - total with +-1 labels
        let xy_t = Matrix::from_fn(sums.rows(), sums.cols(), |k, j| 2.0 * sums.get(k, j) - total[j]);
        let s = &t.class_attributes;
        EszslSystem {
            gram: t.features.gram(),
            xys: xy_t.transpose().matmul(s),
            sst: s.gram(),
        }
    }

    /// `(X X^T + gamma I)^-1 X Y S^T`
    pub fn left_solve(&self, gamma: f64) -> Result<Matrix> {
        ridge_solve(&self.gram, gamma, &self.xys)
    }

    /// `K (S S^T + lambda I)^-1`
    pub fn right_solve(&self, k: &Matrix, lambda: f64) -> Result<Matrix> {
        Ok(ridge_solve(&self.sst, lambda, &k.transpose())?.transpose())
    }

    pub fn solve(&self, gamma: f64, lambda: f64) -> Result<EszslModel> {
        let k = self.left_solve(gamma)?;
        EszslModel::new(self.right_solve(&k, lambda)?)
    }
}

pub fn eszsl_fit_set(t: &TrainingSet, gamma: f64, lambda: f64) -> Result<EszslModel> {
    EszslSystem::new(t).solve(gamma, lambda)
}

pub fn eszsl_fit(bundle: &DatasetBundle, gamma: f64, lambda: f64) -> Result<EszslModel> {
    eszsl_fit_set(&TrainingSet::train_split(bundle)?, gamma, lambda)
}

/// Candidate index maximizing `x^T V s_c` for every row of `x`.
pub fn eszsl_predict(m: &EszslModel, x: &Matrix, s_cand: &Matrix) -> Result<Vec<usize>> {
    classify_rows(&mut m.prepare(s_cand)?, x)
}

pub struct EszslPrepared {
    /// C x d, row c = V s_c
    projected: Matrix,
    scores: Vec<f64>,
}

impl Prepared for EszslPrepared {
    fn input_dim(&self) -> usize {
        self.projected.cols()
    }

    fn n_candidates(&self) -> usize {
        self.projected.rows()
    }

    fn classify(&mut self, x: &[f64]) -> usize {
        for (s, row) in self.scores.iter_mut().zip(self.projected.row_iter()) {
            *s = dot(x, row);
        }
        argmax(&self.scores)
    }
}
