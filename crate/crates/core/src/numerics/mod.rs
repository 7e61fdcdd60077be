//! Dense kernels used by the classifiers.

pub mod eig;
pub mod ridge;
pub mod sylvester;

use serde::{Deserialize, Serialize};

use crate::matrix::{dot, Matrix};

pub use eig::{sym_eig, EigDecomp};
pub use ridge::{ridge_solve, Cholesky};
pub use sylvester::{solve_sylvester, sylvester_residual, SylvesterFactors};

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    out
}

pub fn softmax_into(logits: &[f64], out: &mut [f64]) {
    if logits.is_empty() {
        return;
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Cosine,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(format!("unknown metric `{other}` (euclidean|cosine)")),
        }
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `1 - cos(a, b)`; a zero-norm operand counts as orthogonal (distance 1).
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        log::warn!("cosine distance with a zero-norm vector; using distance 1");
        return 1.0;
    }
    1.0 - dot(a, b) / (na * nb)
}

pub fn distance(a: &[f64], b: &[f64], metric: Metric) -> f64 {
    match metric {
        Metric::Euclidean => euclidean(a, b),
        Metric::Cosine => cosine_distance(a, b),
    }
}

/// `D[i][j] = distance(x_i, y_j)`.
pub fn pairwise_distance(x: &Matrix, y: &Matrix, metric: Metric) -> Matrix {
    assert_eq!(x.cols(), y.cols(), "pairwise_distance: dimension mismatch");
    Matrix::from_fn(x.rows(), y.rows(), |i, j| distance(x.row(i), y.row(j), metric))
}

/// Index of the smallest value; ties go to the lowest index.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
