//! Direct attribute prediction: one logistic regression per binarized
//! attribute, candidates scored by the posterior-to-prior likelihood ratio.

use rand::seq::SliceRandom;

use super::mlp::Adam;
use super::{check_dim, classify_rows, seeded_rng, Prepared, TrainingSet};
use crate::data::DatasetBundle;
use crate::error::{Result, ZslError};
use crate::matrix::{dot, Matrix};
use crate::numerics::argmax;

pub const PROB_CLAMP: f64 = 1e-5;
/// Mini-batch size of the attribute classifiers.
pub const DAP_BATCH: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DapParams {
    pub l2: f64,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for DapParams {
    fn default() -> Self {
        DapParams {
            l2: 1e-4,
            epochs: 30,
            lr: 1e-2,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DapModel {
    /// a x (d + 1); the last column is the bias.
    pub weights: Matrix,
    pub priors: Vec<f64>,
    pub thresholds: Vec<f64>,
    /// Attributes constant over the seen classes; skipped when scoring.
    pub excluded: Vec<usize>,
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn binarize_rows(s: &Matrix, thresholds: &[f64]) -> Matrix {
    Matrix::from_fn(s.rows(), s.cols(), |i, m| {
        if s.get(i, m) > thresholds[m] {
            1.0
        } else {
            0.0
        }
    })
}

impl DapModel {
    pub fn feature_dim(&self) -> usize {
        self.weights.cols() - 1
    }

    pub fn attribute_dim(&self) -> usize {
        self.weights.rows()
    }

    fn active(&self) -> Vec<usize> {
        (0..self.attribute_dim())
            .filter(|m| !self.excluded.contains(m))
            .collect()
    }

    /// 0/1 attribute matrix using the model thresholds.
    pub fn binarize(&self, s: &Matrix) -> Result<Matrix> {
        check_dim("attribute dimension", self.attribute_dim(), s.cols())?;
        Ok(binarize_rows(s, &self.thresholds))
    }

    /// Clamped `p(a_m = 1 | x)` for every attribute.
    pub fn attribute_probabilities(&self, x: &[f64]) -> Vec<f64> {
        let d = self.feature_dim();
        self.weights
            .row_iter()
            .map(|w| clamp_prob(sigmoid(dot(&w[..d], x) + w[d])))
            .collect()
    }

    /// Log-likelihood-ratio score of every candidate.
    pub fn log_scores(&self, x: &[f64], s_bin: &Matrix) -> Vec<f64> {
        let p = self.attribute_probabilities(x);
        let active = self.active();
        s_bin
            .row_iter()
            .map(|bits| {
                active
                    .iter()
                    .map(|&m| {
                        if bits[m] > 0.5 {
                            p[m].ln() - self.priors[m].ln()
                        } else {
                            (1.0 - p[m]).ln() - (1.0 - self.priors[m]).ln()
                        }
                    })
                    .sum()
            })
            .collect()
    }

    pub fn prepare(&self, s_bin: &Matrix) -> Result<DapPrepared> {
        check_dim("candidate attribute dimension", self.attribute_dim(), s_bin.cols())?;
        let a = self.attribute_dim();
        let ln_prior: Vec<f64> = self.priors.iter().map(|p| p.ln()).collect();
        let ln_not_prior: Vec<f64> = self.priors.iter().map(|p| (1.0 - p).ln()).collect();
        Ok(DapPrepared {
            weights: self.weights.clone(),
            active: self.active(),
            bits: s_bin.clone(),
            ln_prior,
            ln_not_prior,
            on: vec![0.0; a],
            off: vec![0.0; a],
            scores: vec![0.0; s_bin.rows()],
        })
    }
}

pub fn dap_fit_set(t: &TrainingSet, params: &DapParams) -> Result<DapModel> {
    if !(params.lr > 0.0) || !(params.l2 >= 0.0) {
        return Err(ZslError::InvalidArgument(format!(
            "DAP needs lr > 0 and l2 >= 0 (got lr={}, l2={})",
            params.lr, params.l2
        )));
    }
    let (n, d) = t.features.shape();
    let a = t.attribute_dim();
    let s = &t.class_attributes;
    let z = s.rows() as f64;

    let thresholds: Vec<f64> = (0..a)
        .map(|m| (0..s.rows()).map(|k| s.get(k, m)).sum::<f64>() / z)
        .collect();
    let bits = binarize_rows(s, &thresholds);
    let mut priors = vec![0.5; a];
    let mut excluded = Vec::new();
    for m in 0..a {
        let ones: f64 = (0..bits.rows()).map(|k| bits.get(k, m)).sum();
        if ones == 0.0 || ones == z {
            excluded.push(m);
            log::warn!("attribute {m} is constant over the seen classes; excluded");
        }
        priors[m] = clamp_prob(ones / z);
    }
    let active: Vec<usize> = (0..a).filter(|m| !excluded.contains(m)).collect();

    // standardized inputs keep one learning rate sensible for raw CNN features
    let mean: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| t.features.get(i, j)).sum::<f64>() / n as f64)
        .collect();
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            let var = (0..n)
                .map(|i| (t.features.get(i, j) - mean[j]).powi(2))
                .sum::<f64>()
                / n as f64;
            if var.sqrt() > 1e-12 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();

    let k = active.len();
    let mut w = Matrix::zeros(k, d);
    let mut b = vec![0.0; k];
    let mut adam = Adam::new(params.lr, &[k * d, k]);
    let mut rng = seeded_rng(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..params.epochs {
        if k == 0 {
            break;
        }
        order.shuffle(&mut rng);
        for chunk in order.chunks(DAP_BATCH) {
            let bsz = chunk.len() as f64;
            let zb = Matrix::from_fn(chunk.len(), d, |r, j| {
                (t.features.get(chunk[r], j) - mean[j]) / scale[j]
            });
            let mut logits = zb.matmul_nt(&w);
            let mut loss = 0.0;
            for (r, &i) in chunk.iter().enumerate() {
                let cls = t.class_index[i];
                let row = logits.row_mut(r);
                for (q, &m) in active.iter().enumerate() {
                    let zl = row[q] + b[q];
                    let target = bits.get(cls, m);
                    loss += target * softplus(-zl) + (1.0 - target) * softplus(zl);
                    row[q] = (sigmoid(zl) - target) / bsz;
                }
            }
            let norm = w.frobenius_norm();
            let loss = loss / bsz + params.l2 * norm * norm;
            if !loss.is_finite() {
                return Err(ZslError::NonFiniteLoss {
                    epoch,
                    lr: params.lr,
                });
            }
            let mut gw = logits.transpose().matmul(&zb);
            crate::matrix::axpy(2.0 * params.l2, w.as_slice(), gw.as_mut_slice());
            let mut gb = vec![0.0; k];
            for row in logits.row_iter() {
                crate::matrix::axpy(1.0, row, &mut gb);
            }
            adam.step(&mut [
                (w.as_mut_slice(), gw.as_slice()),
                (b.as_mut_slice(), gb.as_slice()),
            ]);
        }
    }

    // fold the standardization back into raw-feature weights
    let mut weights = Matrix::zeros(a, d + 1);
    for (q, &m) in active.iter().enumerate() {
        let row = weights.row_mut(m);
        let mut bias = b[q];
        for j in 0..d {
            row[j] = w.get(q, j) / scale[j];
            bias -= w.get(q, j) * mean[j] / scale[j];
        }
        row[d] = bias;
    }
    if !weights.is_finite() {
        return Err(ZslError::NonFiniteLoss {
            epoch: params.epochs,
            lr: params.lr,
        });
    }
    Ok(DapModel {
        weights,
        priors,
        thresholds,
        excluded,
    })
}

pub fn dap_fit(bundle: &DatasetBundle, params: &DapParams) -> Result<DapModel> {
    dap_fit_set(&TrainingSet::train_split(bundle)?, params)
}

/// Candidate with the highest likelihood ratio; `s_cand_binary` must already
/// be binarized with [`DapModel::binarize`].
pub fn dap_predict(m: &DapModel, x: &Matrix, s_cand_binary: &Matrix) -> Result<Vec<usize>> {
    classify_rows(&mut m.prepare(s_cand_binary)?, x)
}

pub struct DapPrepared {
    weights: Matrix,
    active: Vec<usize>,
    bits: Matrix,
    ln_prior: Vec<f64>,
    ln_not_prior: Vec<f64>,
    on: Vec<f64>,
    off: Vec<f64>,
    scores: Vec<f64>,
}

impl Prepared for DapPrepared {
    fn input_dim(&self) -> usize {
        self.weights.cols() - 1
    }

    fn n_candidates(&self) -> usize {
        self.bits.rows()
    }

    fn classify(&mut self, x: &[f64]) -> usize {
        let d = self.input_dim();
        for &m in &self.active {
            let w = self.weights.row(m);
            let p = clamp_prob(sigmoid(dot(&w[..d], x) + w[d]));
            self.on[m] = p.ln() - self.ln_prior[m];
            self.off[m] = (1.0 - p).ln() - self.ln_not_prior[m];
        }
        for (score, bits) in self.scores.iter_mut().zip(self.bits.row_iter()) {
            *score = self
                .active
                .iter()
                .map(|&m| if bits[m] > 0.5 { self.on[m] } else { self.off[m] })
                .sum();
        }
        argmax(&self.scores)
    }
}
