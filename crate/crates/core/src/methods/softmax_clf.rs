//! Multinomial logistic regression over a fixed class list.

use std::collections::HashMap;

use rand::seq::SliceRandom;

use super::mlp::Adam;
use super::{check_dim, seeded_rng, Prepared};
use crate::error::{Result, ZslError};
use crate::matrix::{axpy, dot, Matrix};
use crate::numerics::argmax;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoftmaxParams {
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for SoftmaxParams {
    fn default() -> Self {
        SoftmaxParams {
            lr: 1e-3,
            l2: 1e-4,
            epochs: 50,
            batch: 64,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSoftmaxModel {
    /// C x p
    pub w: Matrix,
    pub b: Vec<f64>,
    pub class_ids: Vec<u32>,
}

impl LinearSoftmaxModel {
    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.w
            .row_iter()
            .zip(&self.b)
            .map(|(row, b)| dot(row, x) + b)
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        crate::numerics::softmax(&self.logits(x))
    }

    /// Rows of `w` for the requested classes, in request order.
    pub(crate) fn rows_for(&self, classes: &[u32]) -> Result<Vec<usize>> {
        let pos: HashMap<u32, usize> = self
            .class_ids
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i))
            .collect();
        classes
            .iter()
            .map(|c| {
                pos.get(c).copied().ok_or_else(|| {
                    ZslError::InvalidArgument(format!("classifier was not trained on class {c}"))
                })
            })
            .collect()
    }

    pub fn prepare(&self, classes: &[u32]) -> Result<SoftmaxPrepared> {
        let rows = self.rows_for(classes)?;
        Ok(SoftmaxPrepared {
            w: self.w.select_rows(&rows),
            b: rows.iter().map(|&r| self.b[r]).collect(),
            logits: vec![0.0; rows.len()],
        })
    }

    /// Index into `class_ids` of the most probable class for every row.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let mut p = self.prepare(&self.class_ids)?;
        super::classify_rows(&mut p, x)
    }
}

pub fn softmax_clf_fit(
    x: &Matrix,
    y: &[u32],
    class_ids: &[u32],
    params: &SoftmaxParams,
) -> Result<LinearSoftmaxModel> {
    check_dim("label count", x.rows(), y.len())?;
    if !(params.lr > 0.0) || !(params.l2 >= 0.0) || params.batch == 0 {
        return Err(ZslError::InvalidArgument(format!(
            "softmax needs lr > 0, l2 >= 0, batch > 0 (got {params:?})"
        )));
    }
    let pos: HashMap<u32, usize> = class_ids.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let targets = y
        .iter()
        .map(|l| {
            pos.get(l)
                .copied()
                .ok_or_else(|| ZslError::InvalidArgument(format!("label {l} not in class list")))
        })
        .collect::<Result<Vec<_>>>()?;

    let (n, p) = x.shape();
    let c = class_ids.len();
    let mut w = Matrix::zeros(c, p);
    let mut b = vec![0.0; c];
    let mut adam = Adam::new(params.lr, &[c * p, c]);
    let mut rng = seeded_rng(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(params.batch) {
            let bsz = chunk.len() as f64;
            let xb = x.select_rows(chunk);
            let mut logits = xb.matmul_nt(&w);
            let mut loss = 0.0;
            for (r, &i) in chunk.iter().enumerate() {
                let row = logits.row_mut(r);
                axpy(1.0, &b, row);
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
                let lse = max + sum.ln();
                loss += lse - row[targets[i]];
                for v in row.iter_mut() {
                    *v = (*v - lse).exp() / bsz;
                }
                row[targets[i]] -= 1.0 / bsz;
            }
            let norm = w.frobenius_norm();
            let loss = loss / bsz + params.l2 * norm * norm;
            if !loss.is_finite() {
                return Err(ZslError::NonFiniteLoss {
                    epoch,
                    lr: params.lr,
                });
            }
            let mut gw = logits.transpose().matmul(&xb);
            axpy(2.0 * params.l2, w.as_slice(), gw.as_mut_slice());
            let mut gb = vec![0.0; c];
            for row in logits.row_iter() {
                axpy(1.0, row, &mut gb);
            }
            adam.step(&mut [
                (w.as_mut_slice(), gw.as_slice()),
                (b.as_mut_slice(), gb.as_slice()),
            ]);
        }
    }
    if !w.is_finite() {
        return Err(ZslError::NonFiniteLoss {
            epoch: params.epochs,
            lr: params.lr,
        });
    }
    Ok(LinearSoftmaxModel {
        w,
        b,
        class_ids: class_ids.to_vec(),
    })
}

pub struct SoftmaxPrepared {
    w: Matrix,
    b: Vec<f64>,
    logits: Vec<f64>,
}

impl Prepared for SoftmaxPrepared {
    fn input_dim(&self) -> usize {
        self.w.cols()
    }

    fn n_candidates(&self) -> usize {
        self.w.rows()
    }

    fn classify(&mut self, x: &[f64]) -> usize {
        for ((l, row), b) in self.logits.iter_mut().zip(self.w.row_iter()).zip(&self.b) {
            *l = dot(row, x) + b;
        }
        argmax(&self.logits)
    }
}
