//! Semantic-to-visual embedding: a two-layer relu network maps class
//! attributes into feature space, classification is nearest neighbour there.

use std::collections::BTreeMap;

use super::mlp::{train_network, Batch, Gradients, TrainConfig, TwoLayerNet};
use super::{check_dim, seeded_rng, Prepared, TrainingSet};
use crate::data::DatasetBundle;
use crate::error::Result;
use crate::matrix::{axpy, Matrix};
use crate::numerics::{argmin, euclidean};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DemParams {
    pub hidden: usize,
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for DemParams {
    fn default() -> Self {
        DemParams {
            hidden: 1600,
            lr: 1e-4,
            l2: 1e-3,
            epochs: 100,
            batch: 64,
            seed: 42,
        }
    }
}

impl DemParams {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            l2: self.l2,
            epochs: self.epochs,
            batch: self.batch,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemModel {
    /// attributes -> hidden -> features
    pub net: TwoLayerNet,
    /// Mean training loss of every epoch.
    pub loss_history: Vec<f64>,
}

impl DemModel {
    pub fn new(net: TwoLayerNet) -> Result<Self> {
        net.check_shapes()?;
        Ok(DemModel {
            net,
            loss_history: Vec::new(),
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn attribute_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.net.hidden_dim()
    }

    /// Mean of `||f(s_{y_i}) - x_i||^2` plus the weight penalty, with gradient.
    pub fn objective_and_grad(&self, t: &TrainingSet, l2: f64) -> (f64, Gradients) {
        let all: Vec<usize> = (0..t.len()).collect();
        let b = class_batch(t, &all);
        let (loss, g) = self.net.loss_and_grad(&b.inputs, &b.targets, &b.weights, l2);
        (loss + b.offset, g)
    }

    /// Candidate embeddings are recomputed on every call, so a single-sample
    /// timing includes the network forward passes.
    pub fn prepare(&self, s_cand: &Matrix) -> Result<DemPrepared> {
        check_dim("candidate attribute dimension", self.attribute_dim(), s_cand.cols())?;
        Ok(DemPrepared {
            net: self.net.clone(),
            candidates: s_cand.clone(),
            hidden: vec![0.0; self.hidden_dim()],
            embedded: vec![0.0; self.feature_dim()],
        })
    }
}

/// Groups a mini-batch by class: the per-instance squared error
/// `mean_i ||f(s_c) - x_i||^2` equals `sum_c (n_c / B) ||f(s_c) - mean_c||^2`
/// plus the within-class scatter, which does not depend on the parameters.
fn class_batch(t: &TrainingSet, idx: &[usize]) -> Batch {
    let d = t.feature_dim();
    let mut groups: BTreeMap<usize, (usize, Vec<f64>)> = BTreeMap::new();
    for &i in idx {
        let entry = groups
            .entry(t.class_index[i])
            .or_insert_with(|| (0, vec![0.0; d]));
        entry.0 += 1;
        axpy(1.0, t.features.row(i), &mut entry.1);
    }
    let total = idx.len() as f64;
    let mut inputs = Matrix::zeros(groups.len(), t.attribute_dim());
    let mut targets = Matrix::zeros(groups.len(), d);
    let mut weights = Vec::with_capacity(groups.len());
    for (r, (&k, (n, sum))) in groups.iter().enumerate() {
        inputs.row_mut(r).copy_from_slice(t.class_attributes.row(k));
        let mean = targets.row_mut(r);
        for (m, s) in mean.iter_mut().zip(sum) {
            *m = s / *n as f64;
        }
        weights.push(*n as f64 / total);
    }
    let row_of: BTreeMap<usize, usize> = groups.keys().enumerate().map(|(r, &k)| (k, r)).collect();
    let mut scatter = 0.0;
    for &i in idx {
        let r = row_of[&t.class_index[i]];
        scatter += t
            .features
            .row(i)
            .iter()
            .zip(targets.row(r))
            .map(|(x, m)| (x - m) * (x - m))
            .sum::<f64>();
    }
    Batch {
        inputs,
        targets,
        weights,
        offset: scatter / total,
    }
}

pub fn dem_fit_set(t: &TrainingSet, params: &DemParams) -> Result<DemModel> {
    let cfg = params.config();
    cfg.validate()?;
    let mut rng = seeded_rng(params.seed);
    let mut net = TwoLayerNet::init(t.attribute_dim(), params.hidden, t.feature_dim(), &mut rng);
    net.w2 = Matrix::zeros(net.hidden_dim(), net.output_dim());
    net.b2 = t.features.column_means();
    net.check_shapes()?;
    let history = train_network(&mut net, t.len(), &cfg, &mut rng, |idx| class_batch(t, idx))?;
    Ok(DemModel {
        net,
        loss_history: history,
    })
}

pub fn dem_fit(bundle: &DatasetBundle, params: &DemParams) -> Result<DemModel> {
    dem_fit_set(&TrainingSet::train_split(bundle)?, params)
}

/// Nearest embedded candidate (euclidean) for every row of `x`.
pub fn dem_predict(m: &DemModel, x: &Matrix, s_cand: &Matrix) -> Result<Vec<usize>> {
    check_dim("candidate attribute dimension", m.attribute_dim(), s_cand.cols())?;
    check_dim("feature dimension", m.feature_dim(), x.cols())?;
    let embedded = m.net.forward_rows(s_cand);
    let mut dists = vec![0.0; embedded.rows()];
    Ok(x
        .row_iter()
        .map(|row| {
            for (d, e) in dists.iter_mut().zip(embedded.row_iter()) {
                *d = euclidean(row, e);
            }
            argmin(&dists)
        })
        .collect())
}

pub struct DemPrepared {
    net: TwoLayerNet,
    candidates: Matrix,
    hidden: Vec<f64>,
    embedded: Vec<f64>,
}

impl Prepared for DemPrepared {
    fn input_dim(&self) -> usize {
        self.net.output_dim()
    }

    fn n_candidates(&self) -> usize {
        self.candidates.rows()
    }

    fn classify(&mut self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (c, s) in self.candidates.row_iter().enumerate() {
            self.net.forward_into(s, &mut self.hidden, &mut self.embedded);
            let d = euclidean(x, &self.embedded);
            if d < best_dist {
                best = c;
                best_dist = d;
            }
        }
        best
    }
}
