//! Semantic decoder `x -> (h'(x), a(x))` and the classifier that consumes
//! `[x || h'(x) || a(x)]`.

use super::mlp::{train_network, Batch, TrainConfig, TwoLayerNet};
use super::softmax_clf::LinearSoftmaxModel;
use super::{check_dim, classify_rows, seeded_rng, Prepared, TrainingSet};
use crate::error::Result;
use crate::matrix::{dot, Matrix};
use crate::numerics::argmax;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecoderParams {
    pub hidden: usize,
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for DecoderParams {
    fn default() -> Self {
        DecoderParams {
            hidden: 512,
            lr: 1e-3,
            l2: 1e-4,
            epochs: 30,
            batch: 64,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderModel {
    /// features -> hidden -> attributes
    pub net: TwoLayerNet,
}

impl DecoderModel {
    pub fn feature_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.net.hidden_dim()
    }

    pub fn attribute_dim(&self) -> usize {
        self.net.output_dim()
    }

    /// Length of `[x || h' || a]`.
    pub fn augmented_dim(&self) -> usize {
        self.feature_dim() + self.hidden_dim() + self.attribute_dim()
    }

    /// Writes `[x || h'(x) || a(x)]` into `out`.
    pub fn augment_into(&self, x: &[f64], out: &mut [f64]) {
        let (d, h) = (self.feature_dim(), self.hidden_dim());
        let (head, rest) = out.split_at_mut(d);
        head.copy_from_slice(x);
        let (hidden, attrs) = rest.split_at_mut(h);
        self.net.forward_into(x, hidden, attrs);
    }

    pub fn augment_rows(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.augmented_dim());
        for (i, row) in x.row_iter().enumerate() {
            self.augment_into(row, out.row_mut(i));
        }
        out
    }
}

/// Regresses every instance's class attributes from its features.
pub fn decoder_fit(t: &TrainingSet, params: &DecoderParams) -> Result<DecoderModel> {
    let cfg = TrainConfig {
        lr: params.lr,
        l2: params.l2,
        epochs: params.epochs,
        batch: params.batch,
    };
    cfg.validate()?;
    let mut rng = seeded_rng(params.seed);
    let mut net = TwoLayerNet::init(t.feature_dim(), params.hidden, t.attribute_dim(), &mut rng);
    net.w2 = Matrix::zeros(net.hidden_dim(), net.output_dim());
    net.b2 = t.instance_attributes().column_means();
    net.check_shapes()?;
    train_network(&mut net, t.len(), &cfg, &mut rng, |idx| {
        let classes: Vec<usize> = idx.iter().map(|&i| t.class_index[i]).collect();
        Batch {
            inputs: t.features.select_rows(idx),
            targets: t.class_attributes.select_rows(&classes),
            weights: vec![1.0 / idx.len() as f64; idx.len()],
            offset: 0.0,
        }
    })?;
    Ok(DecoderModel { net })
}

/// Index into `clf.class_ids` for every row of `x`.
pub fn decoder_augmented_predict(
    clf: &LinearSoftmaxModel,
    dec: &DecoderModel,
    x: &Matrix,
) -> Result<Vec<usize>> {
    classify_rows(&mut prepare_augmented(clf, dec, &clf.class_ids)?, x)
}

pub fn prepare_augmented(
    clf: &LinearSoftmaxModel,
    dec: &DecoderModel,
    classes: &[u32],
) -> Result<AugmentedPrepared> {
    check_dim("classifier input dimension", dec.augmented_dim(), clf.input_dim())?;
    let rows = clf.rows_for(classes)?;
    Ok(AugmentedPrepared {
        decoder: dec.clone(),
        w: clf.w.select_rows(&rows),
        b: rows.iter().map(|&r| clf.b[r]).collect(),
        augmented: vec![0.0; dec.augmented_dim()],
        logits: vec![0.0; rows.len()],
    })
}

pub struct AugmentedPrepared {
    decoder: DecoderModel,
    w: Matrix,
    b: Vec<f64>,
    augmented: Vec<f64>,
    logits: Vec<f64>,
}

impl Prepared for AugmentedPrepared {
    fn input_dim(&self) -> usize {
        self.decoder.feature_dim()
    }

    fn n_candidates(&self) -> usize {
        self.w.rows()
    }

    fn classify(&mut self, x: &[f64]) -> usize {
        self.decoder.augment_into(x, &mut self.augmented);
        for ((l, row), b) in self.logits.iter_mut().zip(self.w.row_iter()).zip(&self.b) {
            *l = dot(row, &self.augmented) + b;
        }
        argmax(&self.logits)
    }
}
