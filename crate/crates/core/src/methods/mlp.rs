//! Two-layer relu network with hand-written gradients, and Adam.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, ZslError};
use crate::matrix::{axpy, Matrix};

/// `relu(relu(x W1 + b1) W2 + b2)`
#[derive(Clone, Debug, PartialEq)]
pub struct TwoLayerNet {
    /// in x h
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// h x out
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for row in m.row_iter() {
        axpy(1.0, row, &mut out);
    }
    out
}

impl TwoLayerNet {
    /// He-uniform weights, zero biases.
    pub fn init(input: usize, hidden: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        let l1 = (6.0 / input.max(1) as f64).sqrt();
        let l2 = (6.0 / hidden.max(1) as f64).sqrt();
        TwoLayerNet {
            w1: Matrix::from_fn(input, hidden, |_, _| rng.random_range(-l1..l1)),
            b1: vec![0.0; hidden],
            w2: Matrix::from_fn(hidden, output, |_, _| rng.random_range(-l2..l2)),
            b2: vec![0.0; output],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.cols()
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite()
            && self.w2.is_finite()
            && self.b1.iter().chain(&self.b2).all(|v| v.is_finite())
    }

    pub fn check_shapes(&self) -> Result<()> {
        if self.b1.len() != self.w1.cols()
            || self.w2.rows() != self.w1.cols()
            || self.b2.len() != self.w2.cols()
        {
            return Err(ZslError::Shape(format!(
                "inconsistent layer shapes: W1 {}x{}, b1 {}, W2 {}x{}, b2 {}",
                self.w1.rows(),
                self.w1.cols(),
                self.b1.len(),
                self.w2.rows(),
                self.w2.cols(),
                self.b2.len()
            )));
        }
        if self.hidden_dim() == 0 {
            return Err(ZslError::InvalidArgument("hidden width must be positive".into()));
        }
        Ok(())
    }

    /// Single-input forward pass into caller-provided buffers.
    pub fn forward_into(&self, input: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        hidden.copy_from_slice(&self.b1);
        for (&v, row) in input.iter().zip(self.w1.row_iter()) {
            if v != 0.0 {
                axpy(v, row, hidden);
            }
        }
        relu_in_place(hidden);
        out.copy_from_slice(&self.b2);
        for (&h, row) in hidden.iter().zip(self.w2.row_iter()) {
            if h != 0.0 {
                axpy(h, row, out);
            }
        }
        relu_in_place(out);
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut hidden = vec![0.0; self.hidden_dim()];
        let mut out = vec![0.0; self.output_dim()];
        self.forward_into(input, &mut hidden, &mut out);
        out
    }

    /// Rows mapped through the network; every row uses [`Self::forward_into`].
    pub fn forward_rows(&self, inputs: &Matrix) -> Matrix {
        let mut hidden = vec![0.0; self.hidden_dim()];
        let mut out = Matrix::zeros(inputs.rows(), self.output_dim());
        for (i, row) in inputs.row_iter().enumerate() {
            self.forward_into(row, &mut hidden, out.row_mut(i));
        }
        out
    }

    pub fn l2_norm_sq(&self) -> f64 {
        let n1 = self.w1.frobenius_norm();
        let n2 = self.w2.frobenius_norm();
        n1 * n1 + n2 * n2
    }

    /// `sum_r weights[r] * ||f(inputs_r) - targets_r||^2 + l2 (||W1||^2 + ||W2||^2)`
    /// and its gradient.
    pub fn loss_and_grad(
        &self,
        inputs: &Matrix,
        targets: &Matrix,
        weights: &[f64],
        l2: f64,
    ) -> (f64, Gradients) {
        let mut pre1 = inputs.matmul(&self.w1);
        for row in pre1.as_mut_slice().chunks_exact_mut(self.hidden_dim()) {
            axpy(1.0, &self.b1, row);
        }
        let mut h = pre1.clone();
        relu_in_place(h.as_mut_slice());
        let mut pre2 = h.matmul(&self.w2);
        for row in pre2.as_mut_slice().chunks_exact_mut(self.output_dim()) {
            axpy(1.0, &self.b2, row);
        }

        let mut loss = 0.0;
        let mut d2 = Matrix::zeros(pre2.rows(), pre2.cols());
        for r in 0..pre2.rows() {
            let w = weights[r];
            let (p, t, g) = (pre2.row(r), targets.row(r), d2.row_mut(r));
            let mut sq = 0.0;
            for k in 0..p.len() {
                let out = p[k].max(0.0);
                let diff = out - t[k];
                sq += diff * diff;
                g[k] = if p[k] > 0.0 { 2.0 * w * diff } else { 0.0 };
            }
            loss += w * sq;
        }
        loss += l2 * self.l2_norm_sq();

        let mut gw2 = h.transpose().matmul(&d2);
        axpy(2.0 * l2, self.w2.as_slice(), gw2.as_mut_slice());
        let gb2 = column_sums(&d2);

        let mut d1 = d2.matmul_nt(&self.w2);
        for (g, &p) in d1.as_mut_slice().iter_mut().zip(pre1.as_slice()) {
            if p <= 0.0 {
                *g = 0.0;
            }
        }
        let mut gw1 = inputs.transpose().matmul(&d1);
        axpy(2.0 * l2, self.w1.as_slice(), gw1.as_mut_slice());
        let gb1 = column_sums(&d1);

        (
            loss,
            Gradients {
                w1: gw1,
                b1: gb1,
                w2: gw2,
                b2: gb2,
            },
        )
    }

    pub fn apply(&mut self, adam: &mut Adam, g: &Gradients) {
        adam.step(&mut [
            (self.w1.as_mut_slice(), g.w1.as_slice()),
            (self.b1.as_mut_slice(), g.b1.as_slice()),
            (self.w2.as_mut_slice(), g.w2.as_slice()),
            (self.b2.as_mut_slice(), g.b2.as_slice()),
        ]);
    }

    pub fn param_sizes(&self) -> [usize; 4] {
        [
            self.w1.as_slice().len(),
            self.b1.len(),
            self.w2.as_slice().len(),
            self.b2.len(),
        ]
    }
}

/// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, sizes: &[usize]) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// One update; `groups[k]` is `(parameters, gradient)` of the k-th tensor.
    pub fn step(&mut self, groups: &mut [(&mut [f64], &[f64])]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (k, (p, g)) in groups.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

/// Optimizer settings shared by the network trainers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(ZslError::InvalidArgument(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.l2 >= 0.0) || !self.l2.is_finite() {
            return Err(ZslError::InvalidArgument(format!("l2 must be >= 0, got {}", self.l2)));
        }
        if self.batch == 0 {
            return Err(ZslError::InvalidArgument("batch must be positive".into()));
        }
        Ok(())
    }
}

/// Training stops with [`ZslError::Diverged`] once an epoch's mean loss
/// exceeds the first batch loss by this factor.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

/// A mini-batch prepared for [`TwoLayerNet::loss_and_grad`]: inputs, targets,
/// per-row weights, and a constant added to the reported loss.
pub struct Batch {
    pub inputs: Matrix,
    pub targets: Matrix,
    pub weights: Vec<f64>,
    pub offset: f64,
}

/// Shuffled mini-batch training; returns the mean loss of every epoch.
pub fn train_network(
    net: &mut TwoLayerNet,
    n: usize,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    mut make_batch: impl FnMut(&[usize]) -> Batch,
) -> Result<Vec<f64>> {
    use rand::seq::SliceRandom;
    cfg.validate()?;
    let mut adam = Adam::new(cfg.lr, &net.param_sizes());
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut initial = None;
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let b = make_batch(chunk);
            let (loss, grads) = net.loss_and_grad(&b.inputs, &b.targets, &b.weights, cfg.l2);
            let loss = loss + b.offset;
            if !loss.is_finite() {
                return Err(ZslError::NonFiniteLoss { epoch, lr: cfg.lr });
            }
            initial.get_or_insert(loss);
            total += loss * chunk.len() as f64;
            net.apply(&mut adam, &grads);
        }
        if !net.is_finite() {
            return Err(ZslError::NonFiniteLoss { epoch, lr: cfg.lr });
        }
        let mean = total / n.max(1) as f64;
        if let Some(initial) = initial.filter(|&i| i > 0.0 && mean > DIVERGENCE_FACTOR * i) {
            return Err(ZslError::Diverged {
                epoch,
                lr: cfg.lr,
                initial,
                loss: mean,
            });
        }
        history.push(mean);
    }
    Ok(history)
}
