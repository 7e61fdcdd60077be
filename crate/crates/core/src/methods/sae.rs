//! Linear semantic autoencoder: encoder `W` (a x d), decoder `W^T`.

use serde::{Deserialize, Serialize};

use super::{check_dim, classify_rows, Prepared, TrainingSet};
use crate::data::DatasetBundle;
use crate::error::{Result, ZslError};
use crate::matrix::{dot, Matrix};
use crate::numerics::{argmin, distance, sylvester_residual, Metric, SylvesterFactors};

/// Residual bound every fit is expected to meet.
pub const RESIDUAL_BOUND: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Encode `x` and match against candidate attributes.
    FeatureToSemantic,
    /// Decode candidate attributes and match against `x`.
    SemanticToFeature,
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "feature_to_semantic" | "f2s" => Ok(Direction::FeatureToSemantic),
            "semantic_to_feature" | "s2f" => Ok(Direction::SemanticToFeature),
            other => Err(format!(
                "unknown direction `{other}` (feature_to_semantic|semantic_to_feature)"
            )),
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::FeatureToSemantic => "feature_to_semantic",
            Direction::SemanticToFeature => "semantic_to_feature",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaeModel {
    /// a x d
    pub w: Matrix,
    pub lambda: f64,
    /// Relative Sylvester residual of the training system.
    pub residual: f64,
    pub direction: Direction,
    pub metric: Metric,
}

impl SaeModel {
    pub fn new(w: Matrix, lambda: f64) -> Self {
        SaeModel {
            w,
            lambda,
            residual: 0.0,
            direction: Direction::FeatureToSemantic,
            metric: Metric::Cosine,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn attribute_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn prepare(&self, s_cand: &Matrix, direction: Direction, metric: Metric) -> Result<SaePrepared> {
        check_dim("candidate attribute dimension", self.attribute_dim(), s_cand.cols())?;
        let n = s_cand.rows();
        Ok(match direction {
            Direction::FeatureToSemantic => SaePrepared {
                encoder: Some(self.w.clone()),
                targets: s_cand.clone(),
                encoded: vec![0.0; self.attribute_dim()],
                dists: vec![0.0; n],
                metric,
                input_dim: self.feature_dim(),
            },
            Direction::SemanticToFeature => SaePrepared {
                encoder: None,
                // row c = (W^T s_c)^T
                targets: s_cand.matmul(&self.w),
                encoded: Vec::new(),
                dists: vec![0.0; n],
                metric,
                input_dim: self.feature_dim(),
            },
        })
    }
}

/// Training statistics shared by every lambda.
pub struct SaeSystem {
    /// S S^T (a x a)
    a: Matrix,
    /// X X^T (d x d)
    gram: Matrix,
    /// S X^T (a x d)
    sx: Matrix,
    factors: SylvesterFactors,
    sx_rotated: Matrix,
}

impl SaeSystem {
    pub fn new(t: &TrainingSet) -> Result<Self> {
        let s = &t.class_attributes;
        let counts = t.class_counts();
        let weighted = Matrix::from_fn(s.rows(), s.cols(), |k, j| s.get(k, j) * counts[k] as f64);
        let a = weighted.transpose().matmul(s);
        let a = a.add(&a.transpose()).scale(0.5);
        let gram = t.features.gram();
        let sx = s.transpose().matmul(&t.class_feature_sums());
        let factors = SylvesterFactors::new(&a, &gram)?;
        let sx_rotated = factors.rotate_rhs(&sx)?;
        Ok(SaeSystem {
            a,
            gram,
            sx,
            factors,
            sx_rotated,
        })
    }

    pub fn solve(&self, lambda: f64) -> Result<SaeModel> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(ZslError::InvalidArgument(format!(
                "SAE lambda must be positive, got {lambda}"
            )));
        }
        let w = self.factors.solve_rotated(&self.sx_rotated, lambda, 1.0 + lambda)?;
        let residual = self.residual(&w, lambda);
        if residual >= RESIDUAL_BOUND {
            log::warn!("SAE Sylvester residual {residual:e} exceeds {RESIDUAL_BOUND:e}");
        }
        let mut m = SaeModel::new(w, lambda);
        m.residual = residual;
        Ok(m)
    }

    /// `||A W + W (lambda X X^T) - (1 + lambda) S X^T||_F / ||C||_F`
    pub fn residual(&self, w: &Matrix, lambda: f64) -> f64 {
        sylvester_residual(
            &self.a,
            &self.gram.scale(lambda),
            &self.sx.scale(1.0 + lambda),
            w,
        )
    }
}

pub fn sae_fit_set(t: &TrainingSet, lambda: f64) -> Result<SaeModel> {
    SaeSystem::new(t)?.solve(lambda)
}

pub fn sae_fit(bundle: &DatasetBundle, lambda: f64) -> Result<SaeModel> {
    sae_fit_set(&TrainingSet::train_split(bundle)?, lambda)
}

pub fn sae_predict(
    m: &SaeModel,
    x: &Matrix,
    s_cand: &Matrix,
    direction: Direction,
    metric: Metric,
) -> Result<Vec<usize>> {
    classify_rows(&mut m.prepare(s_cand, direction, metric)?, x)
}

pub struct SaePrepared {
    encoder: Option<Matrix>,
    targets: Matrix,
    encoded: Vec<f64>,
    dists: Vec<f64>,
    metric: Metric,
    input_dim: usize,
}

impl Prepared for SaePrepared {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn n_candidates(&self) -> usize {
        self.targets.rows()
    }

    fn classify(&mut self, x: &[f64]) -> usize {
        let query: &[f64] = match &self.encoder {
            Some(w) => {
                for (e, row) in self.encoded.iter_mut().zip(w.row_iter()) {
                    *e = dot(row, x);
                }
                &self.encoded
            }
            None => x,
        };
        for (d, t) in self.dists.iter_mut().zip(self.targets.row_iter()) {
            *d = distance(query, t, self.metric);
        }
        argmin(&self.dists)
    }
}
