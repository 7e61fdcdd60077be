//! `A W + W B = C` for symmetric positive semi-definite `A` (k x k) and `B` (d x d).
//!
//! With `A = U diag(alpha) U^T` and `B = V diag(beta) V^T` the system decouples
//! into `W~_ij = C~_ij / max(alpha_i + beta_j, eps)` where `C~ = U^T C V` and
//! `W = U W~ V^T`. The floor `eps = 1e-8 (max alpha + max beta)` keeps zero
//! eigenvalue pairs finite; pairs above it are solved exactly.

use super::eig::{sym_eig, EigDecomp};
use crate::error::{Result, ZslError};
use crate::matrix::Matrix;

pub const EPS_FACTOR: f64 = 1e-8;
/// Denominators at or below this are treated as singular.
pub const SINGULAR_FLOOR: f64 = 1e-10;

/// Eigendecompositions of both coefficient matrices, reusable across
/// right-hand sides and across scalings of `B`.
#[derive(Clone, Debug)]
pub struct SylvesterFactors {
    a: EigDecomp,
    b: EigDecomp,
}

impl SylvesterFactors {
    pub fn new(a: &Matrix, b: &Matrix) -> Result<Self> {
        Ok(SylvesterFactors {
            a: sym_eig(a)?,
            b: sym_eig(b)?,
        })
    }

    pub fn k(&self) -> usize {
        self.a.values.len()
    }

    pub fn d(&self) -> usize {
        self.b.values.len()
    }

    /// `U^T C V`, the right-hand side in the joint eigenbasis.
    pub fn rotate_rhs(&self, c: &Matrix) -> Result<Matrix> {
        if c.shape() != (self.k(), self.d()) {
            return Err(ZslError::Dimension(format!(
                "Sylvester right-hand side is {}x{}, expected {}x{}",
                c.rows(),
                c.cols(),
                self.k(),
                self.d()
            )));
        }
        // (U^T C) V = (U^T C) (V^T)^T
        let utc = self.a.vectors.transpose().matmul(c);
        Ok(utc.matmul_nt(&self.b.vectors.transpose()))
    }

    /// Solves `A W + W (b_scale B) = rhs_scale C` given `C~ = U^T C V`.
    pub fn solve_rotated(&self, c_rot: &Matrix, b_scale: f64, rhs_scale: f64) -> Result<Matrix> {
        let alpha = &self.a.values;
        let beta: Vec<f64> = self.b.values.iter().map(|v| v * b_scale).collect();
        let max_a = alpha.iter().cloned().fold(0.0f64, f64::max);
        let max_b = beta.iter().cloned().fold(0.0f64, f64::max);
        let eps = EPS_FACTOR * (max_a + max_b);
        let mut w = Matrix::zeros(self.k(), self.d());
        for (i, &ai) in alpha.iter().enumerate() {
            for (j, &bj) in beta.iter().enumerate() {
                let denom = (ai + bj).max(eps);
                if denom <= SINGULAR_FLOOR {
                    return Err(ZslError::SingularSylvester {
                        i,
                        j,
                        sum: ai + bj,
                    });
                }
                w.set(i, j, rhs_scale * c_rot.get(i, j) / denom);
            }
        }
        // W = U W~ V^T
        Ok(self.a.vectors.matmul(&w).matmul_nt(&self.b.vectors))
    }
}

pub fn solve_sylvester(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    let factors = SylvesterFactors::new(a, b)?;
    let c_rot = factors.rotate_rhs(c)?;
    factors.solve_rotated(&c_rot, 1.0, 1.0)
}

/// `||A W + W B - C||_F / ||C||_F` (absolute norm when `C = 0`).
pub fn sylvester_residual(a: &Matrix, b: &Matrix, c: &Matrix, w: &Matrix) -> f64 {
    let r = a.matmul(w).add(&w.matmul(b)).sub(c).frobenius_norm();
    let scale = c.frobenius_norm();
    if scale > 0.0 {
        r / scale
    } else {
        r
    }
}
