use crate::error::{Result, ZslError};
use crate::matrix::{dot, Matrix};

/// Relative symmetry tolerance, scaled by `max(1, max|A|)`.
pub const SYMMETRY_TOL: f64 = 1e-8;

pub(crate) fn check_symmetric(a: &Matrix, what: &str) -> Result<()> {
    if a.rows() != a.cols() {
        return Err(ZslError::Dimension(format!(
            "{what} must be square, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let tol = SYMMETRY_TOL * a.max_abs().max(1.0);
    let asym = a.asymmetry();
    if asym > tol {
        return Err(ZslError::InvalidArgument(format!(
            "{what} is not symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok(())
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Matrix,
    lt: Matrix,
}

impl Cholesky {
    pub fn factor(a: &Matrix) -> Result<Cholesky> {
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s = a.get(i, j) - dot(&l.row(i)[..j], &l.row(j)[..j]);
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(ZslError::NotPositiveDefinite { row: i, pivot: s });
                    }
                    l.set(i, i, s.sqrt());
                } else {
                    let v = s / l.get(j, j);
                    l.set(i, j, v);
                }
            }
        }
        let lt = l.transpose();
        Ok(Cholesky { l, lt })
    }

    pub fn factor_matrix(&self) -> &Matrix {
        &self.l
    }

    /// Solves `L L^T x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.l.rows();
        for i in 0..n {
            let s = b[i] - dot(&self.l.row(i)[..i], &b[..i]);
            b[i] = s / self.l.get(i, i);
        }
        for i in (0..n).rev() {
            let s = b[i] - dot(&self.lt.row(i)[i + 1..], &b[i + 1..]);
            b[i] = s / self.lt.get(i, i);
        }
    }

    /// Solves for every column of `b`.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        let mut bt = b.transpose();
        for j in 0..bt.rows() {
            self.solve_in_place(bt.row_mut(j));
        }
        bt.transpose()
    }
}

/// Solves `(A + gamma I) X = B` for symmetric positive semi-definite `A`.
pub fn ridge_solve(a: &Matrix, gamma: f64, b: &Matrix) -> Result<Matrix> {
    check_symmetric(a, "ridge system matrix")?;
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(ZslError::InvalidArgument(format!(
            "ridge gamma must be a finite non-negative number, got {gamma}"
        )));
    }
    if b.rows() != a.rows() {
        return Err(ZslError::Dimension(format!(
            "right-hand side has {} rows, system has {}",
            b.rows(),
            a.rows()
        )));
    }
    let chol = Cholesky::factor(&a.add_identity(gamma))?;
    Ok(chol.solve(b))
}
