use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants fall into three families that the CLI maps onto exit codes:
/// invalid arguments (usage), data/format problems, and numerical failures.
#[derive(Debug, Error)]
pub enum ZslError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad magic (expected \"ZSPL\")")]
    BadMagic { path: PathBuf },

    #[error("{path}: unsupported format version {version}")]
    BadVersion { path: PathBuf, version: u32 },

    #[error("{path}: unknown dtype tag {tag}")]
    BadDtype { path: PathBuf, tag: u8 },

    #[error("{path}: truncated payload (expected {expected} bytes, found {found})")]
    Truncated {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("{path}: non-finite value at flat index {index}")]
    NonFinite { path: PathBuf, index: usize },

    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("split invariant violated: {0}")]
    Split(String),

    #[error("split part `{0}` is empty")]
    EmptySplit(&'static str),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive definite (pivot {pivot} at row {row}); try a larger regularizer")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("eigensolver did not converge within {cap} iterations")]
    NoConvergence { cap: usize },

    #[error("singular Sylvester system (eigenvalue sum {sum:e} at ({i}, {j})); increase lambda")]
    SingularSylvester { i: usize, j: usize, sum: f64 },

    #[error("non-finite loss at epoch {epoch}; learning rate {lr} is probably too high")]
    NonFiniteLoss { epoch: usize, lr: f64 },

    #[error("non-finite loss trend at epoch {epoch} (loss grew from {initial:e} to {loss:e}); learning rate {lr} is probably too high")]
    Diverged {
        epoch: usize,
        lr: f64,
        initial: f64,
        loss: f64,
    },
}

impl ZslError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ZslError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical routines (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            ZslError::NotPositiveDefinite { .. }
                | ZslError::NoConvergence { .. }
                | ZslError::SingularSylvester { .. }
                | ZslError::NonFiniteLoss { .. }
                | ZslError::Diverged { .. }
        )
    }

    /// True for errors caused by caller-supplied arguments.
    pub fn is_usage(&self) -> bool {
        matches!(self, ZslError::InvalidArgument(_))
    }
}

pub type Result<T, E = ZslError> = std::result::Result<T, E>;
