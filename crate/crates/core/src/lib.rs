//! Zero-shot learning toolkit: data formats, closed-form and gradient-trained
//! classifiers, the restricted/generalized evaluation protocol and a
//! single-sample inference timing harness.

pub mod bench;
pub mod data;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod methods;
pub mod numerics;

pub use error::{Result, ZslError};
pub use matrix::Matrix;
