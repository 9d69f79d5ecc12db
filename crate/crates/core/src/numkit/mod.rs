//! Dense matrices, a recording tape for reverse-mode gradients, finite
//! difference checking, and the Adam optimizer. Everything is `f64`.

mod adam;
mod gradcheck;
mod matrix;
mod tape;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{
    analytic_gradient, grad_check, max_relative_error, numeric_gradient, GradCheckReport,
};
pub use matrix::Matrix;
pub use tape::{Tape, Var};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum NumError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
    #[error("mean over an empty index set")]
    EmptyIndexSet,
    #[error("backward needs a scalar loss, got {0}x{1}")]
    NotScalar(usize, usize),
}
