//! Dense tensors and the layer primitives of the classifier, each with an
//! explicit forward and backward pass.

mod gradcheck;
mod ops;
mod tensor;

use thiserror::Error;

pub use gradcheck::{gradient_check, numeric_gradient, relative_error};
pub use ops::*;
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("{op}: shape mismatch, expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("batch norm in train mode needs at least two rows, got {0}")]
    SingletonBatch(usize),
}

/// Batch-norm behavior: batch statistics (train) or running statistics (eval).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub(crate) fn shape_err(op: &'static str, expected: &[usize], got: &[usize]) -> NnError {
    NnError::ShapeMismatch {
        op,
        expected: expected.to_vec(),
        got: got.to_vec(),
    }
}
