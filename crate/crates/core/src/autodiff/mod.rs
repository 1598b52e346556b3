//! Reverse-mode automatic differentiation over `f64` tensors.

mod gradcheck;
mod params;
mod tape;
mod tensor;

use thiserror::Error;

pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use params::{GradBuffer, ParamId, ParamStore};
pub use tape::{sigmoid, softmax, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: index out of range for shape {shape:?}")]
    Index { op: &'static str, shape: Vec<usize> },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("backward was already run on this tape")]
    BackwardTwice,
    #[error("{0}: produced a non-finite value")]
    NonFinite(&'static str),
}
