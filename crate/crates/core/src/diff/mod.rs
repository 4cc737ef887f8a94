//! Dense tensors and a reverse-mode differentiation tape.

mod gradcheck;
mod tape;
mod tensor;

pub use gradcheck::{check_gradients, relative_error, GradCheckReport, ParamCheck};
pub use tape::{Tape, Var};
pub use tensor::{Shape, Tensor};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("{op}: shape mismatch between {left} and {right}")]
    ShapeMismatch {
        op: &'static str,
        left: Shape,
        right: Shape,
    },
    #[error("{op}: non-finite output at node {node}")]
    NonFinite { op: &'static str, node: usize },
    #[error("{op}: called with no inputs")]
    EmptyInput { op: &'static str },
    #[error("slice of {len} rows at {start} is out of range for {shape}")]
    SliceOutOfRange { shape: Shape, start: usize, len: usize },
    #[error("label {label} out of range for logits of shape {shape}")]
    LabelOutOfRange { label: usize, shape: Shape },
    #[error("backward root must be a scalar, got {shape}")]
    NonScalarRoot { shape: Shape },
    #[error("backward already ran on this tape; call zero_grad first")]
    BackwardRepeated,
}
