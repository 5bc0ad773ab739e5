use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch, expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },
    #[error("{op}: invalid axis {axis} for rank-{rank} tensor")]
    InvalidAxis {
        op: &'static str,
        axis: usize,
        rank: usize,
    },
    #[error("{op}: empty input")]
    EmptyInput { op: &'static str },
    #[error("backward requires a scalar root, got shape {shape:?}")]
    NonScalarRoot { shape: Vec<usize> },
    #[error("{op}: target index {index} out of range for {classes} classes")]
    TargetOutOfRange {
        op: &'static str,
        index: usize,
        classes: usize,
    },
    #[error("parameter {name} has no gradient")]
    MissingGrad { name: String },
    #[error("{op}: {msg}")]
    Invalid { op: &'static str, msg: String },
}

impl TensorError {
    pub(crate) fn shape(op: &'static str, expected: impl std::fmt::Debug, got: impl std::fmt::Debug) -> Self {
        TensorError::ShapeMismatch {
            op,
            expected: format!("{expected:?}"),
            got: format!("{got:?}"),
        }
    }

    pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        TensorError::Invalid { op, msg: msg.into() }
    }
}
