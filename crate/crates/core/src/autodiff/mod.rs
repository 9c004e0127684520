//! Dense `f64` tensors with tape-based reverse-mode differentiation.
//!
//! Only scalar-times-tensor broadcasting exists; every other op wants
//! matching shapes.

mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use gradcheck::{grad_check, GradCheck};
pub use graph::{Graph, Var, SQRT_EPS};
pub use params::{Gradients, ParamStore};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("{op}: axis {axis} out of range for rank {rank}")]
    Axis { op: &'static str, axis: usize, rank: usize },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("{op}: input {value} outside the domain")]
    Domain { op: &'static str, value: f64 },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParam(String),
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("while probing parameter `{param}` entry {index}: {source}")]
    GradCheck {
        param: String,
        index: usize,
        #[source]
        source: Box<TensorError>,
    },
}

impl TensorError {
    pub(crate) fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> Self {
        TensorError::Shape { op, detail: format!("incompatible shapes {a:?} and {b:?}") }
    }
}
