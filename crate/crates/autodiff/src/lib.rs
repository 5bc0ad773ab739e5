//! Dense n-dimensional tensors with reverse-mode automatic differentiation.
//!
//! The engine is a dynamically built tape: every differentiable operation
//! records its parents and an adjoint closure. Calling [`Tensor::backward`]
//! on a scalar walks the tape in reverse topological order and accumulates
//! gradients into the leaf tensors that were created with
//! [`Tensor::param`].
//!
//! Training code runs in `f32`; gradient verification runs the same ops in
//! `f64` (see [`check::grad_check`]).

mod elem;
mod error;
mod ops;
mod tensor;

pub mod check;
pub mod param;

pub use elem::Elem;
pub use error::TensorError;
pub use ops::RunningStats;
pub use param::Parameter;
pub use tensor::{no_grad, Tensor};

pub type Result<T, E = TensorError> = std::result::Result<T, E>;
