//! Minimal reverse-mode engine covering the layers the classifiers use:
//! convolution, 2x2 max pooling, ReLU, dense, and softmax cross-entropy,
//! plus Adam and a finite-difference gradient checker.

mod gradcheck;
mod graph;
mod params;
mod real;
mod tensor;

pub use gradcheck::{grad_check, CoordinateMismatch, GradCheckOptions, GradCheckReport};
pub use graph::{Graph, UnaryBackward, Var};
pub use params::{adam_step, AdamConfig, ParamId, ParameterSet};
pub use real::Real;
pub use tensor::Tensor;
