//! Convolutional classifiers with an element-wise chaotic feature transform.
//!
//! The pipeline is: convolutional feature extractor, per-sample min-max
//! normalization of the pre-head feature vector, an element-wise chaotic map
//! (logistic, skew tent, or sine), then a dense softmax head. The transform
//! has no trainable parameters and gradients flow through it end to end.
//!
//! Modules:
//!
//! - [`maps`]: scalar maps, slopes, orbits, Lyapunov estimates.
//! - [`autodiff`]: tensors, the recording tape, Adam, gradient checking.
//! - [`transform`]: the normalize-then-map layer.
//! - [`models`]: the 2-, 3- and 5-conv classifier builders.
//! - [`data`]: IDX and CIFAR-10 parsers, stratified subsets and folds.
//! - [`metrics`]: confusion matrices, macro F1, gain percentages.
//! - [`experiment`]: training runs, suites, grid search, result tables,
//!   CSV and SVG output, checkpoints.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod experiment;
pub mod maps;
pub mod metrics;
pub mod models;
pub mod transform;

pub use error::{Error, ParseError, Result};
