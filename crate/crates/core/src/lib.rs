//! Probing CNN channels with sinusoidal gratings, ranking them by how well
//! they match human contrast sensitivity, and using the best-matching
//! channels as a full-reference perceptual distance.
//!
//! The pipeline runs in four steps:
//!
//! 1. [`model_io::load_model`] links a JSON manifest with a binary weight container.
//! 2. [`perception::probe_layer`] sweeps gratings through a tap and scores every channel.
//! 3. [`perception::select_subset`] keeps the top or bottom x% of channels.
//! 4. [`distance::MetricConfig`] measures image differences on that subset, and
//!    [`eval`] checks the distance against human judgments.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distance;
pub mod error;
pub mod eval;
pub mod inference;
pub mod model_io;
pub mod perception;
pub mod stimuli;
pub mod tensor;

pub use distance::{ImageMetric, L2Metric, MetricConfig, SsimMetric, Weighting};
pub use error::{Error, Result};
pub use inference::NetworkModel;
pub use tensor::Tensor;
