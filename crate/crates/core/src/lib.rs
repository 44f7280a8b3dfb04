//! Laboratory for the Cognitive Neural Activation (CNA) metric.
//!
//! * [`nn`]: deterministic feedforward networks that can record per-layer
//!   pre-activation aggregates.
//! * [`metrics`]: input entropy, activation slope, CNA, CNA-Margin and
//!   norm-based generalization measures.
//! * [`data`]: IDX loading, Gaussian-noise data, label corruption.
//! * [`analysis`]: trajectories, PCA landscapes, complexity binning and
//!   metric-vs-gap correlation reports.

pub mod analysis;
pub mod data;
mod error;
pub mod metrics;
pub mod nn;
pub mod rng;
mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
