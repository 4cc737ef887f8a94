//! Switch-scheduled per-sensor recurrent networks for irregularly sampled
//! multivariate time series.
//!
//! The crate is organised bottom-up:
//!
//! * [`data`]: records, switch schedules, transforms, sampling, synthetic data and I/O.
//! * [`diff`]: dense tensors and a reverse-mode differentiation tape.
//! * [`metrics`]: exact AUROC and average precision.
//! * [`model`]: parameters, the switch-scheduled rollout and checkpoints.
//! * [`train`]: split preparation, AdamW and the early-stopping training loop.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`, which gradient checking requires.

pub mod data;
pub mod diff;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod train;

pub use scalar::Scalar;

pub type Tensor64 = diff::Tensor<f64>;
pub type Tape64 = diff::Tape<f64>;
pub type SlanParams64 = model::SlanParams<f64>;
pub type SlanParams32 = model::SlanParams<f32>;
