//! Probabilistic multi-step forecasting of wave-height signals with a deep
//! ensemble of LSTM networks, each emitting a Gaussian (mean, variance) per
//! future step, plus post-hoc STD-scaling calibration.
//!
//! Pipeline: [`series`] (ingest, normalize, slice) → [`train`] /
//! [`ensemble`] (fit members, mix their Gaussians) → [`metrics`] (accuracy
//! and reliability) → [`calibrate`] (fit the scaling factor).
//! [`synthwave`] generates seeded test signals; [`checkpoint`] persists
//! trained ensembles.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod checkpoint;
pub mod config;
pub mod ensemble;
mod error;
pub mod lstm;
pub mod metrics;
pub mod pipeline;
pub mod series;
pub mod synthwave;
pub mod train;

pub use error::{Error, Result};
