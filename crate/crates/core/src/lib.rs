//! Uncertainty-aware 3D detection post-processing and multi-object tracking.
//!
//! The crate is organised bottom-up:
//!
//! - [`math`]: Bessel functions and the heteroscedastic regression losses
//!   (Gaussian and von-Mises NLL) with analytic gradients.
//! - [`codec`]: anchor-relative box encoding and log-variance decoding into
//!   world-space variances.
//! - [`geometry`]: rotated-rectangle intersection, BEV and 3D IoU.
//! - [`scoring`]: uncertainty-to-score mappings and greedy NMS.
//! - [`tracker`]: GNN association, CTRA unscented Kalman filter, size filter
//!   and the object buffer.
//! - [`sim`]: seeded synthetic scenarios with heteroscedastic detection noise.
//! - [`metrics`]: detection AP / max F1 and CLEAR-style tracking metrics.
//! - [`pipeline`]: glue that runs a tracker over a scenario and scores it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codec;
pub mod error;
pub mod geometry;
pub mod math;
pub mod metrics;
pub mod pipeline;
pub mod scoring;
pub mod sim;
pub mod tracker;
pub mod types;

pub use error::{Error, Result};
pub use types::{normalize_angle, BoxVariance, Box3D, ObjectClass};
