//! Estimation and probabilistic projection of subnational sex ratios at birth.
//!
//! The pipeline turns weighted birth records into region-period sex ratio
//! observations, fits a hierarchical time-series model with a per-region
//! inflation indicator and a trapezoid transition, and projects the posterior
//! forward.

pub mod cli;
pub mod data;
pub mod error;
pub mod inference;
pub mod model;
pub mod projection;
pub mod stats;
pub mod validation;

pub use error::{Result, SrbError};
