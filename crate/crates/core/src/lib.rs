//! Closed-loop adaptive sensing.
//!
//! An agent observes a synthetic environment through a configurable sensor
//! (exposure, gain, range, tactile thresholds) and chooses sensor options
//! that make captures easy for a downstream perception model. The crate
//! provides the capture pipeline, logistic perception models with
//! confidence-based quality metrics, tabular sensing and action policies,
//! environments, the closed loops tying them together, and an experiment
//! harness.

pub mod domain;
pub mod envs;
pub mod error;
pub mod harness;
pub mod learn;
pub mod loops;
pub mod perception;
pub mod policies;
pub mod seed;
pub mod sensing;

pub use domain::*;
pub use error::{Error, Result};
