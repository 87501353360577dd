//! Linearly constrained Kalman filtering for linear discrete state-space models.
//!
//! - [`model`]: models, joint noise statistics, seeded simulation.
//! - [`batch`]: stacked horizon model and closed-form reference estimators.
//! - [`filter`]: predictor/corrector recursions (KF, distortionless, constrained, static).
//! - [`constraints`]: constraint schedules, their stacked form, robustness constraints.
//! - [`harness`]: Monte Carlo experiments and reports.
//! - [`scenario`]: JSON scenario files.

pub mod batch;
pub mod constraints;
pub mod error;
pub mod filter;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod scenario;

pub use error::{Error, Result};
pub use linalg::{Mat, Vector};
