//! Unbiased non-nested (pick-freeze) Monte Carlo estimators for the variance
//! and higher moments of a conditional expectation `E_{X|Y}[f]`.
//!
//! * [`stats`]: estimator arithmetic on evaluated sample matrices.
//! * [`sampling`]: reproducible, splittable random streams and samplers.
//! * [`models`]: conditional models and the paired-sample builders.
//! * [`oracle`]: closed-form and brute-force nested reference values.
//! * [`harness`]: replication, convergence and equal-budget experiments.
//! * [`identities`]: deterministic cross-checks between estimator forms.
//! * [`cli`]: the `pickfreeze` command-line frontend.

pub mod cli;
pub mod error;
pub mod harness;
pub mod identities;
pub mod models;
pub mod oracle;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};
