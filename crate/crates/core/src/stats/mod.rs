//! Estimator arithmetic on already-evaluated samples.
//!
//! Everything in this module is a pure function of its inputs. Randomness
//! lives in [`crate::sampling`] and sample construction in [`crate::models`];
//! the functions here only see matrices of `f` evaluations.
//!
//! All sums are compensated ([`summation::NeumaierSum`]) and every estimator
//! that needs column means centres the data in a second pass instead of
//! expanding products algebraically. No estimate is ever clamped at zero:
//! unbiased estimators of nonnegative quantities can and do go negative.

mod moments;
mod pick_freeze;
pub mod summation;
mod types;

pub use moments::{
    central_moment, corrected_z3, corrected_z4, crude_moment, pair_statistic_s2, unbiased_z4,
};
pub use pick_freeze::{corrected_v, estimator_u, estimator_v, nested_w};
pub use summation::{stable_sum, NeumaierSum};
pub use types::{EstimatorOutput, GroupedSample, MultiColumnSample, Weights};

use crate::error::{Error, Result};
use summation::stable_mean_of;

/// Arithmetic mean of a column.
pub fn sample_mean(column: &[f64]) -> Result<f64> {
    if column.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(stable_mean_of(column.iter().copied(), column.len()))
}

/// Unbiased sample variance (divisor `N - 1`), computed in two passes.
pub fn sample_variance(column: &[f64]) -> Result<f64> {
    if column.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: column.len(),
        });
    }
    let mean = stable_mean_of(column.iter().copied(), column.len());
    let ss = stable_sum(column.iter().map(|&x| (x - mean) * (x - mean)));
    Ok(ss / (column.len() - 1) as f64)
}
