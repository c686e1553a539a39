//! Higher crude and central moments of the conditional expectation from
//! `m` conditionally independent columns.

use super::summation::stable_mean_of;
use super::types::{EstimatorOutput, MultiColumnSample};
use crate::error::{Error, Result};

fn require_cols(s: &MultiColumnSample, expected: usize) -> Result<()> {
    if s.cols() != expected {
        return Err(Error::ColumnCount {
            expected: expected.to_string(),
            got: s.cols(),
        });
    }
    Ok(())
}

fn require_rows_above(s: &MultiColumnSample, bound: usize) -> Result<()> {
    if s.rows() <= bound {
        return Err(Error::TooFewSamples {
            needed: bound + 1,
            got: s.rows(),
        });
    }
    Ok(())
}

/// Each column minus its own sample mean.
fn centred_columns(s: &MultiColumnSample) -> Vec<Vec<f64>> {
    s.columns()
        .map(|col| {
            let mu = stable_mean_of(col.iter().copied(), col.len());
            col.iter().map(|&x| x - mu).collect()
        })
        .collect()
}

/// Mean over rows of the product across the selected columns.
fn mean_row_product(columns: &[&[f64]], rows: usize) -> f64 {
    stable_mean_of(
        (0..rows).map(|n| columns.iter().map(|c| c[n]).product::<f64>()),
        rows,
    )
}

fn output(s: &MultiColumnSample, value: f64) -> EstimatorOutput {
    EstimatorOutput {
        value,
        evaluations_used: s.evaluations(),
    }
}

/// `W_m`: mean of row-wise products, unbiased for the `m`-th crude moment.
pub fn crude_moment(s: &MultiColumnSample) -> Result<EstimatorOutput> {
    let cols: Vec<&[f64]> = s.columns().collect();
    Ok(output(s, mean_row_product(&cols, s.rows())))
}

/// `Z_m`: mean of row-wise products of per-column centred values.
pub fn central_moment(s: &MultiColumnSample) -> Result<EstimatorOutput> {
    if s.cols() < 2 {
        return Err(Error::ColumnCount {
            expected: "at least 2".into(),
            got: s.cols(),
        });
    }
    let centred = centred_columns(s);
    let cols: Vec<&[f64]> = centred.iter().map(Vec::as_slice).collect();
    Ok(output(s, mean_row_product(&cols, s.rows())))
}

/// The six centred pair products `P_ij`, ordered (01, 02, 03, 12, 13, 23).
fn pair_products(centred: &[Vec<f64>], rows: usize) -> [f64; 6] {
    let mut out = [0.0; 6];
    let mut idx = 0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            out[idx] = mean_row_product(&[&centred[i], &centred[j]], rows);
            idx += 1;
        }
    }
    out
}

/// `S_2`: average of the six centred pair products of a four-column sample.
pub fn pair_statistic_s2(s: &MultiColumnSample) -> Result<f64> {
    require_cols(s, 4)?;
    let centred = centred_columns(s);
    let p = pair_products(&centred, s.rows());
    Ok(p.iter().sum::<f64>() / 6.0)
}

/// `N^2 / ((N-1)(N-2)) * Z_3`, unbiased for the third central moment.
pub fn corrected_z3(s: &MultiColumnSample) -> Result<EstimatorOutput> {
    require_cols(s, 3)?;
    require_rows_above(s, 2)?;
    let n = s.rows() as f64;
    let z3 = central_moment(s)?.value;
    Ok(output(s, n * n / ((n - 1.0) * (n - 2.0)) * z3))
}

/// `N^2 / ((N-1)(N-2)(N-3)) * ((N+1) Z_4 - 3 (N-1) S_2^2)`.
///
/// This is the published fourth-moment correction. Its coefficients are
/// those of the fourth k-statistic, so with noise-free columns it estimates
/// the fourth cumulant `mu_4 - 3 mu_2^2` rather than `mu_4`, and inner noise
/// adds further bias through the squared overlapping pairs in `S_2^2`. Use
/// [`unbiased_z4`] when an unbiased estimate of the central moment is needed.
pub fn corrected_z4(s: &MultiColumnSample) -> Result<EstimatorOutput> {
    require_cols(s, 4)?;
    require_rows_above(s, 3)?;
    let n = s.rows() as f64;
    let z4 = central_moment(s)?.value;
    let s2 = pair_statistic_s2(s)?;
    let value =
        n * n / ((n - 1.0) * (n - 2.0) * (n - 3.0)) * ((n + 1.0) * z4 - 3.0 * (n - 1.0) * s2 * s2);
    Ok(output(s, value))
}

/// Unbiased estimator of the fourth central moment of `E_{X|Y}[f]`:
///
/// `N ((N^2 - 2N + 3) Z_4 - 3 (2N - 3) D) / ((N-1)(N-2)(N-3))`
///
/// with `D = (P_12 P_34 + P_13 P_24 + P_14 P_23) / 3`. Every term touches
/// each column exactly once, so conditional independence of the columns
/// reduces its expectation to the i.i.d. case, where the coefficients invert
/// the expectations of the sample fourth moment and squared variance.
pub fn unbiased_z4(s: &MultiColumnSample) -> Result<EstimatorOutput> {
    require_cols(s, 4)?;
    require_rows_above(s, 3)?;
    let n = s.rows() as f64;
    let centred = centred_columns(s);
    let cols: Vec<&[f64]> = centred.iter().map(Vec::as_slice).collect();
    let z4 = mean_row_product(&cols, s.rows());
    let p = pair_products(&centred, s.rows());
    let disjoint = (p[0] * p[5] + p[1] * p[4] + p[2] * p[3]) / 3.0;
    let value = n * ((n * n - 2.0 * n + 3.0) * z4 - 3.0 * (2.0 * n - 3.0) * disjoint)
        / ((n - 1.0) * (n - 2.0) * (n - 3.0));
    Ok(output(s, value))
}
