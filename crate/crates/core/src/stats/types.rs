use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `N x m` matrix of `f` evaluations.
///
/// Row `n` holds `m` evaluations that all used the same outer draw `y_n`;
/// rows are independent. That pairing is a contract on the producer
/// ([`crate::models`]) and cannot be checked here. Storage is column-major so
/// each column is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiColumnSample {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MultiColumnSample {
    /// Build from `m` equally long columns.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let cols = columns.len();
        if cols == 0 {
            return Err(Error::EmptyInput);
        }
        let rows = columns[0].len();
        let mut data = Vec::with_capacity(rows * cols);
        for c in &columns {
            if c.len() != rows {
                return Err(Error::LengthMismatch {
                    left: rows,
                    right: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Self::from_column_major(rows, cols, data)
    }

    /// Build from column-major storage of length `rows * cols`.
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyInput);
        }
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: rows * cols,
                right: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i % rows,
                col: i / rows,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.rows)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.rows + row]
    }

    /// Total number of `f` evaluations held.
    pub fn evaluations(&self) -> usize {
        self.data.len()
    }
}

/// Weights `(w1, w2, w3)` of the generalised two-column estimator.
///
/// The three weights must sum to one within `1e-12`; out-of-tolerance input
/// is rejected, never renormalised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    w1: f64,
    w2: f64,
    w3: f64,
}

impl Weights {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    /// `mean(ab) - mean(a)^2`
    pub const V1: Weights = Weights {
        w1: 1.0,
        w2: 0.0,
        w3: 0.0,
    };
    /// Centred on the average of both column means.
    pub const V2: Weights = Weights {
        w1: 0.25,
        w2: 0.25,
        w3: 0.5,
    };
    /// `mean(ab) - mean(a) mean(b)`, the recommended choice.
    pub const V3: Weights = Weights {
        w1: 0.0,
        w2: 0.0,
        w3: 1.0,
    };

    pub fn new(w1: f64, w2: f64, w3: f64) -> Result<Self> {
        let sum = w1 + w2 + w3;
        if !sum.is_finite() || (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidWeights { sum });
        }
        Ok(Self { w1, w2, w3 })
    }

    /// The weights for which the corrected estimator coincides with the
    /// nested estimator on groups of size two, for `rows` rows.
    pub fn remark(rows: usize) -> Self {
        let n = rows as f64;
        let side = (n - 1.0) / (2.0 * (2.0 * n - 1.0));
        Self {
            w1: side,
            w2: side,
            w3: n / (2.0 * n - 1.0),
        }
    }

    pub fn w1(&self) -> f64 {
        self.w1
    }

    pub fn w2(&self) -> f64 {
        self.w2
    }

    pub fn w3(&self) -> f64 {
        self.w3
    }
}

/// `K` groups of evaluations; group `k` shares one outer draw `y_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSample {
    groups: Vec<Vec<f64>>,
    total: usize,
}

impl GroupedSample {
    pub fn new(groups: Vec<Vec<f64>>) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: groups.len(),
            });
        }
        if groups.iter().any(Vec::is_empty) {
            return Err(Error::EmptyInput);
        }
        for (k, g) in groups.iter().enumerate() {
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i, col: k });
            }
        }
        let total: usize = groups.iter().map(Vec::len).sum();
        if total <= groups.len() {
            return Err(Error::Degenerate("C - K must be positive"));
        }
        Ok(Self { groups, total })
    }

    pub fn groups(&self) -> &[Vec<f64>] {
        &self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// `C`, the total number of evaluations.
    pub fn total(&self) -> usize {
        self.total
    }
}

/// A single estimate together with the number of `f` evaluations it consumed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOutput {
    pub value: f64,
    pub evaluations_used: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_validation() {
        assert!(Weights::new(0.2, 0.2, 0.6).is_ok());
        assert!(Weights::new(0.5, 0.5, 0.5).is_err());
        assert!(Weights::new(1.0, 0.0, 1e-11).is_err());
        assert!(Weights::new(1.0, 0.0, 1e-13).is_ok());
        assert!(Weights::new(f64::NAN, 0.0, 1.0).is_err());
        for n in [2, 3, 10, 1000] {
            let w = Weights::remark(n);
            assert!((w.w1() + w.w2() + w.w3() - 1.0).abs() < 1e-15);
        }
        let w = Weights::remark(2);
        assert!((w.w1() - 1.0 / 6.0).abs() < 1e-16);
        assert!((w.w3() - 2.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn sample_shape_checks() {
        let s = MultiColumnSample::from_columns(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!((s.rows(), s.cols()), (2, 2));
        assert_eq!(s.column(1), &[3.0, 4.0]);
        assert_eq!(s.get(1, 0), 2.0);
        assert!(MultiColumnSample::from_columns(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(MultiColumnSample::from_columns(vec![]).is_err());
        assert_eq!(
            MultiColumnSample::from_columns(vec![vec![1.0, f64::INFINITY]]),
            Err(Error::NonFinite { row: 1, col: 0 })
        );
    }

    #[test]
    fn grouped_sample_checks() {
        assert!(GroupedSample::new(vec![vec![1.0, 2.0]]).is_err());
        assert!(GroupedSample::new(vec![vec![1.0], vec![2.0]]).is_err());
        assert!(GroupedSample::new(vec![vec![1.0], vec![]]).is_err());
        let g = GroupedSample::new(vec![vec![1.0], vec![2.0, 3.0]]).unwrap();
        assert_eq!(g.total(), 3);
    }
}
