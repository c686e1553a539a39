//! Compensated accumulation used by every estimator in this crate.

/// Neumaier's variant of Kahan summation.
///
/// The compensation term tracks the low-order bits lost in each addition,
/// including the case where the incoming term is larger than the running
/// sum, which plain Kahan summation gets wrong.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for NeumaierSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        acc.extend(iter);
        acc
    }
}

/// Compensated sum of an iterator of terms.
pub fn stable_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    terms.into_iter().collect::<NeumaierSum>().value()
}

/// Compensated mean; the caller guarantees `count > 0`.
pub(crate) fn stable_mean_of<I: IntoIterator<Item = f64>>(terms: I, count: usize) -> f64 {
    stable_sum(terms) / count as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_small_terms_next_to_large_ones() {
        // 1 + 1e100 + 1 - 1e100 is exactly 2 in real arithmetic.
        let terms = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(terms.iter().sum::<f64>(), 0.0);
        assert_eq!(stable_sum(terms), 2.0);
    }

    #[test]
    fn long_sum_of_tenths() {
        let n = 10_000_000;
        let s = stable_sum(std::iter::repeat_n(0.1, n));
        assert!((s - 1_000_000.0).abs() < 1e-8, "{s}");
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(stable_sum(std::iter::empty()), 0.0);
    }
}
