//! Reference values for validating the fast estimators: closed forms for the
//! built-in models and a brute-force two-level (nested) Monte Carlo scheme
//! that works for any model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{BuiltinExample, ConditionalModel};
use crate::sampling::RandomStream;
use crate::stats::{stable_sum, Weights};

pub const DEFAULT_OUTER: usize = 100_000;
pub const DEFAULT_INNER: usize = 1_000;

/// `E[B^k]` for `B ~ Beta(alpha, beta)`, by the product recurrence.
pub fn beta_raw_moment(alpha: f64, beta: f64, k: u32) -> f64 {
    (0..k)
        .map(|i| (alpha + i as f64) / (alpha + beta + i as f64))
        .product()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

// Factored forms; the raw-moment binomial expansion loses a few ulps to
// cancellation.
fn beta_central_any(alpha: f64, beta: f64, m: u32) -> f64 {
    let (ab, s) = (alpha * beta, alpha + beta);
    match m {
        2 => ab / (s * s * (s + 1.0)),
        3 => 2.0 * ab * (beta - alpha) / (s.powi(3) * (s + 1.0) * (s + 2.0)),
        4 => {
            3.0 * ab * (ab * (s - 6.0) + 2.0 * s * s)
                / (s.powi(4) * (s + 1.0) * (s + 2.0) * (s + 3.0))
        }
        _ => unreachable!("checked by the caller"),
    }
}

/// Closed-form `m`-th central moment of `Beta(alpha, beta)`, `m` in 2..=4.
pub fn beta_central_moment(alpha: f64, beta: f64, m: u32) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beta parameters must be > 0, got ({alpha}, {beta})"
        )));
    }
    if !(2..=4).contains(&m) {
        return Err(Error::InvalidParameter(format!(
            "closed-form beta central moment is available for m in 2..=4, got {m}"
        )));
    }
    Ok(beta_central_any(alpha, beta, m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    ClosedForm,
    BruteForce,
}

/// Moments of `E_{X|Y}[f]` together with the two other terms of the variance
/// decomposition `Var_X[f] = Var_Y[E_{X|Y}[f]] + E_Y[Var_{X|Y}[f]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMoments {
    pub variance_of_cond_exp: f64,
    pub third_central: f64,
    pub fourth_central: f64,
    pub var_x_of_f: f64,
    pub exp_cond_var: f64,
    pub source: ReferenceSource,
    /// Standard error of `variance_of_cond_exp`; zero for closed forms.
    pub stderr: f64,
}

impl ReferenceMoments {
    /// Exact values for a built-in model. `E[X|Y] = Y` is an affine image of a
    /// `Beta(4,4)` variate, so its central moments are those of the Beta law.
    pub fn closed_form(example: BuiltinExample) -> Self {
        let a = BuiltinExample::BETA_SHAPE;
        let variance = beta_central_any(a, a, 2);
        let offset = example.outer_offset();
        let exp_cond_var = match example {
            BuiltinExample::Example1 => 0.5,
            // conditional variance y^2 in both remaining examples
            BuiltinExample::Example2 | BuiltinExample::Example3 => {
                offset * offset + 2.0 * offset * beta_raw_moment(a, a, 1) + beta_raw_moment(a, a, 2)
            }
        };
        Self {
            variance_of_cond_exp: variance,
            third_central: beta_central_any(a, a, 3),
            fourth_central: beta_central_any(a, a, 4),
            var_x_of_f: variance + exp_cond_var,
            exp_cond_var,
            source: ReferenceSource::ClosedForm,
            stderr: 0.0,
        }
    }

    /// The `m`-th central moment of the conditional expectation, if held.
    pub fn central(&self, m: usize) -> Option<f64> {
        match m {
            2 => Some(self.variance_of_cond_exp),
            3 => Some(self.third_central),
            4 => Some(self.fourth_central),
            _ => None,
        }
    }
}

/// Expectation of the uncorrected two-column estimator with weights `w` at
/// `rows` rows: `Var_Y[E] - ((w1 + w2) Var_X[f] + w3 Var_Y[E]) / N`.
pub fn expected_uncorrected_v(w: Weights, var_x: f64, var_cond: f64, rows: usize) -> f64 {
    var_cond - ((w.w1() + w.w2()) * var_x + w.w3() * var_cond) / rows as f64
}

/// Result of the naive nested scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedReference {
    pub estimate: f64,
    /// Standard error over the outer draws.
    pub stderr: f64,
    /// Leading-order bias from inner-sample noise,
    /// `C(m,2) E[(g - mu)^(m-2) sigma^2(Y)] / inner_n`, estimated from the
    /// same run. Already contained in `estimate`; it is not subtracted.
    pub inner_bias: f64,
}

struct GroupStats {
    mean: f64,
    variance: f64,
}

fn group_stats<M: ConditionalModel + ?Sized>(
    model: &M,
    outer_k: usize,
    inner_n: usize,
    rng: &mut RandomStream,
) -> Result<Vec<GroupStats>> {
    if outer_k < 2 || inner_n < 2 {
        return Err(Error::InvalidParameter(format!(
            "nested reference needs outer >= 2 and inner >= 2, got {outer_k} and {inner_n}"
        )));
    }
    let base = rng.fork();
    (0..outer_k)
        .into_par_iter()
        .map(|k| {
            let mut r = base.split(k as u64);
            let y = model.sample_outer(&mut r)?;
            let values = (0..inner_n)
                .map(|_| model.evaluate(&y, &mut r))
                .collect::<Result<Vec<f64>>>()?;
            let mean = stable_sum(values.iter().copied()) / inner_n as f64;
            let ss = stable_sum(values.iter().map(|&x| (x - mean) * (x - mean)));
            Ok(GroupStats {
                mean,
                variance: ss / (inner_n - 1) as f64,
            })
        })
        .collect()
}

fn mean_and_stderr(terms: &[f64]) -> (f64, f64) {
    let n = terms.len() as f64;
    let mean = stable_sum(terms.iter().copied()) / n;
    let var = stable_sum(terms.iter().map(|&t| (t - mean) * (t - mean))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn binomial_usize(n: usize, k: usize) -> f64 {
    binomial(n as u32, k as u32)
}

/// Naive nested estimate of the `m`-th central moment of `E_{X|Y}[f]`:
/// `outer_k` outer draws, each with `inner_n` conditional evaluations,
/// inner means centred on their grand mean.
pub fn nested_reference<M: ConditionalModel + ?Sized>(
    model: &M,
    outer_k: usize,
    inner_n: usize,
    m: usize,
    rng: &mut RandomStream,
) -> Result<NestedReference> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "moment order must be >= 2, got {m}"
        )));
    }
    let stats = group_stats(model, outer_k, inner_n, rng)?;
    Ok(nested_from_groups(&stats, inner_n, m))
}

fn nested_from_groups(stats: &[GroupStats], inner_n: usize, m: usize) -> NestedReference {
    let k = stats.len() as f64;
    let grand = stable_sum(stats.iter().map(|g| g.mean)) / k;
    let terms: Vec<f64> = stats
        .iter()
        .map(|g| (g.mean - grand).powi(m as i32))
        .collect();
    let (estimate, stderr) = mean_and_stderr(&terms);
    let bias_terms = stats
        .iter()
        .map(|g| (g.mean - grand).powi(m as i32 - 2) * g.variance);
    let inner_bias = binomial_usize(m, 2) * stable_sum(bias_terms) / k / inner_n as f64;
    NestedReference {
        estimate,
        stderr,
        inner_bias,
    }
}

/// The three decomposition terms estimated from one nested run, with the
/// residual `Var_X[f] - (Var_Y[E] + E_Y[Var])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCheck {
    /// `variance_of_cond_exp` is the unbiased ANOVA estimate (the nested
    /// estimator with equal group sizes); the third and fourth moments are
    /// the naive nested values.
    pub reference: ReferenceMoments,
    pub stderr_var_x: f64,
    pub stderr_exp_cond_var: f64,
    pub stderr_var_cond: f64,
    pub residual: f64,
    /// Root-sum-square of the three term standard errors.
    pub combined_stderr: f64,
}

pub fn decomposition_check<M: ConditionalModel + ?Sized>(
    model: &M,
    outer_k: usize,
    inner_n: usize,
    rng: &mut RandomStream,
) -> Result<DecompositionCheck> {
    let stats = group_stats(model, outer_k, inner_n, rng)?;
    Ok(decomposition_from_groups(&stats, inner_n))
}

/// [`nested_reference`] and [`decomposition_check`] from a single nested run.
pub fn nested_study<M: ConditionalModel + ?Sized>(
    model: &M,
    outer_k: usize,
    inner_n: usize,
    m: usize,
    rng: &mut RandomStream,
) -> Result<(NestedReference, DecompositionCheck)> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "moment order must be >= 2, got {m}"
        )));
    }
    let stats = group_stats(model, outer_k, inner_n, rng)?;
    Ok((
        nested_from_groups(&stats, inner_n, m),
        decomposition_from_groups(&stats, inner_n),
    ))
}

fn decomposition_from_groups(stats: &[GroupStats], inner_n: usize) -> DecompositionCheck {
    let n = inner_n as f64;
    let k = stats.len() as f64;
    let grand = stable_sum(stats.iter().map(|g| g.mean)) / k;

    // Var_X[f]: pooled sample variance of all K*n evaluations, assembled
    // from per-group sums of squares.
    let var_x_terms: Vec<f64> = stats
        .iter()
        .map(|g| ((n - 1.0) * g.variance + n * (g.mean - grand).powi(2)) / n)
        .collect();
    let var_x = stable_sum(var_x_terms.iter().copied()) * n / (k * n - 1.0);
    let (_, se_var_x) = mean_and_stderr(&var_x_terms);

    let within: Vec<f64> = stats.iter().map(|g| g.variance).collect();
    let (exp_cond_var, se_exp_cond_var) = mean_and_stderr(&within);

    // Between-group ANOVA estimate: sum d^2 / (K-1) - mean(s^2) / n.
    let between: Vec<f64> = stats
        .iter()
        .map(|g| (g.mean - grand).powi(2) - g.variance / n)
        .collect();
    let var_cond =
        stable_sum(stats.iter().map(|g| (g.mean - grand).powi(2))) / (k - 1.0) - exp_cond_var / n;
    let (_, se_var_cond) = mean_and_stderr(&between);

    let third = nested_from_groups(stats, inner_n, 3).estimate;
    let fourth = nested_from_groups(stats, inner_n, 4).estimate;

    let residual = var_x - (var_cond + exp_cond_var);
    let combined_stderr = (se_var_x.powi(2) + se_exp_cond_var.powi(2) + se_var_cond.powi(2)).sqrt();
    DecompositionCheck {
        reference: ReferenceMoments {
            variance_of_cond_exp: var_cond,
            third_central: third,
            fourth_central: fourth,
            var_x_of_f: var_x,
            exp_cond_var,
            source: ReferenceSource::BruteForce,
            stderr: se_var_cond,
        },
        stderr_var_x: se_var_x,
        stderr_exp_cond_var: se_exp_cond_var,
        stderr_var_cond: se_var_cond,
        residual,
        combined_stderr,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::FnModel;

    /// Composite Simpson integration of `(x - mean)^m` against the Beta
    /// density, independent of the raw-moment recurrence.
    fn beta_moment_by_quadrature(a: f64, b: f64, m: i32) -> f64 {
        let norm = {
            // B(a, b) for integer a, b via factorials
            let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
            fact(a as u32 - 1) * fact(b as u32 - 1) / fact((a + b) as u32 - 1)
        };
        let density = |x: f64| x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0) / norm;
        let steps = 20_000;
        let h = 1.0 / steps as f64;
        let mean_integrand = |x: f64| x * density(x);
        let simpson = |f: &dyn Fn(f64) -> f64| {
            let mut s = f(0.0) + f(1.0);
            for i in 1..steps {
                let x = i as f64 * h;
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
            }
            s * h / 3.0
        };
        let mean = simpson(&mean_integrand);
        simpson(&|x: f64| (x - mean).powi(m) * density(x))
    }

    #[test]
    fn beta_moments_match_quadrature() {
        let v = beta_central_moment(4.0, 4.0, 2).unwrap();
        assert!((v - 1.0 / 36.0).abs() < 1e-15);
        assert!((v - beta_moment_by_quadrature(4.0, 4.0, 2)).abs() < 1e-12);
        let t = beta_central_moment(4.0, 4.0, 3).unwrap();
        assert!(t.abs() < 1e-16);
        let f = beta_central_moment(4.0, 4.0, 4).unwrap();
        assert!((f - beta_moment_by_quadrature(4.0, 4.0, 4)).abs() < 1e-12);
        assert!((f - 27.0 / 11.0 / 1296.0).abs() < 1e-15);
        assert!((f - 1.89394e-3).abs() < 1e-8);
        let skewed = beta_central_moment(2.0, 5.0, 3).unwrap();
        assert!((skewed - beta_moment_by_quadrature(2.0, 5.0, 3)).abs() < 1e-12);
    }

    #[test]
    fn symmetric_beta_has_zero_third_moment() {
        for a in [0.5, 1.0, 2.5, 4.0, 10.0] {
            assert!(beta_central_moment(a, a, 3).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn beta_moment_argument_checks() {
        assert!(beta_central_moment(4.0, 4.0, 1).is_err());
        assert!(beta_central_moment(4.0, 4.0, 5).is_err());
        assert!(beta_central_moment(0.0, 4.0, 2).is_err());
    }

    #[test]
    fn closed_forms_for_examples() {
        let r1 = ReferenceMoments::closed_form(BuiltinExample::Example1);
        assert!((r1.var_x_of_f - 19.0 / 36.0).abs() < 1e-15);
        assert_eq!(r1.exp_cond_var, 0.5);
        let r2 = ReferenceMoments::closed_form(BuiltinExample::Example2);
        assert!((r2.exp_cond_var - 10.0 / 36.0).abs() < 1e-15);
        let r3 = ReferenceMoments::closed_form(BuiltinExample::Example3);
        assert!((r3.exp_cond_var - 82.0 / 36.0).abs() < 1e-14);
        for r in [r1, r2, r3] {
            assert!((r.variance_of_cond_exp - 1.0 / 36.0).abs() < 1e-15);
            assert_eq!(r.source, ReferenceSource::ClosedForm);
            assert_eq!(r.central(5), None);
        }
    }

    #[test]
    fn uncorrected_expectations() {
        let r = ReferenceMoments::closed_form(BuiltinExample::Example1);
        let e = |w| expected_uncorrected_v(w, r.var_x_of_f, r.variance_of_cond_exp, 10);
        assert!((e(Weights::V1) + 0.025).abs() < 1e-15);
        assert!(e(Weights::V2).abs() < 1e-15);
        assert!((e(Weights::V3) - 0.025).abs() < 1e-15);
        let bias = |w| (e(w) - r.variance_of_cond_exp).abs();
        assert!(bias(Weights::V3) <= bias(Weights::V2));
        assert!(bias(Weights::V2) <= bias(Weights::V1));
    }

    #[test]
    fn constant_model_gives_zero_references() {
        let m = FnModel::new(
            "constant",
            |r: &mut RandomStream| Ok(r.next_uniform()),
            |_: &f64, _: &mut RandomStream| Ok(0.0),
            |_: &f64| 3.0,
        );
        for order in 2..=4 {
            let r = nested_reference(&m, 50, 5, order, &mut RandomStream::new(1)).unwrap();
            assert_eq!((r.estimate, r.stderr, r.inner_bias), (0.0, 0.0, 0.0));
        }
        let d = decomposition_check(&m, 50, 5, &mut RandomStream::new(1)).unwrap();
        assert_eq!(d.reference.var_x_of_f, 0.0);
        assert_eq!(d.reference.exp_cond_var, 0.0);
        assert_eq!(d.reference.variance_of_cond_exp, 0.0);
        assert_eq!(d.residual, 0.0);
    }

    #[test]
    fn nested_argument_checks() {
        let ex = BuiltinExample::Example1;
        let mut rng = RandomStream::new(0);
        assert!(nested_reference(&ex, 1, 10, 2, &mut rng).is_err());
        assert!(nested_reference(&ex, 10, 1, 2, &mut rng).is_err());
        assert!(nested_reference(&ex, 10, 10, 1, &mut rng).is_err());
    }

    #[test]
    fn nested_reference_is_thread_count_independent() {
        let ex = BuiltinExample::Example2;
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let wide = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = serial.install(|| nested_reference(&ex, 500, 20, 2, &mut RandomStream::new(3)));
        let b = wide.install(|| nested_reference(&ex, 500, 20, 2, &mut RandomStream::new(3)));
        assert_eq!(a.unwrap(), b.unwrap());
    }
}
