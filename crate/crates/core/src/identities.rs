//! Deterministic algebraic identities between the estimators.
//!
//! The `printed_*` functions evaluate each estimator exactly as its defining
//! formula reads (uncentred where the formula is uncentred), which is a
//! different evaluation path from the centred arithmetic in [`crate::stats`].
//! [`run_suite`] checks both paths against each other, plus the identity
//! between the nested estimator on size-2 groups and the corrected
//! generalised estimator with [`Weights::remark`] weights.

use crate::error::Result;
use crate::models::{draw_multi, BuiltinExample};
use crate::sampling::RandomStream;
use crate::stats::{
    central_moment, corrected_v, estimator_v, nested_w, stable_sum, GroupedSample,
    MultiColumnSample, Weights,
};

fn mean(x: &[f64]) -> f64 {
    stable_sum(x.iter().copied()) / x.len() as f64
}

fn mean_ab(a: &[f64], b: &[f64]) -> f64 {
    stable_sum(a.iter().zip(b).map(|(x, y)| x * y)) / a.len() as f64
}

fn mean_centred_product(a: &[f64], b: &[f64], ca: f64, cb: f64) -> f64 {
    stable_sum(a.iter().zip(b).map(|(x, y)| (x - ca) * (y - cb))) / a.len() as f64
}

fn unbiased_var(x: &[f64]) -> f64 {
    let m = mean(x);
    stable_sum(x.iter().map(|v| (v - m) * (v - m))) / (x.len() as f64 - 1.0)
}

/// `mean(ab) - mu^2`
pub fn printed_v1(a: &[f64], b: &[f64]) -> f64 {
    let mu = mean(a);
    mean_ab(a, b) - mu * mu
}

/// `(mean(ab) - ((mu + mu')/2)^2, mean((a - h)(b - h)))` with `h = (mu + mu')/2`.
pub fn printed_v2(a: &[f64], b: &[f64]) -> (f64, f64) {
    let h = 0.5 * (mean(a) + mean(b));
    (mean_ab(a, b) - h * h, mean_centred_product(a, b, h, h))
}

/// `(mean(ab) - mu mu', mean((a - mu)(b - mu')))`
pub fn printed_v3(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (mu, mup) = (mean(a), mean(b));
    (
        mean_ab(a, b) - mu * mup,
        mean_centred_product(a, b, mu, mup),
    )
}

/// Printed corrected presets `(V1 + s^2/N, 2N/(2N-1) (V2 + (s^2+s'^2)/(4N)), N/(N-1) V3)`.
pub fn printed_corrected(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let n = a.len() as f64;
    let (s2, sp2) = (unbiased_var(a), unbiased_var(b));
    let v1 = printed_v1(a, b);
    let v2 = printed_v2(a, b).0;
    let v3 = printed_v3(a, b).0;
    (
        v1 + s2 / n,
        2.0 * n / (2.0 * n - 1.0) * (v2 + (s2 + sp2) / (4.0 * n)),
        n / (n - 1.0) * v3,
    )
}

/// `|a - b| / max(|a|, |b|)`, zero when both are zero.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityFailure {
    pub identity: &'static str,
    pub rows: usize,
    pub left: f64,
    pub right: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub samples: usize,
    pub checks: usize,
    pub worst_relative: f64,
}

/// Nested estimator on the groups `{a_n, b_n}` against the corrected
/// estimator with remark weights.
pub fn remark_pair(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let groups = a.iter().zip(b).map(|(&x, &y)| vec![x, y]).collect();
    let w = nested_w(&GroupedSample::new(groups)?)?.value;
    let v = corrected_v(a, b, Weights::remark(a.len()))?.value;
    Ok((w, v))
}

struct Checker {
    tolerance: f64,
    rows: usize,
    checks: usize,
    worst: f64,
}

impl Checker {
    fn check(
        &mut self,
        identity: &'static str,
        left: f64,
        right: f64,
    ) -> std::result::Result<(), IdentityFailure> {
        let relative = relative_difference(left, right);
        self.checks += 1;
        self.worst = self.worst.max(relative);
        if relative <= self.tolerance {
            Ok(())
        } else {
            Err(IdentityFailure {
                identity,
                rows: self.rows,
                left,
                right,
                relative,
            })
        }
    }
}

/// Checks every identity on one paired sample.
fn check_sample(
    a: &[f64],
    b: &[f64],
    v2_weights: Weights,
    checker: &mut Checker,
) -> std::result::Result<(), IdentityFailure> {
    let run = |w| estimator_v(a, b, w).map(|o| o.value).unwrap_or(f64::NAN);
    let corr = |w| corrected_v(a, b, w).map(|o| o.value).unwrap_or(f64::NAN);

    let (w, v) = remark_pair(a, b).unwrap_or((f64::NAN, f64::NAN));
    checker.check(
        "remark: nested W on pairs == corrected V with remark weights",
        w,
        v,
    )?;

    checker.check(
        "V1 preset == printed V1",
        run(Weights::V1),
        printed_v1(a, b),
    )?;
    let (v2, v2c) = printed_v2(a, b);
    checker.check("V2 preset == printed V2", run(v2_weights), v2)?;
    checker.check("V2 printed forms agree", v2, v2c)?;
    let (v3, v3c) = printed_v3(a, b);
    checker.check("V3 preset == printed V3", run(Weights::V3), v3)?;
    checker.check("V3 printed forms agree", v3, v3c)?;

    let z2 = MultiColumnSample::from_columns(vec![a.to_vec(), b.to_vec()])
        .and_then(|s| central_moment(&s))
        .map(|o| o.value)
        .unwrap_or(f64::NAN);
    checker.check("Z2 == V3", z2, run(Weights::V3))?;

    let (t1, t2, t3) = printed_corrected(a, b);
    checker.check("corrected V1 preset == printed", corr(Weights::V1), t1)?;
    checker.check("corrected V2 preset == printed", corr(v2_weights), t2)?;
    checker.check("corrected V3 preset == printed", corr(Weights::V3), t3)?;
    Ok(())
}

/// Runs the identity suite on `samples` random paired samples with row
/// counts cycling through `2..=64`, drawn from the first built-in model with
/// a random affine transform so magnitudes vary between samples.
///
/// `corrupt_v2` replaces the `V2` preset by `(0.3, 0.2, 0.5)`, which must
/// make the suite fail; it exists to test the failure path.
pub fn run_suite(
    samples: usize,
    seed: u64,
    tolerance: f64,
    corrupt_v2: bool,
) -> std::result::Result<SuiteReport, IdentityFailure> {
    let v2_weights = if corrupt_v2 {
        Weights::new(0.3, 0.2, 0.5).expect("sums to one")
    } else {
        Weights::V2
    };
    let mut rng = RandomStream::new(seed);
    let mut checker = Checker {
        tolerance,
        rows: 0,
        checks: 0,
        worst: 0.0,
    };
    for i in 0..samples {
        let rows = 2 + i % 63;
        let s = draw_multi(&BuiltinExample::Example1, rows, 2, &mut rng)
            .expect("built-in model draws are valid");
        let shift = 4.0 * rng.next_uniform() - 2.0;
        let scale = 0.1 + 10.0 * rng.next_uniform();
        let a: Vec<f64> = s.column(0).iter().map(|x| shift + scale * x).collect();
        let b: Vec<f64> = s.column(1).iter().map(|x| shift + scale * x).collect();
        checker.rows = rows;
        check_sample(&a, &b, v2_weights, &mut checker)?;
    }
    Ok(SuiteReport {
        samples,
        checks: checker.checks,
        worst_relative: checker.worst,
    })
}
