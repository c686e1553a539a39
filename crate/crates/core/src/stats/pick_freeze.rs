//! Two- and three-column pick-freeze estimators of `Var_Y[E_{X|Y}[f]]`, and
//! the nested ANOVA-type estimator used as a comparator.

use super::summation::{stable_mean_of, stable_sum};
use super::types::{EstimatorOutput, GroupedSample, Weights};
use super::{sample_mean, sample_variance};
use crate::error::{Error, Result};

fn check_paired(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// `(1/N) sum a_n (b_n - c_n)`.
///
/// `a` and `b` are paired on the same outer draw, `c` is an evaluation at an
/// independent marginal draw. Unbiased; costs three evaluations per row.
pub fn estimator_u(a: &[f64], b: &[f64], c: &[f64]) -> Result<EstimatorOutput> {
    check_paired(a, b)?;
    check_paired(a, c)?;
    let n = a.len();
    let value = stable_mean_of(a.iter().zip(b).zip(c).map(|((&x, &y), &z)| x * (y - z)), n);
    Ok(EstimatorOutput {
        value,
        evaluations_used: 3 * n,
    })
}

/// Mean of centred cross products, `(1/N) sum (a_n - mean a)(b_n - mean b)`.
fn centred_cross(a: &[f64], b: &[f64], mean_a: f64, mean_b: f64) -> f64 {
    stable_mean_of(
        a.iter().zip(b).map(|(&x, &y)| (x - mean_a) * (y - mean_b)),
        a.len(),
    )
}

/// Generalised two-column estimator
/// `mean(ab) - (w1 mu^2 + w2 mu'^2 + w3 mu mu')`.
///
/// Evaluated through the equivalent centred form
/// `mean((a - mu)(b - mu')) - (mu - mu')(w1 mu - w2 mu')`, which avoids
/// subtracting two large uncentred quantities.
pub fn estimator_v(a: &[f64], b: &[f64], w: Weights) -> Result<EstimatorOutput> {
    check_paired(a, b)?;
    let mu = sample_mean(a)?;
    let mu_p = sample_mean(b)?;
    let cross = centred_cross(a, b, mu, mu_p);
    let value = cross - (mu - mu_p) * (w.w1() * mu - w.w2() * mu_p);
    Ok(EstimatorOutput {
        value,
        evaluations_used: 2 * a.len(),
    })
}

/// Bias-corrected generalised estimator
/// `N/(N - w3) * (V + (w1 s^2 + w2 s'^2)/N)`, unbiased for any valid weights.
pub fn corrected_v(a: &[f64], b: &[f64], w: Weights) -> Result<EstimatorOutput> {
    check_paired(a, b)?;
    let n = a.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    if nf - w.w3() == 0.0 {
        return Err(Error::Degenerate("w3 equals N"));
    }
    let v = estimator_v(a, b, w)?.value;
    let mut adjustment = 0.0;
    if w.w1() != 0.0 {
        adjustment += w.w1() * sample_variance(a)?;
    }
    if w.w2() != 0.0 {
        adjustment += w.w2() * sample_variance(b)?;
    }
    let value = nf / (nf - w.w3()) * (v + adjustment / nf);
    Ok(EstimatorOutput {
        value,
        evaluations_used: 2 * n,
    })
}

/// Nested estimator
/// `(SS_tau - (K-1)/(C-K) SS_eps) / (C - sum n_k^2 / C)`.
pub fn nested_w(sample: &GroupedSample) -> Result<EstimatorOutput> {
    let groups = sample.groups();
    let k = groups.len();
    let c = sample.total();
    let cf = c as f64;

    let group_means: Vec<f64> = groups
        .iter()
        .map(|g| stable_mean_of(g.iter().copied(), g.len()))
        .collect();
    let grand = stable_sum(groups.iter().flatten().copied()) / cf;

    let ss_tau = stable_sum(
        groups
            .iter()
            .zip(&group_means)
            .map(|(g, &m)| g.len() as f64 * (m - grand) * (m - grand)),
    );
    let ss_eps = stable_sum(
        groups
            .iter()
            .zip(&group_means)
            .flat_map(|(g, &m)| g.iter().map(move |&x| (x - m) * (x - m))),
    );

    let sum_sq_sizes = stable_sum(groups.iter().map(|g| (g.len() as f64).powi(2)));
    let denom = cf - sum_sq_sizes / cf;
    if denom == 0.0 {
        return Err(Error::Degenerate("C - sum n_k^2 / C is zero"));
    }
    let value = (ss_tau - (k as f64 - 1.0) / (cf - k as f64) * ss_eps) / denom;
    Ok(EstimatorOutput {
        value,
        evaluations_used: c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    // Direct transcriptions of the printed formulas, kept independent of the
    // centred evaluation path above.
    fn mean(x: &[f64]) -> f64 {
        x.iter().sum::<f64>() / x.len() as f64
    }
    fn mean_ab(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
    }
    fn var(x: &[f64]) -> f64 {
        let m = mean(x);
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
    }

    #[test]
    fn u_examples() {
        let c = [1.5; 4];
        assert_eq!(estimator_u(&c, &c, &c).unwrap().value, 0.0);
        let out = estimator_u(&[2.0], &[3.0], &[1.0]).unwrap();
        assert_eq!(out.value, 4.0);
        assert_eq!(out.evaluations_used, 3);
        assert_eq!(
            estimator_u(&[1.0, 2.0], &[2.0, 0.0], &[0.0, 2.0])
                .unwrap()
                .value,
            -1.0
        );
        assert!(estimator_u(&[1.0], &[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn v_examples() {
        let c = [0.7; 5];
        for w in [Weights::V1, Weights::V2, Weights::V3, Weights::remark(5)] {
            assert!(estimator_v(&c, &c, w).unwrap().value.abs() < 1e-15);
        }
        let a = [0.0, 2.0];
        let b = [1.0, 3.0];
        assert_eq!(estimator_v(&a, &b, Weights::V1).unwrap().value, 2.0);
        assert_eq!(estimator_v(&a, &b, Weights::V2).unwrap().value, 0.75);
        assert_eq!(estimator_v(&a, &b, Weights::V3).unwrap().value, 1.0);
        assert_eq!(
            estimator_v(&a, &b, Weights::V3).unwrap().evaluations_used,
            4
        );
        assert_eq!(estimator_v(&a, &a, Weights::V3).unwrap().value, 1.0);
        assert!(estimator_v(&a, &[1.0], Weights::V3).is_err());
    }

    #[test]
    fn corrected_v_examples() {
        let c = [0.7; 5];
        assert!(corrected_v(&c, &c, Weights::V2).unwrap().value.abs() < 1e-15);
        let a = [0.0, 2.0];
        let b = [1.0, 3.0];
        assert_eq!(corrected_v(&a, &b, Weights::V3).unwrap().value, 2.0);
        assert_eq!(corrected_v(&a, &b, Weights::V1).unwrap().value, 3.0);
        // Remark weights at N = 2 are (1/6, 1/6, 2/3).
        let w = Weights::remark(2);
        let v = corrected_v(&[0.0, 0.0], &[2.0, 2.0], w).unwrap().value;
        assert!(close(v, -1.0, 1e-14), "{v}");
        let v = corrected_v(&a, &a, w).unwrap().value;
        assert!(close(v, 2.0, 1e-14), "{v}");
    }

    #[test]
    fn corrected_v_errors() {
        assert!(matches!(
            corrected_v(&[1.0], &[1.0], Weights::V3),
            Err(Error::TooFewSamples { .. })
        ));
        // w3 = N = 2 with w1 + w2 = -1.
        let w = Weights::new(-0.5, -0.5, 2.0).unwrap();
        assert_eq!(
            corrected_v(&[0.0, 1.0], &[1.0, 0.0], w),
            Err(Error::Degenerate("w3 equals N"))
        );
    }

    #[test]
    fn nested_w_examples() {
        let g = GroupedSample::new(vec![vec![3.0, 3.0], vec![3.0, 3.0, 3.0]]).unwrap();
        assert_eq!(nested_w(&g).unwrap().value, 0.0);
        let g = GroupedSample::new(vec![vec![0.0, 2.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(nested_w(&g).unwrap().value, -1.0);
        let g = GroupedSample::new(vec![vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        let out = nested_w(&g).unwrap();
        assert_eq!(out.value, 2.0);
        assert_eq!(out.evaluations_used, 4);
    }

    #[test]
    fn nested_w_unequal_groups_by_hand() {
        // groups {1}, {2, 4}: C = 3, K = 2, grand mean 7/3
        // SS_tau = 1*(1-7/3)^2 + 2*(3-7/3)^2 = 16/9 + 8/9 = 8/3
        // SS_eps = 2, (K-1)/(C-K) = 1, denom = 3 - 5/3 = 4/3
        let g = GroupedSample::new(vec![vec![1.0], vec![2.0, 4.0]]).unwrap();
        let v = nested_w(&g).unwrap().value;
        assert!(close(v, (8.0 / 3.0 - 2.0) / (4.0 / 3.0), 1e-14), "{v}");
    }

    #[test]
    fn presets_match_printed_forms() {
        let a = [0.3, 1.7, -0.4, 2.2, 0.9, 1.1];
        let b = [0.5, 1.2, 0.1, 1.9, 0.4, 1.6];
        let (mu, mup) = (mean(&a), mean(&b));
        let ab = mean_ab(&a, &b);
        let half = 0.5 * (mu + mup);
        let v1 = ab - mu * mu;
        let v2 = ab - half * half;
        let v2_centred = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - half) * (y - half))
            .sum::<f64>()
            / a.len() as f64;
        let v3 = ab - mu * mup;
        let v3_centred = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - mu) * (y - mup))
            .sum::<f64>()
            / a.len() as f64;
        assert!(close(
            estimator_v(&a, &b, Weights::V1).unwrap().value,
            v1,
            1e-12
        ));
        assert!(close(
            estimator_v(&a, &b, Weights::V2).unwrap().value,
            v2,
            1e-12
        ));
        assert!(close(v2, v2_centred, 1e-12));
        assert!(close(
            estimator_v(&a, &b, Weights::V3).unwrap().value,
            v3,
            1e-12
        ));
        assert!(close(v3, v3_centred, 1e-12));

        let n = a.len() as f64;
        let (s2, sp2) = (var(&a), var(&b));
        let t1 = v1 + s2 / n;
        let t2 = 2.0 * n / (2.0 * n - 1.0) * (v2 + (s2 + sp2) / (4.0 * n));
        let t3 = n / (n - 1.0) * v3;
        assert!(close(
            corrected_v(&a, &b, Weights::V1).unwrap().value,
            t1,
            1e-12
        ));
        assert!(close(
            corrected_v(&a, &b, Weights::V2).unwrap().value,
            t2,
            1e-12
        ));
        assert!(close(
            corrected_v(&a, &b, Weights::V3).unwrap().value,
            t3,
            1e-12
        ));
    }
}
