//! Replication experiments: repeated independent estimates at a fixed budget,
//! convergence studies over a budget grid, and equal-budget comparisons.
//!
//! Replication `r` always draws from child stream `r` of the master seed and
//! results are stored by index before any reduction, so summaries are
//! bit-identical whatever the rayon pool size.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{draw_grouped, draw_multi, draw_triple, ConditionalModel};
use crate::oracle::ReferenceMoments;
use crate::sampling::RandomStream;
use crate::stats::{
    central_moment, corrected_v, corrected_z3, corrected_z4, crude_moment, estimator_u,
    estimator_v, nested_w, sample_mean, sample_variance, stable_sum, unbiased_z4, EstimatorOutput,
    Weights,
};

pub const DEFAULT_GROUP_SIZE: usize = 2;

/// Estimator selector.
///
/// Grammar: `u`, `v:w1,w2,w3`, `v1|v2|v3`, `vc:w1,w2,w3`, `v1c|v2c|v3c`,
/// `w` or `w:nk`, `zm:m`, `z3c`, `z4c`, `z4u`, `wm:m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    U,
    V(Weights),
    CorrectedV(Weights),
    Nested { group_size: usize },
    CentralMoment(usize),
    CorrectedZ3,
    CorrectedZ4,
    UnbiasedZ4,
    CrudeMoment(usize),
}

impl Estimator {
    /// Evaluations consumed per row (per group for the nested estimator).
    pub fn row_cost(&self) -> usize {
        match *self {
            Self::U | Self::CorrectedZ3 => 3,
            Self::V(_) | Self::CorrectedV(_) => 2,
            Self::Nested { group_size } => group_size,
            Self::CentralMoment(m) | Self::CrudeMoment(m) => m,
            Self::CorrectedZ4 | Self::UnbiasedZ4 => 4,
        }
    }

    /// Smallest row (or group) count for which the estimator is defined.
    pub fn min_rows(&self) -> usize {
        match self {
            Self::U | Self::V(_) | Self::CentralMoment(_) | Self::CrudeMoment(_) => 1,
            Self::CorrectedV(_) | Self::Nested { .. } => 2,
            Self::CorrectedZ3 => 3,
            Self::CorrectedZ4 | Self::UnbiasedZ4 => 4,
        }
    }

    /// The quantity this estimator targets, when the reference holds it.
    pub fn target(&self, r: &ReferenceMoments) -> Option<f64> {
        match *self {
            Self::U | Self::V(_) | Self::CorrectedV(_) | Self::Nested { .. } => {
                Some(r.variance_of_cond_exp)
            }
            Self::CentralMoment(m) => r.central(m),
            Self::CorrectedZ3 => Some(r.third_central),
            Self::CorrectedZ4 | Self::UnbiasedZ4 => Some(r.fourth_central),
            Self::CrudeMoment(_) => None,
        }
    }

    /// Rows (or groups) available at `budget`, after checking divisibility
    /// and the estimator's minimum.
    pub fn rows_for_budget(&self, budget: usize) -> Result<usize> {
        let cost = self.row_cost();
        if budget == 0 || !budget.is_multiple_of(cost) {
            return Err(Error::IndivisibleBudget {
                budget,
                cost,
                estimator: self.to_string(),
            });
        }
        let rows = budget / cost;
        if rows < self.min_rows() {
            return Err(Error::TooFewSamples {
                needed: self.min_rows(),
                got: rows,
            });
        }
        Ok(rows)
    }

    /// One estimate at total budget `budget`.
    pub fn estimate<M: ConditionalModel + ?Sized>(
        &self,
        model: &M,
        budget: usize,
        rng: &mut RandomStream,
    ) -> Result<EstimatorOutput> {
        let rows = self.rows_for_budget(budget)?;
        match *self {
            Self::U => {
                let s = draw_triple(model, rows, rng)?;
                estimator_u(s.column(0), s.column(1), s.column(2))
            }
            Self::V(w) => {
                let s = draw_multi(model, rows, 2, rng)?;
                estimator_v(s.column(0), s.column(1), w)
            }
            Self::CorrectedV(w) => {
                let s = draw_multi(model, rows, 2, rng)?;
                corrected_v(s.column(0), s.column(1), w)
            }
            Self::Nested { group_size } => {
                let g = draw_grouped(model, &vec![group_size; rows], rng)?;
                nested_w(&g)
            }
            Self::CentralMoment(m) => central_moment(&draw_multi(model, rows, m, rng)?),
            Self::CorrectedZ3 => corrected_z3(&draw_multi(model, rows, 3, rng)?),
            Self::CorrectedZ4 => corrected_z4(&draw_multi(model, rows, 4, rng)?),
            Self::UnbiasedZ4 => unbiased_z4(&draw_multi(model, rows, 4, rng)?),
            Self::CrudeMoment(m) => crude_moment(&draw_multi(model, rows, m, rng)?),
        }
    }
}

fn preset_name(w: &Weights) -> Option<&'static str> {
    if *w == Weights::V1 {
        Some("v1")
    } else if *w == Weights::V2 {
        Some("v2")
    } else if *w == Weights::V3 {
        Some("v3")
    } else {
        None
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::U => f.write_str("u"),
            Self::V(w) => match preset_name(w) {
                Some(p) => f.write_str(p),
                None => write!(f, "v:{},{},{}", w.w1(), w.w2(), w.w3()),
            },
            Self::CorrectedV(w) => match preset_name(w) {
                Some(p) => write!(f, "{p}c"),
                None => write!(f, "vc:{},{},{}", w.w1(), w.w2(), w.w3()),
            },
            Self::Nested { group_size } => write!(f, "w:{group_size}"),
            Self::CentralMoment(m) => write!(f, "zm:{m}"),
            Self::CorrectedZ3 => f.write_str("z3c"),
            Self::CorrectedZ4 => f.write_str("z4c"),
            Self::UnbiasedZ4 => f.write_str("z4u"),
            Self::CrudeMoment(m) => write!(f, "wm:{m}"),
        }
    }
}

fn parse_weights(text: &str, whole: &str) -> Result<Weights> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::UnknownEstimator(whole.to_string()))?;
    match parts[..] {
        [w1, w2, w3] => Weights::new(w1, w2, w3),
        _ => Err(Error::UnknownEstimator(whole.to_string())),
    }
}

fn parse_order(text: &str, whole: &str, min: usize) -> Result<usize> {
    match text.trim().parse::<usize>() {
        Ok(m) if m >= min => Ok(m),
        _ => Err(Error::UnknownEstimator(whole.to_string())),
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownEstimator(s.to_string());
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head, arg) {
            ("u", None) => Ok(Self::U),
            ("v1", None) => Ok(Self::V(Weights::V1)),
            ("v2", None) => Ok(Self::V(Weights::V2)),
            ("v3", None) => Ok(Self::V(Weights::V3)),
            ("v1c", None) => Ok(Self::CorrectedV(Weights::V1)),
            ("v2c", None) => Ok(Self::CorrectedV(Weights::V2)),
            ("v3c", None) => Ok(Self::CorrectedV(Weights::V3)),
            ("v", Some(a)) => Ok(Self::V(parse_weights(a, s)?)),
            ("vc", Some(a)) => Ok(Self::CorrectedV(parse_weights(a, s)?)),
            ("w", None) => Ok(Self::Nested {
                group_size: DEFAULT_GROUP_SIZE,
            }),
            ("w", Some(a)) => Ok(Self::Nested {
                group_size: parse_order(a, s, 2)?,
            }),
            ("zm", Some(a)) => Ok(Self::CentralMoment(parse_order(a, s, 2)?)),
            ("wm", Some(a)) => Ok(Self::CrudeMoment(parse_order(a, s, 1)?)),
            ("z3c", None) => Ok(Self::CorrectedZ3),
            ("z4c", None) => Ok(Self::CorrectedZ4),
            ("z4u", None) => Ok(Self::UnbiasedZ4),
            _ => Err(unknown()),
        }
    }
}

/// One experiment: `replications` independent estimates at a fixed budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub estimator: Estimator,
    /// Total `f` evaluations per replication.
    pub budget: usize,
    pub replications: usize,
    pub seed: u64,
    /// Keep the per-replication values in the summary.
    pub retain_values: bool,
}

impl ExperimentConfig {
    pub fn new(estimator: Estimator, budget: usize, replications: usize, seed: u64) -> Self {
        Self {
            estimator,
            budget,
            replications,
            seed,
            retain_values: false,
        }
    }

    pub fn with_values(mut self) -> Self {
        self.retain_values = true;
        self
    }

    /// Checks the config and returns the row count.
    pub fn validate(&self) -> Result<usize> {
        if self.replications < 2 {
            return Err(Error::InvalidParameter(format!(
                "replications must be >= 2, got {}",
                self.replications
            )));
        }
        self.estimator.rows_for_budget(self.budget)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub estimator: String,
    pub model: String,
    pub budget: usize,
    pub rows: usize,
    pub replications: usize,
    pub mean: f64,
    pub sample_variance: f64,
    /// `sqrt(sample_variance / replications)`
    pub stderr: f64,
    pub reference: Option<f64>,
    /// Root mean square error against `reference`.
    pub rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl ReplicationSummary {
    /// `|mean - target| / stderr`; zero when both the error and the
    /// standard error vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = (self.mean - target).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.stderr
        }
    }
}

/// The raw per-replication values, in replication order.
pub fn replicate<M: ConditionalModel + ?Sized>(
    model: &M,
    cfg: &ExperimentConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let master = RandomStream::new(cfg.seed);
    (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = master.split(r as u64);
            cfg.estimator
                .estimate(model, cfg.budget, &mut rng)
                .map(|o| o.value)
        })
        .collect()
}

/// Runs `cfg.replications` independent estimates and summarises them.
/// `reference` is the exact target, when known, used for the rmse.
pub fn run_replications<M: ConditionalModel + ?Sized>(
    model: &M,
    cfg: &ExperimentConfig,
    reference: Option<f64>,
) -> Result<ReplicationSummary> {
    let rows = cfg.validate()?;
    let values = replicate(model, cfg)?;
    let mean = sample_mean(&values)?;
    let sample_variance = sample_variance(&values)?;
    let rmse = reference.map(|t| {
        (stable_sum(values.iter().map(|&v| (v - t) * (v - t))) / values.len() as f64).sqrt()
    });
    Ok(ReplicationSummary {
        estimator: cfg.estimator.to_string(),
        model: model.label().to_string(),
        budget: cfg.budget,
        rows,
        replications: cfg.replications,
        mean,
        sample_variance,
        stderr: (sample_variance / cfg.replications as f64).sqrt(),
        reference,
        rmse,
        values: cfg.retain_values.then_some(values),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    /// Budget as requested.
    pub requested_budget: usize,
    /// Budget actually spent, rounded down to a multiple of the row cost.
    pub budget: usize,
    pub rows: usize,
    pub mean: f64,
    pub sample_variance: f64,
    pub rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub estimator: String,
    pub model: String,
    pub replications: usize,
    pub points: Vec<ConvergencePoint>,
    /// Least-squares slope of `log2(variance)` against `log2(budget)`.
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares on `(log2 x, log2 y)`, every point weighted
/// equally. Returns `(slope, intercept)`.
pub fn fit_log2_slope(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::InsufficientPoints("at least 2 points".into()));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::InsufficientPoints(
            "strictly positive budgets and variances".into(),
        ));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.log2(), y.log2())).collect();
    let n = logs.len() as f64;
    let mx = stable_sum(logs.iter().map(|p| p.0)) / n;
    let my = stable_sum(logs.iter().map(|p| p.1)) / n;
    let sxx = stable_sum(logs.iter().map(|p| (p.0 - mx).powi(2)));
    let sxy = stable_sum(logs.iter().map(|p| (p.0 - mx) * (p.1 - my)));
    if sxx == 0.0 {
        return Err(Error::InsufficientPoints("distinct budgets".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Budget-grid checks: at least 4 distinct budgets spanning 3 octaves.
pub fn validate_budget_grid(budgets: &[usize]) -> Result<()> {
    let mut sorted = budgets.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != budgets.len() {
        return Err(Error::InsufficientPoints("distinct budgets".into()));
    }
    if sorted.len() < 4 {
        return Err(Error::InsufficientPoints(format!(
            "at least 4 budgets, got {}",
            sorted.len()
        )));
    }
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if lo == 0 || hi < 8 * lo {
        return Err(Error::InsufficientPoints(
            "budgets spanning at least 3 octaves".into(),
        ));
    }
    Ok(())
}

/// `min:max:factor` geometric grid, inclusive of `max` when reached.
pub fn geometric_budgets(min: usize, max: usize, factor: usize) -> Result<Vec<usize>> {
    if min == 0 || factor < 2 || max < min {
        return Err(Error::InvalidParameter(format!(
            "invalid budget grid {min}:{max}:{factor}"
        )));
    }
    let mut out = vec![];
    let mut c = min;
    while c <= max {
        out.push(c);
        match c.checked_mul(factor) {
            Some(next) => c = next,
            None => break,
        }
    }
    Ok(out)
}

/// The grid `2^10, 2^11, ..., 2^18`.
pub fn default_budgets() -> Vec<usize> {
    (10..=18).map(|k| 1usize << k).collect()
}

/// Sample variance of the estimator at each budget plus the log-log slope.
///
/// Budgets that are not multiples of the estimator's row cost are rounded
/// down; the fit uses the budget actually spent.
pub fn convergence_study<M: ConditionalModel + ?Sized>(
    model: &M,
    template: &ExperimentConfig,
    budgets: &[usize],
    reference: Option<f64>,
) -> Result<ConvergenceStudy> {
    validate_budget_grid(budgets)?;
    let cost = template.estimator.row_cost();
    let mut points = Vec::with_capacity(budgets.len());
    for &requested in budgets {
        let cfg = ExperimentConfig {
            budget: requested - requested % cost,
            retain_values: false,
            ..*template
        };
        let s = run_replications(model, &cfg, reference)?;
        points.push(ConvergencePoint {
            requested_budget: requested,
            budget: s.budget,
            rows: s.rows,
            mean: s.mean,
            sample_variance: s.sample_variance,
            rmse: s.rmse,
        });
    }
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.budget as f64, p.sample_variance))
        .collect();
    let (slope, intercept) = fit_log2_slope(&xy)?;
    Ok(ConvergenceStudy {
        estimator: template.estimator.to_string(),
        model: model.label().to_string(),
        replications: template.replications,
        points,
        slope,
        intercept,
    })
}

/// A study whose variances lie exactly on `8 / C`, for checking the fit.
pub fn synthetic_convergence(budgets: &[usize]) -> Result<ConvergenceStudy> {
    validate_budget_grid(budgets)?;
    let points: Vec<ConvergencePoint> = budgets
        .iter()
        .map(|&c| ConvergencePoint {
            requested_budget: c,
            budget: c,
            rows: c,
            mean: 0.0,
            sample_variance: 8.0 / c as f64,
            rmse: None,
        })
        .collect();
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.budget as f64, p.sample_variance))
        .collect();
    let (slope, intercept) = fit_log2_slope(&xy)?;
    Ok(ConvergenceStudy {
        estimator: "synthetic".into(),
        model: "synthetic".into(),
        replications: 0,
        points,
        slope,
        intercept,
    })
}

/// One summary per estimator, all at the same total budget and seed.
///
/// Sharing the seed means estimators with the same sample layout (for
/// example `v3c` and `w:2`) see identical draws in every replication.
pub fn equal_budget_compare<M: ConditionalModel + ?Sized>(
    model: &M,
    estimators: &[Estimator],
    budget: usize,
    replications: usize,
    seed: u64,
    reference: Option<&ReferenceMoments>,
) -> Result<Vec<ReplicationSummary>> {
    let configs: Vec<ExperimentConfig> = estimators
        .iter()
        .map(|&e| ExperimentConfig::new(e, budget, replications, seed))
        .collect();
    for cfg in &configs {
        cfg.validate()?;
    }
    configs
        .iter()
        .map(|cfg| {
            let target = reference.and_then(|r| cfg.estimator.target(r));
            run_replications(model, cfg, target)
        })
        .collect()
}
