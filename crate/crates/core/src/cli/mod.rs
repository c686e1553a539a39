//! The `pickfreeze` command-line frontend.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors
//! (bad flags, unknown labels, budgets the estimator cannot use). Output is
//! fully rendered in memory before anything is written, so a failed command
//! never leaves a partial output file behind.

pub mod output;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::Error;
use crate::harness::{
    convergence_study, default_budgets, geometric_budgets, run_replications, synthetic_convergence,
    validate_budget_grid, ConvergenceStudy, Estimator, ExperimentConfig,
};
use crate::identities;
use crate::models::BuiltinExample;
use crate::oracle::{nested_study, ReferenceMoments, DEFAULT_INNER, DEFAULT_OUTER};
use crate::sampling::RandomStream;
use output::{decimal, optional, render_csv, render_json, JsonDocument, Table};

/// Environment variable that overrides the default seed.
pub const SEED_ENV: &str = "PICKFREEZE_SEED";
const DEFAULT_SEED: &str = "20160101";

#[derive(Debug, Parser)]
#[command(
    name = "pickfreeze",
    version,
    about = "Pick-freeze estimators for moments of a conditional expectation"
)]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run independent replications of one estimator at a fixed budget.
    Estimate(EstimateArgs),
    /// Sample variance of an estimator over a budget grid, with log-log slope.
    Converge(ConvergeArgs),
    /// Nested brute-force reference values and the variance decomposition.
    Oracle(OracleArgs),
    /// Deterministic identity checks between estimator forms.
    Selfcheck(SelfcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long, value_parser = BuiltinExample::from_str)]
    pub model: BuiltinExample,
    #[arg(long, value_parser = Estimator::from_str)]
    pub estimator: Estimator,
    /// Total f-evaluations per replication.
    #[arg(long)]
    pub budget: usize,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, env = SEED_ENV, default_value = DEFAULT_SEED)]
    pub seed: u64,
    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

/// Budget list: `c1,c2,...` or `min:max:factor`.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetGrid(pub Vec<usize>);

impl FromStr for BudgetGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("invalid budget list `{s}`");
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.trim().parse::<usize>().map_err(|_| bad());
        match parts[..] {
            [list] => list
                .split(',')
                .map(num)
                .collect::<Result<Vec<_>, _>>()
                .map(BudgetGrid),
            [lo, hi, factor] => geometric_budgets(num(lo)?, num(hi)?, num(factor)?)
                .map(BudgetGrid)
                .map_err(|e| e.to_string()),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[arg(long, value_parser = BuiltinExample::from_str, required_unless_present = "selftest")]
    pub model: Option<BuiltinExample>,
    #[arg(long, value_parser = Estimator::from_str, required_unless_present = "selftest")]
    pub estimator: Option<Estimator>,
    /// Comma list or `min:max:factor` (default 1024:262144:2).
    #[arg(long, value_parser = BudgetGrid::from_str)]
    pub budgets: Option<BudgetGrid>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, env = SEED_ENV, default_value = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Fit the slope on synthetic variances 8/C instead of running a study.
    #[arg(long)]
    pub selftest: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, value_parser = BuiltinExample::from_str)]
    pub model: BuiltinExample,
    #[arg(long, default_value_t = DEFAULT_OUTER)]
    pub outer: usize,
    #[arg(long, default_value_t = DEFAULT_INNER)]
    pub inner: usize,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(2..))]
    pub moment: u32,
    #[arg(long, env = SEED_ENV, default_value = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SelfcheckArgs {
    /// Number of random paired samples.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, env = SEED_ENV, default_value = DEFAULT_SEED)]
    pub seed: u64,
    /// Relative tolerance for every identity.
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
    /// Test hook: corrupt the V2 weight preset so the suite must fail.
    #[arg(long, hide = true)]
    pub corrupt_weights: bool,
}

/// Failure of a command, mapped onto an exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("pickfreeze: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be >= 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(runtime)?;
    pool.install(|| match cli.command {
        Command::Estimate(a) => cmd_estimate(&a),
        Command::Converge(a) => cmd_converge(&a),
        Command::Oracle(a) => cmd_oracle(&a),
        Command::Selfcheck(a) => cmd_selfcheck(&a),
    })
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, bytes)
            .map_err(|e| runtime(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout().write_all(bytes).map_err(runtime),
    }
}

fn config_error(e: Error) -> CliError {
    match e {
        Error::IndivisibleBudget { .. }
        | Error::TooFewSamples { .. }
        | Error::InvalidParameter(_)
        | Error::InsufficientPoints(_)
        | Error::UnknownModel(_)
        | Error::UnknownEstimator(_)
        | Error::InvalidWeights { .. } => usage(e),
        other => runtime(other),
    }
}

#[derive(Serialize)]
struct EstimateMeta<'a> {
    run_id: &'a str,
    model: String,
    estimator: String,
    budget: usize,
    rows: usize,
    replications: usize,
    seed: u64,
}

#[derive(Serialize)]
struct OutputRecord<'a> {
    run_id: &'a str,
    model: String,
    estimator: String,
    budget: usize,
    rows: usize,
    replication: usize,
    estimate: f64,
}

fn run_id(parts: &[&dyn std::fmt::Display]) -> String {
    parts
        .iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join("/")
}

pub fn cmd_estimate(a: &EstimateArgs) -> Result<(), CliError> {
    let cfg = ExperimentConfig::new(a.estimator, a.budget, a.reps, a.seed);
    let rows = cfg.validate().map_err(config_error)?;
    let id = run_id(&[&a.model, &a.estimator, &a.budget, &a.reps, &a.seed]);
    let reference = ReferenceMoments::closed_form(a.model);
    let target = a.estimator.target(&reference);

    let mut summary = run_replications(&a.model, &cfg.with_values(), target).map_err(runtime)?;
    let values = summary.values.take().unwrap_or_default();

    let records: Vec<OutputRecord> = values
        .iter()
        .enumerate()
        .map(|(r, &v)| OutputRecord {
            run_id: &id,
            model: a.model.to_string(),
            estimator: a.estimator.to_string(),
            budget: a.budget,
            rows,
            replication: r,
            estimate: v,
        })
        .collect();

    let bytes = match a.format {
        Format::Csv => {
            let mut t = Table::new(vec![
                "run_id",
                "model",
                "estimator",
                "budget",
                "rows",
                "replication",
                "estimate",
            ]);
            for r in &records {
                t.push(vec![
                    r.run_id.to_string(),
                    r.model.clone(),
                    r.estimator.clone(),
                    r.budget.to_string(),
                    r.rows.to_string(),
                    r.replication.to_string(),
                    decimal(r.estimate),
                ]);
            }
            let mut s = Table::new(vec![
                "run_id",
                "model",
                "estimator",
                "budget",
                "rows",
                "replications",
                "mean",
                "sample_variance",
                "stderr",
                "reference",
                "rmse",
            ]);
            s.push(vec![
                id.clone(),
                summary.model.clone(),
                summary.estimator.clone(),
                summary.budget.to_string(),
                summary.rows.to_string(),
                summary.replications.to_string(),
                decimal(summary.mean),
                decimal(summary.sample_variance),
                decimal(summary.stderr),
                optional(summary.reference),
                optional(summary.rmse),
            ]);
            render_csv(&[t, s]).map_err(runtime)?
        }
        Format::Json => render_json(&JsonDocument {
            meta: EstimateMeta {
                run_id: &id,
                model: a.model.to_string(),
                estimator: a.estimator.to_string(),
                budget: a.budget,
                rows,
                replications: a.reps,
                seed: a.seed,
            },
            records: &records,
            summary: &summary,
        })
        .map_err(runtime)?,
    };
    emit(&a.out, &bytes)
}

#[derive(Serialize)]
struct ConvergeMeta {
    model: String,
    estimator: String,
    replications: usize,
    seed: Option<u64>,
    selftest: bool,
}

#[derive(Serialize)]
struct ConvergeSummary {
    points: usize,
    slope: f64,
    intercept: f64,
}

pub fn cmd_converge(a: &ConvergeArgs) -> Result<(), CliError> {
    let budgets = a
        .budgets
        .clone()
        .map(|b| b.0)
        .unwrap_or_else(default_budgets);
    validate_budget_grid(&budgets).map_err(usage)?;

    let study: ConvergenceStudy = if a.selftest {
        synthetic_convergence(&budgets).map_err(usage)?
    } else {
        let (model, estimator) = match (a.model, a.estimator) {
            (Some(m), Some(e)) => (m, e),
            _ => return Err(usage("--model and --estimator are required")),
        };
        let template = ExperimentConfig::new(estimator, 0, a.reps, a.seed);
        let cost = estimator.row_cost();
        for &b in &budgets {
            ExperimentConfig {
                budget: b - b % cost,
                ..template
            }
            .validate()
            .map_err(config_error)?;
        }
        let target = estimator.target(&ReferenceMoments::closed_form(model));
        convergence_study(&model, &template, &budgets, target).map_err(runtime)?
    };

    let bytes = match a.format {
        Format::Csv => {
            let mut t = Table::new(vec![
                "requested_budget",
                "budget",
                "rows",
                "replications",
                "mean",
                "sample_variance",
                "rmse_vs_oracle",
            ]);
            for p in &study.points {
                t.push(vec![
                    p.requested_budget.to_string(),
                    p.budget.to_string(),
                    p.rows.to_string(),
                    study.replications.to_string(),
                    decimal(p.mean),
                    decimal(p.sample_variance),
                    optional(p.rmse),
                ]);
            }
            let mut s = Table::new(vec!["model", "estimator", "points", "slope", "intercept"]);
            s.push(vec![
                study.model.clone(),
                study.estimator.clone(),
                study.points.len().to_string(),
                decimal(study.slope),
                decimal(study.intercept),
            ]);
            render_csv(&[t, s]).map_err(runtime)?
        }
        Format::Json => render_json(&JsonDocument {
            meta: ConvergeMeta {
                model: study.model.clone(),
                estimator: study.estimator.clone(),
                replications: study.replications,
                seed: (!a.selftest).then_some(a.seed),
                selftest: a.selftest,
            },
            records: &study.points,
            summary: ConvergeSummary {
                points: study.points.len(),
                slope: study.slope,
                intercept: study.intercept,
            },
        })
        .map_err(runtime)?,
    };
    emit(&a.out, &bytes)
}

#[derive(Serialize)]
struct OracleMeta {
    model: String,
    outer: usize,
    inner: usize,
    moment: u32,
    seed: u64,
}

#[derive(Serialize)]
struct OracleRecord {
    quantity: String,
    estimate: f64,
    stderr: f64,
    inner_bias: Option<f64>,
    closed_form: Option<f64>,
}

pub fn cmd_oracle(a: &OracleArgs) -> Result<(), CliError> {
    let mut rng = RandomStream::new(a.seed);
    let (nested, decomposition) =
        nested_study(&a.model, a.outer, a.inner, a.moment as usize, &mut rng)
            .map_err(config_error)?;
    let exact = ReferenceMoments::closed_form(a.model);
    let brute = decomposition.reference;

    let moment = OracleRecord {
        quantity: format!("central_moment_{}", a.moment),
        estimate: nested.estimate,
        stderr: nested.stderr,
        inner_bias: Some(nested.inner_bias),
        closed_form: exact.central(a.moment as usize),
    };
    let terms = vec![
        OracleRecord {
            quantity: "var_x_of_f".into(),
            estimate: brute.var_x_of_f,
            stderr: decomposition.stderr_var_x,
            inner_bias: None,
            closed_form: Some(exact.var_x_of_f),
        },
        OracleRecord {
            quantity: "exp_cond_var".into(),
            estimate: brute.exp_cond_var,
            stderr: decomposition.stderr_exp_cond_var,
            inner_bias: None,
            closed_form: Some(exact.exp_cond_var),
        },
        OracleRecord {
            quantity: "variance_of_cond_exp".into(),
            estimate: brute.variance_of_cond_exp,
            stderr: decomposition.stderr_var_cond,
            inner_bias: None,
            closed_form: Some(exact.variance_of_cond_exp),
        },
        OracleRecord {
            quantity: "residual".into(),
            estimate: decomposition.residual,
            stderr: decomposition.combined_stderr,
            inner_bias: None,
            closed_form: Some(0.0),
        },
    ];

    let bytes = match a.format {
        Format::Csv => {
            let mut t = Table::new(vec![
                "model",
                "quantity",
                "outer",
                "inner",
                "estimate",
                "stderr",
                "inner_bias",
                "closed_form",
            ]);
            t.push(vec![
                a.model.to_string(),
                moment.quantity.clone(),
                a.outer.to_string(),
                a.inner.to_string(),
                decimal(moment.estimate),
                decimal(moment.stderr),
                optional(moment.inner_bias),
                optional(moment.closed_form),
            ]);
            let mut d = Table::new(vec!["term", "estimate", "stderr", "closed_form"]);
            for r in &terms {
                d.push(vec![
                    r.quantity.clone(),
                    decimal(r.estimate),
                    decimal(r.stderr),
                    optional(r.closed_form),
                ]);
            }
            render_csv(&[t, d]).map_err(runtime)?
        }
        Format::Json => render_json(&JsonDocument {
            meta: OracleMeta {
                model: a.model.to_string(),
                outer: a.outer,
                inner: a.inner,
                moment: a.moment,
                seed: a.seed,
            },
            records: vec![moment],
            summary: terms,
        })
        .map_err(runtime)?,
    };
    emit(&a.out, &bytes)
}

pub fn cmd_selfcheck(a: &SelfcheckArgs) -> Result<(), CliError> {
    match identities::run_suite(a.samples, a.seed, a.tolerance, a.corrupt_weights) {
        Ok(report) => {
            println!(
                "selfcheck ok: {} identities on {} samples, worst relative difference {:e}",
                report.checks, report.samples, report.worst_relative
            );
            Ok(())
        }
        Err(f) => Err(runtime(format!(
            "identity failed: {} (N = {}, {} vs {}, relative difference {:e})",
            f.identity, f.rows, f.left, f.right, f.relative
        ))),
    }
}
