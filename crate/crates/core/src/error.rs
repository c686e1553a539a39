use thiserror::Error;

/// Errors raised by estimators, samplers and the experiment harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("weights must sum to 1 (got {sum})")]
    InvalidWeights { sum: f64 },

    #[error("degenerate denominator: {0}")]
    Degenerate(&'static str),

    #[error("expected {expected} columns, got {got}")]
    ColumnCount { expected: String, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("budget {budget} is not divisible by the per-row cost {cost} of `{estimator}`")]
    IndivisibleBudget {
        budget: usize,
        cost: usize,
        estimator: String,
    },

    #[error("unknown model `{0}` (expected example1, example2 or example3)")]
    UnknownModel(String),

    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),

    #[error("convergence study needs {0}")]
    InsufficientPoints(String),
}

pub type Result<T> = std::result::Result<T, Error>;
