//! Conditional models `(p_Y, p_{X|Y=y}, f)` and the builders that turn them
//! into correctly paired sample matrices.
//!
//! # Draw order
//!
//! Every builder forks one child stream from the caller's stream and derives
//! sub-streams from it: index 0 feeds the outer draws, index `1 + j` feeds
//! column `j` (or the `j`-th member of every group), and two reserved indices
//! feed the independent marginal draw of [`draw_triple`]. Per row, one outer
//! draw is taken, then columns left to right. As a consequence:
//!
//! * the outer draws never depend on the number of columns, so asking for
//!   fewer columns with the same seed reproduces a prefix of the columns;
//! * `draw_grouped` with all group sizes 2 consumes exactly the draws of
//!   `draw_multi` with two columns;
//! * the first two columns of `draw_triple` equal `draw_multi` with two
//!   columns.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{sample_beta, sample_exponential, sample_normal, RandomStream};
use crate::stats::{GroupedSample, MultiColumnSample};

const OUTER_STREAM: u64 = 0;
const MARGINAL_OUTER_STREAM: u64 = u64::MAX;
const MARGINAL_INNER_STREAM: u64 = u64::MAX - 1;

fn column_stream(j: usize) -> u64 {
    1 + j as u64
}

/// A two-level model: outer law of `Y`, conditional law of `X` given `Y = y`,
/// and the output map `f`.
///
/// Implementations must be immutable; all randomness comes from the supplied
/// stream, so one model can be shared by many threads.
pub trait ConditionalModel: Sync {
    type Outer;
    type Inner;

    fn label(&self) -> &str;

    fn sample_outer(&self, rng: &mut RandomStream) -> Result<Self::Outer>;

    fn sample_inner(&self, outer: &Self::Outer, rng: &mut RandomStream) -> Result<Self::Inner>;

    fn output(&self, inner: &Self::Inner) -> f64;

    /// One evaluation `f(x)` with `x ~ p_{X|Y=y}`.
    fn evaluate(&self, outer: &Self::Outer, rng: &mut RandomStream) -> Result<f64> {
        let x = self.sample_inner(outer, rng)?;
        Ok(self.output(&x))
    }
}

/// A model assembled from closures, for programmatic registration of custom
/// models.
pub struct FnModel<O, I, F> {
    label: String,
    outer: O,
    inner: I,
    output: F,
}

impl<O, I, F> FnModel<O, I, F> {
    pub fn new(label: impl Into<String>, outer: O, inner: I, output: F) -> Self {
        Self {
            label: label.into(),
            outer,
            inner,
            output,
        }
    }
}

impl<Y, X, O, I, F> ConditionalModel for FnModel<O, I, F>
where
    O: Fn(&mut RandomStream) -> Result<Y> + Sync,
    I: Fn(&Y, &mut RandomStream) -> Result<X> + Sync,
    F: Fn(&X) -> f64 + Sync,
{
    type Outer = Y;
    type Inner = X;

    fn label(&self) -> &str {
        &self.label
    }

    fn sample_outer(&self, rng: &mut RandomStream) -> Result<Y> {
        (self.outer)(rng)
    }

    fn sample_inner(&self, outer: &Y, rng: &mut RandomStream) -> Result<X> {
        (self.inner)(outer, rng)
    }

    fn output(&self, inner: &X) -> f64 {
        (self.output)(inner)
    }
}

/// The three built-in test models, all with `f(x) = x`:
///
/// * `Example1`: `Y ~ Beta(4,4)`, `X | Y=y ~ N(y, 0.5)`
/// * `Example2`: `Y ~ Beta(4,4)`, `X | Y=y ~ N(y, y^2)`
/// * `Example3`: `Y ~ 1 + Beta(4,4)`, `X | Y=y ~ Exp(rate 1/y)`
///
/// Normal laws are given by their variance. In every case `E[X | Y] = Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinExample {
    Example1,
    Example2,
    Example3,
}

impl BuiltinExample {
    pub const ALL: [BuiltinExample; 3] = [Self::Example1, Self::Example2, Self::Example3];

    pub const BETA_SHAPE: f64 = 4.0;

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Example1 => "example1",
            Self::Example2 => "example2",
            Self::Example3 => "example3",
        }
    }

    /// Offset added to the `Beta(4,4)` outer variate.
    pub fn outer_offset(&self) -> f64 {
        match self {
            Self::Example1 | Self::Example2 => 0.0,
            Self::Example3 => 1.0,
        }
    }
}

impl fmt::Display for BuiltinExample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BuiltinExample {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(Self::Example1),
            "example2" => Ok(Self::Example2),
            "example3" => Ok(Self::Example3),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }
}

impl ConditionalModel for BuiltinExample {
    type Outer = f64;
    type Inner = f64;

    fn label(&self) -> &str {
        self.as_str()
    }

    fn sample_outer(&self, rng: &mut RandomStream) -> Result<f64> {
        let b = sample_beta(Self::BETA_SHAPE, Self::BETA_SHAPE, rng)?;
        Ok(self.outer_offset() + b)
    }

    fn sample_inner(&self, &y: &f64, rng: &mut RandomStream) -> Result<f64> {
        match self {
            Self::Example1 => sample_normal(y, 0.5, rng),
            Self::Example2 => sample_normal(y, y * y, rng),
            Self::Example3 => sample_exponential(1.0 / y, rng),
        }
    }

    fn output(&self, &x: &f64) -> f64 {
        x
    }
}

fn require_positive(name: &str, value: usize) -> Result<()> {
    if value == 0 {
        return Err(Error::InvalidParameter(format!("{name} must be >= 1")));
    }
    Ok(())
}

/// `rows x cols` pick-freeze sample: row `n` shares one outer draw `y_n`
/// across `cols` conditionally independent evaluations.
pub fn draw_multi<M: ConditionalModel + ?Sized>(
    model: &M,
    rows: usize,
    cols: usize,
    rng: &mut RandomStream,
) -> Result<MultiColumnSample> {
    require_positive("rows", rows)?;
    require_positive("cols", cols)?;
    let base = rng.fork();
    let mut outer_rng = base.split(OUTER_STREAM);
    let mut col_rngs: Vec<RandomStream> = (0..cols).map(|j| base.split(column_stream(j))).collect();

    let mut data = vec![0.0; rows * cols];
    for n in 0..rows {
        let y = model.sample_outer(&mut outer_rng)?;
        for (j, col_rng) in col_rngs.iter_mut().enumerate() {
            data[j * rows + n] = model.evaluate(&y, col_rng)?;
        }
    }
    MultiColumnSample::from_column_major(rows, cols, data)
}

/// Three-column sample for the `U` estimator: columns 0 and 1 are paired on
/// `y_n`, column 2 is evaluated at an independent outer draw `y''_n`.
pub fn draw_triple<M: ConditionalModel + ?Sized>(
    model: &M,
    rows: usize,
    rng: &mut RandomStream,
) -> Result<MultiColumnSample> {
    require_positive("rows", rows)?;
    let base = rng.fork();
    let mut outer_rng = base.split(OUTER_STREAM);
    let mut first = base.split(column_stream(0));
    let mut second = base.split(column_stream(1));
    let mut marginal_outer = base.split(MARGINAL_OUTER_STREAM);
    let mut marginal_inner = base.split(MARGINAL_INNER_STREAM);

    let mut data = vec![0.0; rows * 3];
    for n in 0..rows {
        let y = model.sample_outer(&mut outer_rng)?;
        data[n] = model.evaluate(&y, &mut first)?;
        data[rows + n] = model.evaluate(&y, &mut second)?;
        let y2 = model.sample_outer(&mut marginal_outer)?;
        data[2 * rows + n] = model.evaluate(&y2, &mut marginal_inner)?;
    }
    MultiColumnSample::from_column_major(rows, 3, data)
}

/// Nested sample: group `k` holds `group_sizes[k]` evaluations sharing one
/// outer draw `y_k`.
pub fn draw_grouped<M: ConditionalModel + ?Sized>(
    model: &M,
    group_sizes: &[usize],
    rng: &mut RandomStream,
) -> Result<GroupedSample> {
    if group_sizes.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: group_sizes.len(),
        });
    }
    if group_sizes.contains(&0) {
        return Err(Error::InvalidParameter("group sizes must be >= 1".into()));
    }
    let widest = group_sizes.iter().copied().max().unwrap_or(0);
    let base = rng.fork();
    let mut outer_rng = base.split(OUTER_STREAM);
    let mut member_rngs: Vec<RandomStream> =
        (0..widest).map(|j| base.split(column_stream(j))).collect();

    let mut groups = Vec::with_capacity(group_sizes.len());
    for &size in group_sizes {
        let y = model.sample_outer(&mut outer_rng)?;
        let group = member_rngs[..size]
            .iter_mut()
            .map(|r| model.evaluate(&y, r))
            .collect::<Result<Vec<f64>>>()?;
        groups.push(group);
    }
    GroupedSample::new(groups)
}
