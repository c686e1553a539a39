//! Seedable random streams and the variate generators used by the built-in
//! models.
//!
//! [`RandomStream`] wraps xoshiro256++ (period `2^256 - 1`). Child streams are
//! derived from `(seed, index)` by SplitMix64 mixing, so replication `r` of an
//! experiment always sees the same stream no matter which thread runs it or
//! in which order replications are scheduled.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A single-owner pseudo-random stream.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    rng: Xoshiro256PlusPlus,
    spare_normal: Option<f64>,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream number `index`. Depends only on `(self.seed(), index)`,
    /// never on how much of this stream has been consumed.
    pub fn split(&self, index: u64) -> RandomStream {
        RandomStream::new(splitmix64(self.seed ^ splitmix64(index)))
    }

    /// A fresh stream seeded from the next output of this one. Used by the
    /// sample builders so that consecutive draws from one caller stream are
    /// independent.
    pub fn fork(&mut self) -> RandomStream {
        RandomStream::new(self.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by the Marsaglia polar method; the second variate of
    /// each accepted pair is kept for the next call.
    pub fn next_standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.next_uniform() - 1.0;
            let v = 2.0 * self.next_uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * factor);
                return u * factor;
            }
        }
    }
}

/// Normal draw parameterised by mean and *variance*.
pub fn sample_normal(mean: f64, variance: f64, rng: &mut RandomStream) -> Result<f64> {
    if !(variance.is_finite() && variance >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "normal variance must be finite and >= 0, got {variance}"
        )));
    }
    if variance == 0.0 {
        return Ok(mean);
    }
    Ok(mean + variance.sqrt() * rng.next_standard_normal())
}

/// Unit-scale Gamma draw.
///
/// Marsaglia–Tsang squeeze/rejection for `shape >= 1`; for `shape < 1` a
/// `Gamma(shape + 1)` draw is scaled by `U^(1/shape)`.
pub fn sample_gamma(shape: f64, rng: &mut RandomStream) -> Result<f64> {
    if !(shape.is_finite() && shape > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma shape must be finite and > 0, got {shape}"
        )));
    }
    if shape < 1.0 {
        let g = marsaglia_tsang(shape + 1.0, rng);
        let u = 1.0 - rng.next_uniform();
        return Ok(g * u.powf(1.0 / shape));
    }
    Ok(marsaglia_tsang(shape, rng))
}

fn marsaglia_tsang(shape: f64, rng: &mut RandomStream) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let (x, v) = loop {
            let x = rng.next_standard_normal();
            let v = 1.0 + c * x;
            if v > 0.0 {
                break (x, v * v * v);
            }
        };
        let u = rng.next_uniform();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u > 0.0 && u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Beta draw as `G1 / (G1 + G2)` with independent unit Gammas.
pub fn sample_beta(alpha: f64, beta: f64, rng: &mut RandomStream) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beta parameters must be > 0, got ({alpha}, {beta})"
        )));
    }
    let g1 = sample_gamma(alpha, rng)?;
    let g2 = sample_gamma(beta, rng)?;
    Ok(g1 / (g1 + g2))
}

/// Exponential draw with the given rate, `-ln(1 - U) / rate`.
pub fn sample_exponential(rate: f64, rng: &mut RandomStream) -> Result<f64> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "exponential rate must be finite and > 0, got {rate}"
        )));
    }
    Ok(-(1.0 - rng.next_uniform()).ln() / rate)
}
