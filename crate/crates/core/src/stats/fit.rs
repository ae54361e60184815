//! Log-log rate fits and bootstrap standard errors.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const BOOTSTRAP_RESAMPLES: usize = 200;
pub const MIN_FIT_POINTS: usize = 3;

/// Least-squares slope of `log y` against `log x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub r_list: Vec<f64>,
}

/// Ordinary least squares `y ≈ a + b x`; returns `(b, a, r²)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (b, a, r2)
}

/// Slope of `log values` against `log xs`.
pub fn loglog_slope(xs: &[f64], values: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != values.len() || xs.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: xs.len().min(values.len()),
        });
    }
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateVariance);
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    Ok(least_squares(&lx, &ly))
}

impl RateFit {
    /// Fit at the point estimates; `stderr` is the spread of the slopes
    /// fitted to bootstrap replicates of `values`.
    pub fn from_bootstrap(xs: &[f64], values: &[f64], replicate_values: &[Vec<f64>]) -> Result<Self> {
        if xs.len() < MIN_FIT_POINTS {
            return Err(Error::TooFewSamples {
                needed: MIN_FIT_POINTS,
                got: xs.len(),
            });
        }
        let (slope, intercept, r_squared) = loglog_slope(xs, values)?;
        let slopes: Vec<f64> = replicate_values
            .iter()
            .filter_map(|v| loglog_slope(xs, v).ok().map(|s| s.0))
            .collect();
        Ok(Self {
            slope,
            stderr: std_dev(&slopes),
            intercept,
            r_squared,
            r_list: xs.to_vec(),
        })
    }
}

pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Index sets for `b` bootstrap resamples of `n` items; deterministic in
/// `seed`.
pub fn bootstrap_indices(n: usize, b: usize, seed: u64) -> Vec<Vec<usize>> {
    (0..b)
        .map(|k| {
            let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(rng::replica_seed(seed, k as u64));
            (0..n).map(|_| r.random_range(0..n)).collect()
        })
        .collect()
}

/// Bootstrap standard error of `stat` over `b` resamples.
pub fn bootstrap_se<F: Fn(&[f64]) -> f64>(values: &[f64], b: usize, seed: u64, stat: F) -> f64 {
    let mut buf = vec![0.0; values.len()];
    let reps: Vec<f64> = bootstrap_indices(values.len(), b, seed)
        .into_iter()
        .map(|idx| {
            for (dst, i) in buf.iter_mut().zip(idx) {
                *dst = values[i];
            }
            stat(&buf)
        })
        .collect();
    std_dev(&reps)
}
