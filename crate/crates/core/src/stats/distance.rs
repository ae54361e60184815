//! Distances between an empirical law and `N(0,1)`, plus sample moments.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::rng;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `sup_x |F_n(x) − Φ(x)|`.
pub fn ks_to_standard_normal(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    Ok(ks_sorted(&xs))
}

/// KS distance for samples that are already sorted ascending.
pub fn ks_sorted(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < xs.len() {
        // ties jump together
        let mut j = i;
        while j + 1 < xs.len() && xs[j + 1] == xs[i] {
            j += 1;
        }
        let f = normal_cdf(xs[i]);
        d = d.max(f - i as f64 / n).max((j + 1) as f64 / n - f);
        i = j + 1;
    }
    d
}

pub const TV_MIN_SAMPLES: usize = 200;
const TV_LO: f64 = -6.0;
const TV_HI: f64 = 6.0;
const TV_MAX_STEP: f64 = 0.005;

/// Silverman's rule-of-thumb bandwidth, floored at 1e-3.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (xs.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        xs[lo] + (pos - lo as f64) * (xs[hi] - xs[lo])
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    (0.9 * spread * n.powf(-0.2)).max(1e-3)
}

/// `½∫_{−6}^{6} |f̂ − φ|` with `f̂` a Gaussian KDE at Silverman bandwidth.
pub fn tv_proxy(samples: &[f64]) -> Result<f64> {
    if samples.len() < TV_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: TV_MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let h = silverman_bandwidth(samples);
    let n = samples.len() as f64;
    let step = TV_MAX_STEP.min(0.25 * h);
    // linear binning onto a fine grid extended by the kernel reach
    let reach = 7.0 * h;
    let lo = TV_LO - reach;
    let bins = ((TV_HI + reach - lo) / step).ceil() as usize + 1;
    let mut counts = vec![0.0; bins];
    for &x in samples {
        let pos = (x - lo) / step;
        if pos < 0.0 || pos >= (bins - 1) as f64 {
            continue;
        }
        let k = pos.floor() as usize;
        let frac = pos - k as f64;
        counts[k] += 1.0 - frac;
        counts[k + 1] += frac;
    }
    let half = (reach / step).ceil() as usize;
    let weights: Vec<f64> = (0..=half)
        .map(|k| normal_pdf(k as f64 * step / h) / (n * h))
        .collect();
    let first = ((TV_LO - lo) / step).round() as usize;
    let last = ((TV_HI - lo) / step).round() as usize;
    let mut total = 0.0;
    for g in first..=last {
        let a = g.saturating_sub(half);
        let b = (g + half).min(bins - 1);
        let mut f = 0.0;
        for (k, c) in counts[a..=b].iter().enumerate() {
            if *c != 0.0 {
                f += c * weights[(a + k).abs_diff(g)];
            }
        }
        let x = lo + g as f64 * step;
        let w = if g == first || g == last { 0.5 } else { 1.0 };
        total += w * (f - normal_pdf(x)).abs();
    }
    Ok((0.5 * total * step).clamp(0.0, 1.0))
}

/// Mean and standard deviation of the KS distance of `n` exact `N(0,1)`
/// draws, by simulation.
pub fn gaussian_ks_baseline(n: usize, draws: usize, seed: u64) -> Result<(f64, f64)> {
    if n == 0 || draws < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: draws.min(n) });
    }
    let mut stats = Vec::with_capacity(draws);
    for k in 0..draws {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(rng::replica_seed(seed, k as u64));
        let mut xs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
        xs.sort_by(f64::total_cmp);
        stats.push(ks_sorted(&xs));
    }
    let m = stats.iter().sum::<f64>() / draws as f64;
    let v = stats.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (draws - 1) as f64;
    Ok((m, v.sqrt()))
}

/// Sample skewness and excess kurtosis with their normal-theory standard
/// errors `√(6/n)` and `√(24/n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeMoments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub skewness_se: f64,
    pub excess_kurtosis: f64,
    pub kurtosis_se: f64,
}

pub fn shape_moments(samples: &[f64]) -> Result<ShapeMoments> {
    if samples.len() < 4 {
        return Err(Error::TooFewSamples { needed: 4, got: samples.len() });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok(ShapeMoments {
        mean,
        variance: m2 * n / (n - 1.0),
        skewness: m3 / m2.powf(1.5),
        skewness_se: (6.0 / n).sqrt(),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
        kurtosis_se: (24.0 / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn ks_single_point() {
        assert_eq!(ks_to_standard_normal(&[0.0]).unwrap(), 0.5);
        assert!(ks_to_standard_normal(&[]).is_err());
    }

    #[test]
    fn ks_stratified_quantiles() {
        let n = 1000;
        let normal = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (1..=n)
            .map(|i| normal.inverse_cdf((i as f64 - 0.5) / n as f64))
            .collect();
        let d = ks_to_standard_normal(&xs).unwrap();
        assert!((d - 0.0005).abs() < 1e-9, "{d}");
    }

    #[test]
    fn ks_far_shift() {
        let xs: Vec<f64> = (0..500).map(|i| 10.0 + i as f64 * 1e-3).collect();
        let d = ks_to_standard_normal(&xs).unwrap();
        assert!(d > 1.0 - 1e-9);
    }

    #[test]
    fn tv_proxy_normal_and_degenerate() {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut r)).collect();
        let tv = tv_proxy(&xs).unwrap();
        assert!(tv <= 0.05, "{tv}");
        assert!(tv >= ks_to_standard_normal(&xs).unwrap() - 0.01);
        assert!(tv_proxy(&vec![0.0; 500]).unwrap() >= 0.9);
        assert!(matches!(tv_proxy(&[0.0; 10]), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn tv_proxy_dominates_ks_on_skewed_samples() {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for shape in [0.5f64, 2.0, 8.0] {
            let g = rand_distr::Gamma::new(shape, 1.0).unwrap();
            let xs: Vec<f64> = (0..4000)
                .map(|_| (g.sample(&mut r) - shape) / shape.sqrt())
                .collect();
            let tv = tv_proxy(&xs).unwrap();
            let ks = ks_to_standard_normal(&xs).unwrap();
            assert!(tv >= ks - 0.01, "shape {shape}: tv {tv} ks {ks}");
        }
    }

    #[test]
    fn baseline_matches_asymptotic_mean() {
        let (m, sd) = gaussian_ks_baseline(2000, 400, 3).unwrap();
        // E[√n·D_n] → √(π/2)·ln 2 ≈ 0.8687
        assert!((m * 2000f64.sqrt() - 0.8687).abs() < 0.06, "{m}");
        assert!(sd > 0.0);
    }

    #[test]
    fn moments_of_normal_sample() {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..20_000).map(|_| StandardNormal.sample(&mut r)).collect();
        let m = shape_moments(&xs).unwrap();
        assert!(m.skewness.abs() < 4.0 * m.skewness_se);
        assert!(m.excess_kurtosis.abs() < 4.0 * m.kurtosis_se);
        assert!(matches!(shape_moments(&[1.0; 10]), Err(Error::DegenerateVariance)));
    }

    proptest! {
        #[test]
        fn ks_idempotent_under_duplication(xs in prop::collection::vec(-5.0f64..5.0, 2..60)) {
            let mut doubled = xs.clone();
            doubled.extend_from_slice(&xs);
            let a = ks_to_standard_normal(&xs).unwrap();
            let b = ks_to_standard_normal(&doubled).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
