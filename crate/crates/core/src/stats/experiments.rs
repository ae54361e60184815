//! Monte Carlo experiments on spatial averages: Gaussian fluctuations of
//! `F_R(t)`, their covariance across times, increment scaling in time and
//! the decay of ergodic averages.
//!
//! All radii of one experiment share a single grid sized for the largest
//! radius, and every replica contributes to every radius.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::averaging::{BallWeights, Probe};
use crate::error::{Error, Result};
use crate::fft::FieldFft;
use crate::grid::Grid;
use crate::kernels::SpatialKernel;
use crate::rng;
use crate::sigma::SigmaSpec;
use crate::stats::distance::{gaussian_ks_baseline, ks_sorted, ks_to_standard_normal, shape_moments, tv_proxy};
use crate::stats::farm::ReplicaFarm;
use crate::stats::fit::{bootstrap_indices, std_dev, RateFit, BOOTSTRAP_RESAMPLES};
use crate::stats::report::{CltReport, RadiusRecord};
use crate::waveprop::average_covariance_oracle;

pub const MIN_REPLICAS: usize = 200;
const BASELINE_DRAWS: usize = 200;

/// Space and time steps of the spectral solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub dx: f64,
    pub dt: f64,
}

/// Volume of the unit ball.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => 2.0,
        _ => std::f64::consts::PI,
    }
}

fn check_replicas(replicas: usize) -> Result<()> {
    if replicas < MIN_REPLICAS {
        return Err(Error::InsufficientReplicas {
            needed: MIN_REPLICAS,
            got: replicas,
        });
    }
    Ok(())
}

fn check_radii(r_list: &[f64]) -> Result<f64> {
    if r_list.is_empty() || r_list.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidParameter("radii must be positive and non-empty".into()));
    }
    Ok(r_list.iter().copied().fold(0.0, f64::max))
}

/// Time index of `t` on the grid, or an error if `t` is not a grid time.
pub fn time_index(grid: &Grid, t: f64) -> Result<usize> {
    let k = (t / grid.dt()).round();
    if (k * grid.dt() - t).abs() > 1e-9 * t.max(1.0) || k < 0.0 || k as usize > grid.n_steps() {
        return Err(Error::InvalidParameter(format!(
            "time {t} is not on the grid (dt = {})",
            grid.dt()
        )));
    }
    Ok(k as usize)
}

/// `F_R(t)` for every replica and radius: `out[replica][radius]`.
pub fn simulate_averages(
    kernel: &SpatialKernel,
    sigma: &SigmaSpec,
    t: f64,
    r_list: &[f64],
    replicas: usize,
    base_seed: u64,
    res: Resolution,
) -> Result<(Grid, Vec<Vec<f64>>)> {
    let r_max = check_radii(r_list)?;
    let grid = Grid::auto(kernel, r_max, t, res.dx, res.dt)?;
    let weights: Vec<BallWeights> = r_list
        .iter()
        .map(|&r| BallWeights::checked(&grid, kernel, r))
        .collect::<Result<_>>()?;
    let farm = ReplicaFarm::new(kernel, sigma, &grid)?;
    let rows = farm.run(replicas, base_seed, &[grid.n_steps()], |_, u| {
        weights.iter().map(|w| w.centered_integral(u)).collect::<Vec<f64>>()
    })?;
    Ok((grid, rows.into_iter().map(|mut r| r.pop().expect("one time")).collect()))
}

fn column(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k]).collect()
}

/// Second moment with known mean zero.
fn second_moment(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64
}

fn standardised_ks(xs: &[f64], buf: &mut Vec<f64>) -> f64 {
    let s = second_moment(xs).sqrt();
    buf.clear();
    buf.extend(xs.iter().map(|x| x / s));
    buf.sort_by(f64::total_cmp);
    ks_sorted(buf)
}

/// Normal approximation of `F_R(t)/σ_R` across radii.
pub fn clt_experiment(
    kernel: &SpatialKernel,
    sigma: &SigmaSpec,
    t: f64,
    r_list: &[f64],
    replicas: usize,
    base_seed: u64,
    res: Resolution,
) -> Result<CltReport> {
    check_replicas(replicas)?;
    let (_, rows) = simulate_averages(kernel, sigma, t, r_list, replicas, base_seed, res)?;
    clt_report_from_samples(kernel, sigma, t, r_list, &rows, base_seed)
}

/// Assemble a [`CltReport`] from `F_R(t)` samples `rows[replica][radius]`.
pub fn clt_report_from_samples(
    kernel: &SpatialKernel,
    sigma: &SigmaSpec,
    t: f64,
    r_list: &[f64],
    rows: &[Vec<f64>],
    base_seed: u64,
) -> Result<CltReport> {
    let d = kernel.dim();
    let n = rows.len();
    check_replicas(n)?;
    let mut records = Vec::with_capacity(r_list.len());
    let mut ks = Vec::new();
    let mut tv = Vec::new();
    let mut buf = Vec::with_capacity(n);
    for (k, &r) in r_list.iter().enumerate() {
        let xs = column(rows, k);
        let sigma2 = second_moment(&xs);
        if !(sigma2 > 0.0) {
            return Err(Error::DegenerateVariance);
        }
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let sigma2_se = std_dev(&sq) / (n as f64).sqrt();
        let z: Vec<f64> = xs.iter().map(|x| x / sigma2.sqrt()).collect();
        let ks_r = standardised_ks(&xs, &mut buf);
        let tv_r = tv_proxy(&z)?;
        let shape = shape_moments(&xs)?;
        ks.push(ks_r);
        tv.push(tv_r);
        records.push(RadiusRecord {
            r,
            n,
            sigma2,
            sigma2_se,
            ks: ks_r,
            tv_proxy: tv_r,
            skewness: shape.skewness,
            excess_kurtosis: shape.excess_kurtosis,
            mean_variance: shape.variance / r.powi(2 * d as i32),
        });
    }
    // replicas are shared across radii, so resample them jointly
    let idx = bootstrap_indices(n, BOOTSTRAP_RESAMPLES, rng::mix64(base_seed ^ 0xb007));
    let mut ks_reps = Vec::with_capacity(idx.len());
    let mut tv_reps = Vec::with_capacity(idx.len());
    let mut col = vec![0.0; n];
    for ids in &idx {
        let mut kr = Vec::with_capacity(r_list.len());
        let mut tr = Vec::with_capacity(r_list.len());
        for k in 0..r_list.len() {
            for (dst, &i) in col.iter_mut().zip(ids) {
                *dst = rows[i][k];
            }
            kr.push(standardised_ks(&col, &mut buf));
            let s = second_moment(&col).sqrt();
            let z: Vec<f64> = col.iter().map(|x| x / s).collect();
            tr.push(tv_proxy(&z)?);
        }
        ks_reps.push(kr);
        tv_reps.push(tr);
    }
    let (slope, slope_se, r_squared, tv_slope, tv_slope_se) = if r_list.len() >= 3 {
        let kf = RateFit::from_bootstrap(r_list, &ks, &ks_reps)?;
        let tf = RateFit::from_bootstrap(r_list, &tv, &tv_reps)?;
        (kf.slope, kf.stderr, kf.r_squared, tf.slope, tf.stderr)
    } else {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    };
    let (ks_baseline, ks_baseline_sd) = gaussian_ks_baseline(n, BASELINE_DRAWS, rng::mix64(base_seed ^ 0xba5e))?;
    let limit_variance_target = sigma
        .constant_value()
        .map(|c| unit_ball_volume(d) * c * c * kernel.l1_norm() * t.powi(3) / 3.0);
    let last = records.last().expect("non-empty radii");
    let limit_variance_estimate = last.sigma2 / last.r.powi(d as i32);
    Ok(CltReport {
        dim: d,
        t,
        records,
        slope,
        slope_se,
        r_squared,
        tv_slope,
        tv_slope_se,
        ks_baseline,
        ks_baseline_sd,
        limit_variance_target,
        limit_variance_estimate,
    })
}

/// How to evaluate `ω_d ∫ Cov(u(t1,ξ), u(t2,0)) dξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum CovarianceMode {
    /// `ω_d c² ‖γ‖₁ ∫_0^{t1∧t2} (t1−s)(t2−s) ds`, for σ ≡ c only.
    AdditiveClosedForm,
    /// Spatial quadrature of the empirical covariance of the periodic field.
    MonteCarlo {
        replicas: usize,
        base_seed: u64,
        resolution: Resolution,
    },
}

/// Limit of `R^{-d} Cov(F_R(t1), F_R(t2))`. Monte Carlo mode also
/// returns a standard error; closed form returns zero for it.
pub fn limit_covariance_target(
    kernel: &SpatialKernel,
    sigma: &SigmaSpec,
    t1: f64,
    t2: f64,
    mode: CovarianceMode,
) -> Result<(f64, f64)> {
    if !(t1 >= 0.0) || !(t2 >= 0.0) {
        return Err(Error::InvalidParameter("times must be nonnegative".into()));
    }
    let d = kernel.dim();
    match mode {
        CovarianceMode::AdditiveClosedForm => {
            let c = sigma.constant_value().ok_or(Error::ModeMismatch)?;
            let a = t1.min(t2);
            let time = t1 * t2 * a - 0.5 * (t1 + t2) * a * a + a.powi(3) / 3.0;
            Ok((unit_ball_volume(d) * c * c * kernel.l1_norm() * time, 0.0))
        }
        CovarianceMode::MonteCarlo {
            replicas,
            base_seed,
            resolution,
        } => {
            if t1 == 0.0 || t2 == 0.0 {
                return Ok((0.0, 0.0));
            }
            check_replicas(replicas)?;
            integrated_covariance_mc(kernel, sigma, t1, t2, replicas, base_seed, resolution)
        }
    }
}

fn integrated_covariance_mc(
    kernel: &SpatialKernel,
    sigma: &SigmaSpec,
    t1: f64,
    t2: f64,
    replicas: usize,
    base_seed: u64,
    res: Resolution,
) -> Result<(f64, f64)> {
    // covariance vanishes beyond the two light cones plus the kernel range
    let window = t1 + t2 + kernel.effective_range();
    let tmax = t1.max(t2);
    let grid = Grid::auto(kernel, window, tmax, res.dx, res.dt)?;
    let (i1, i2) = (time_index(&grid, t1)?, time_index(&grid, t2)?);
    let farm = ReplicaFarm::new(kernel, sigma, &grid)?;
    let fft = FieldFft::new(grid.dim(), grid.n());
    let len = grid.len();
    let offsets: Vec<usize> = (0..len)
        .filter(|&j| grid.wrapped_distance(j, 0) <= window)
        .collect();
    let scale = unit_ball_volume(grid.dim()) * grid.cell_volume() / (len as f64 * len as f64);
    let values = farm.run_snapshots(replicas, base_seed, &[i1, i2], |slices| {
        use rustfft::num_complex::Complex64;
        let mut scratch = fft.scratch();
        let mut a: Vec<Complex64> = slices[0].iter().map(|v| Complex64::new(v - 1.0, 0.0)).collect();
        let mut b: Vec<Complex64> = slices[1].iter().map(|v| Complex64::new(v - 1.0, 0.0)).collect();
        fft.forward(&mut a, &mut scratch);
        fft.forward(&mut b, &mut scratch);
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= y.conj();
        }
        fft.inverse(&mut a, &mut scratch);
        // a[j] = Σ_i v1(x_i + ξ_j) v2(x_i) · N
        offsets.iter().map(|&j| a[j].re).sum::<f64>() * scale
    })?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok((mean, std_dev(&values) / n.sqrt()))
}

/// Finite-dimensional distribution check of `R^{-d/2} F_R(t_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FddReport {
    pub t_list: Vec<f64>,
    pub r: f64,
    pub n: usize,
    pub empirical: Vec<Vec<f64>>,
    pub standard_errors: Vec<Vec<f64>>,
    pub target: Vec<Vec<f64>>,
    pub max_z: f64,
    pub projection_ks: Vec<f64>,
}

/// Target matrix used by [`fdd_check`]: the finite-R φ-quadrature value for
/// constant σ in d = 1, the closed-form limit for constant σ in d = 2, and
/// a Monte Carlo limit otherwise.
pub fn fdd_target(
    kernel: &SpatialKernel,
    sigma: &SigmaSpec,
    t_list: &[f64],
    r: f64,
    replicas: usize,
    base_seed: u64,
    res: Resolution,
) -> Result<Vec<Vec<f64>>> {
    let k = t_list.len();
    let mut target = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let v = match (sigma.constant_value(), kernel.dim()) {
                (Some(c), 1) => {
                    average_covariance_oracle(kernel, c, t_list[i], t_list[j], r, 0.25 * res.dx.min(0.02))? / r
                }
                (Some(_), _) => {
                    limit_covariance_target(kernel, sigma, t_list[i], t_list[j], CovarianceMode::AdditiveClosedForm)?.0
                }
                (None, _) => {
                    limit_covariance_target(
                        kernel,
                        sigma,
                        t_list[i],
                        t_list[j],
                        CovarianceMode::MonteCarlo {
                            replicas,
                            base_seed: rng::mix64(base_seed ^ 0xc0f),
                            resolution: res,
                        },
                    )?
                    .0
                }
            };
            target[i][j] = v;
            target[j][i] = v;
        }
    }
    Ok(target)
}

#[allow(clippy::too_many_arguments)]
pub fn fdd_check(
    kernel: &SpatialKernel,
    sigma: &SigmaSpec,
    t_list: &[f64],
    r: f64,
    replicas: usize,
    base_seed: u64,
    res: Resolution,
    target: Option<Vec<Vec<f64>>>,
) -> Result<FddReport> {
    if !(2..=5).contains(&t_list.len()) || t_list.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidParameter("need 2 to 5 positive times".into()));
    }
    check_replicas(replicas)?;
    let d = kernel.dim();
    let tmax = t_list.iter().copied().fold(0.0, f64::max);
    let grid = Grid::auto(kernel, r, tmax, res.dx, res.dt)?;
    let idx: Vec<usize> = t_list.iter().map(|&t| time_index(&grid, t)).collect::<Result<_>>()?;
    let w = BallWeights::checked(&grid, kernel, r)?;
    let farm = ReplicaFarm::new(kernel, sigma, &grid)?;
    let norm = r.powf(-(d as f64) / 2.0);
    let rows = farm.run(replicas, base_seed, &idx, |_, u| norm * w.centered_integral(u))?;
    let k = t_list.len();
    let n = rows.len() as f64;
    let mut empirical = vec![vec![0.0; k]; k];
    let mut standard_errors = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            let prod: Vec<f64> = rows.iter().map(|x| x[i] * x[j]).collect();
            empirical[i][j] = prod.iter().sum::<f64>() / n;
            standard_errors[i][j] = std_dev(&prod) / n.sqrt();
        }
    }
    let target = match target {
        Some(t) => t,
        None => fdd_target(kernel, sigma, t_list, r, replicas, base_seed, res)?,
    };
    let mut max_z = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let se = standard_errors[i][j];
            let diff = empirical[i][j] - target[i][j];
            let z = if se > 0.0 { diff.abs() / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
            max_z = max_z.max(z);
        }
    }
    let mut dir_rng = rand_chacha::ChaCha8Rng::seed_from_u64(rng::mix64(base_seed ^ 0xd1));
    let mut projection_ks = Vec::with_capacity(4);
    for _ in 0..4 {
        let v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut dir_rng)).collect();
        let var: f64 = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| v[i] * v[j] * empirical[i][j])
            .sum();
        if !(var > 0.0) {
            return Err(Error::DegenerateVariance);
        }
        let z: Vec<f64> = rows
            .iter()
            .map(|x| x.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / var.sqrt())
            .collect();
        projection_ks.push(ks_to_standard_normal(&z)?);
    }
    Ok(FddReport {
        t_list: t_list.to_vec(),
        r,
        n: rows.len(),
        empirical,
        standard_errors,
        target,
        max_z,
        projection_ks,
    })
}

/// L² increments `‖F_R(s+h) − F_R(s)‖₂` over gaps `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub s: f64,
    pub r: f64,
    pub gaps: Vec<f64>,
    pub norms: Vec<f64>,
    pub norm_se: Vec<f64>,
    /// Fitted exponent in the gap; `r_list` holds the gaps.
    pub fit: RateFit,
}

#[allow(clippy::too_many_arguments)]
pub fn tightness_scan(
    kernel: &SpatialKernel,
    sigma: &SigmaSpec,
    s: f64,
    gaps: &[f64],
    r: f64,
    replicas: usize,
    base_seed: u64,
    res: Resolution,
) -> Result<TightnessReport> {
    if gaps.iter().any(|g| !(*g >= 0.0)) || !(s >= 0.0) {
        return Err(Error::InvalidParameter("gaps and s must be nonnegative".into()));
    }
    check_replicas(replicas)?;
    let tmax = s + gaps.iter().copied().fold(0.0, f64::max);
    let grid = Grid::auto(kernel, r, tmax.max(res.dt), res.dx, res.dt)?;
    let mut idx = vec![time_index(&grid, s)?];
    for &g in gaps {
        idx.push(time_index(&grid, s + g)?);
    }
    let w = BallWeights::checked(&grid, kernel, r)?;
    let farm = ReplicaFarm::new(kernel, sigma, &grid)?;
    let rows = farm.run(replicas, base_seed, &idx, |_, u| w.centered_integral(u))?;
    let incr: Vec<Vec<f64>> = rows
        .iter()
        .map(|x| x[1..].iter().map(|v| (v - x[0]).powi(2)).collect())
        .collect();
    let n = rows.len() as f64;
    let mut norms = Vec::new();
    let mut norm_se = Vec::new();
    for k in 0..gaps.len() {
        let sq = column(&incr, k);
        let m = sq.iter().sum::<f64>() / n;
        norms.push(m.sqrt());
        norm_se.push(if m > 0.0 { std_dev(&sq) / n.sqrt() / (2.0 * m.sqrt()) } else { 0.0 });
    }
    let positive: Vec<usize> = (0..gaps.len()).filter(|&k| gaps[k] > 0.0).collect();
    let xs: Vec<f64> = positive.iter().map(|&k| gaps[k]).collect();
    let ys: Vec<f64> = positive.iter().map(|&k| norms[k]).collect();
    let reps: Vec<Vec<f64>> = bootstrap_indices(rows.len(), BOOTSTRAP_RESAMPLES, rng::mix64(base_seed ^ 0x7167))
        .iter()
        .map(|ids| {
            positive
                .iter()
                .map(|&k| (ids.iter().map(|&i| incr[i][k]).sum::<f64>() / n).sqrt())
                .collect()
        })
        .collect();
    let fit = RateFit::from_bootstrap(&xs, &ys, &reps)?;
    Ok(TightnessReport {
        s,
        r,
        gaps: gaps.to_vec(),
        norms,
        norm_se,
        fit,
    })
}

/// Decay in R of the variance of `R^{-d}∫_{B_R} g(u(t,x)) dx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicReport {
    pub r_list: Vec<f64>,
    pub variances: Vec<f64>,
    pub fit: RateFit,
}

#[allow(clippy::too_many_arguments)]
pub fn ergodic_decay_scan(
    kernel: &SpatialKernel,
    sigma: &SigmaSpec,
    g: Probe,
    t: f64,
    r_list: &[f64],
    replicas: usize,
    base_seed: u64,
    res: Resolution,
) -> Result<ErgodicReport> {
    check_replicas(replicas)?;
    let r_max = check_radii(r_list)?;
    let grid = Grid::auto(kernel, r_max, t, res.dx, res.dt)?;
    let weights: Vec<BallWeights> = r_list
        .iter()
        .map(|&r| BallWeights::checked(&grid, kernel, r))
        .collect::<Result<_>>()?;
    let farm = ReplicaFarm::new(kernel, sigma, &grid)?;
    let rows: Vec<Vec<f64>> = farm
        .run(replicas, base_seed, &[grid.n_steps()], |_, u| {
            weights.iter().map(|w| w.probe_mean(u, g)).collect::<Vec<f64>>()
        })?
        .into_iter()
        .map(|mut r| r.pop().expect("one time"))
        .collect();
    ergodic_report_from_samples(r_list, &rows, base_seed)
}

/// Variance fit from probe means `rows[replica][radius]`.
pub fn ergodic_report_from_samples(r_list: &[f64], rows: &[Vec<f64>], base_seed: u64) -> Result<ErgodicReport> {
    let variance = |xs: &[f64]| {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    };
    let variances: Vec<f64> = (0..r_list.len()).map(|k| variance(&column(rows, k))).collect();
    if variances.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let reps: Vec<Vec<f64>> = bootstrap_indices(rows.len(), BOOTSTRAP_RESAMPLES, rng::mix64(base_seed ^ 0xe760))
        .iter()
        .map(|ids| {
            (0..r_list.len())
                .map(|k| variance(&ids.iter().map(|&i| rows[i][k]).collect::<Vec<f64>>()))
                .collect()
        })
        .collect();
    let fit = RateFit::from_bootstrap(r_list, &variances, &reps)?;
    Ok(ErgodicReport {
        r_list: r_list.to_vec(),
        variances,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;
    use crate::noise::NoiseIncrements;

    fn tri() -> SpatialKernel {
        SpatialKernel::new(KernelFamily::Triangle, 1.0, 1.0, 1).unwrap()
    }
    const RES: Resolution = Resolution { dx: 0.1, dt: 0.05 };

    #[test]
    fn closed_form_target() {
        let s = SigmaSpec::additive(1.0).unwrap();
        let (v, _) = limit_covariance_target(&tri(), &s, 1.0, 1.0, CovarianceMode::AdditiveClosedForm).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-14);
        let (z, _) = limit_covariance_target(&tri(), &s, 0.0, 1.0, CovarianceMode::AdditiveClosedForm).unwrap();
        assert_eq!(z, 0.0);
        let a = limit_covariance_target(&tri(), &s, 0.4, 1.3, CovarianceMode::AdditiveClosedForm).unwrap();
        let b = limit_covariance_target(&tri(), &s, 1.3, 0.4, CovarianceMode::AdditiveClosedForm).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            limit_covariance_target(&tri(), &SigmaSpec::identity(), 1.0, 1.0, CovarianceMode::AdditiveClosedForm),
            Err(Error::ModeMismatch)
        );
    }

    #[test]
    fn closed_form_matches_triple_integral() {
        // ω_1 ∫ Cov(u(t1,ξ),u(t2,0)) dξ = 2 ∫_0^{t1∧t2} ∫∫∫ G G γ; with ‖γ‖₁ = 1
        // and ∫G_τ = τ the spatial part integrates out
        let (t1, t2) = (0.7, 1.1);
        let n = 20_000;
        let h = t1 / n as f64;
        let brute: f64 = (0..n)
            .map(|i| {
                let s = (i as f64 + 0.5) * h;
                2.0 * (t1 - s) * (t2 - s) * h
            })
            .sum();
        let (v, _) = limit_covariance_target(
            &tri(),
            &SigmaSpec::additive(1.0).unwrap(),
            t1,
            t2,
            CovarianceMode::AdditiveClosedForm,
        )
        .unwrap();
        assert!((v - brute).abs() < 1e-8);
    }

    #[test]
    fn monte_carlo_target_tracks_closed_form() {
        let s = SigmaSpec::additive(1.0).unwrap();
        let (v, se) = limit_covariance_target(
            &tri(),
            &s,
            1.0,
            1.0,
            CovarianceMode::MonteCarlo {
                replicas: 400,
                base_seed: 3,
                resolution: RES,
            },
        )
        .unwrap();
        assert!((v - 2.0 / 3.0).abs() < 4.0 * se + 0.02, "{v} ± {se}");
    }

    #[test]
    fn additive_clt_is_at_noise_floor() {
        let s = SigmaSpec::additive(1.0).unwrap();
        let rep = clt_experiment(&tri(), &s, 1.0, &[2.0, 4.0, 8.0], 400, 11, RES).unwrap();
        for r in &rep.records {
            assert!(r.sigma2 > 0.0);
            assert!(r.ks <= rep.ks_baseline + 4.0 * 0.8686 / 20.0);
        }
        assert!(rep.limit_variance_target.is_some());
    }

    #[test]
    fn replica_and_radius_validation() {
        let s = SigmaSpec::identity();
        assert!(matches!(
            clt_experiment(&tri(), &s, 1.0, &[2.0], 10, 1, RES),
            Err(Error::InsufficientReplicas { .. })
        ));
        assert!(clt_experiment(&tri(), &s, 1.0, &[], 300, 1, RES).is_err());
    }

    #[test]
    fn duplicated_times_give_rank_one() {
        let s = SigmaSpec::additive(1.0).unwrap();
        let rep = fdd_check(&tri(), &s, &[1.0, 1.0], 4.0, 200, 2, RES, Some(vec![vec![0.0; 2]; 2])).unwrap();
        let m = &rep.empirical;
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        assert!(det.abs() < 1e-10 * m[0][0] * m[1][1]);
    }

    #[test]
    fn zero_gap_has_zero_increment() {
        let rep = tightness_scan(&tri(), &SigmaSpec::identity(), 0.5, &[0.0, 0.1, 0.2, 0.4], 2.0, 200, 4, RES).unwrap();
        assert_eq!(rep.norms[0], 0.0);
        assert!(rep.norms[1] > 0.0);
        assert_eq!(rep.fit.r_list, vec![0.1, 0.2, 0.4]);
    }

    #[test]
    fn degenerate_variance_reported() {
        let rows = vec![vec![0.0; 3]; 300];
        assert_eq!(
            ergodic_report_from_samples(&[1.0, 2.0, 4.0], &rows, 0),
            Err(Error::DegenerateVariance)
        );
    }

    #[test]
    fn off_grid_time_rejected() {
        let g = Grid::auto(&tri(), 1.0, 1.0, 0.1, 0.05).unwrap();
        assert_eq!(time_index(&g, 0.5).unwrap(), 10);
        assert!(time_index(&g, 0.52).is_err());
        let _ = NoiseIncrements::zeros(g, tri());
    }
}
