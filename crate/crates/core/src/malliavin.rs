//! Noise-shift probe of the γ-smoothed Malliavin derivative
//! `D̃_{s,y}u(t,x) = ∫ D_{s,z}u(t,x) γ(z−y) dz`.
//!
//! Each replica solves twice on the same base noise, shifted by `±ε` in the
//! direction of a point mass at `(s, y)`, and takes the central difference
//! quotient.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::{self, KernelFamily, SpatialKernel};
use crate::noise::{shift_increments, NoiseIncrements, NoiseSampler};
use crate::rng::replica_seed;
use crate::sigma::SigmaSpec;
use crate::solver::{moment_from_samples, solve_mild_direct, Scheme, SpectralSolver};
use crate::waveprop::{gauss_legendre, smoothed_green};

/// One derivative probe `D̃_{s,y}u(t,x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeProbe {
    pub s_index: usize,
    pub t_index: usize,
    /// Flat grid index of `y`.
    pub y: usize,
    /// Flat grid index of `x`.
    pub x: usize,
    pub epsilon: f64,
    pub replicas: usize,
    pub p: f64,
    pub scheme: Scheme,
}

impl DerivativeProbe {
    /// Probe with the default step `ε = 1e-3·√γ(0)` on the spectral scheme.
    pub fn new(kernel: &SpatialKernel, s_index: usize, t_index: usize, y: usize, x: usize, replicas: usize, p: f64) -> Self {
        Self {
            s_index,
            t_index,
            y,
            x,
            epsilon: 1e-3 * kernel.gamma_radial(0.0).sqrt(),
            replicas,
            p,
            scheme: Scheme::Spectral,
        }
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        if self.s_index >= self.t_index {
            return Err(Error::InvalidParameter(format!(
                "need s_index < t_index, got {} and {}",
                self.s_index, self.t_index
            )));
        }
        if self.t_index > grid.n_steps() {
            return Err(Error::IndexOutOfRange {
                index: self.t_index,
                len: grid.n_steps() + 1,
            });
        }
        for idx in [self.x, self.y] {
            if idx >= grid.len() {
                return Err(Error::IndexOutOfRange { index: idx, len: grid.len() });
            }
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if self.epsilon < 1e3 * f64::EPSILON {
            return Err(Error::DegenerateEpsilon(self.epsilon));
        }
        if !(self.p >= 2.0) {
            return Err(Error::InvalidParameter("p must be >= 2".into()));
        }
        if matches!(self.scheme, Scheme::Picard(_)) {
            return Err(Error::InvalidParameter("the probe runs on spectral or mild-direct".into()));
        }
        Ok(())
    }
}

/// Monte Carlo summary of one probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeEstimate {
    /// `‖D̃‖_p` estimate and bootstrap standard error.
    pub estimate: f64,
    pub se: f64,
    /// Signed mean of the difference quotient and its standard error.
    pub mean: f64,
    pub mean_se: f64,
    /// `‖σ(u(s,y))‖_p` on the same replicas.
    pub sigma_norm: f64,
    /// Smallest quotient the difference can resolve in floating point.
    pub roundoff: f64,
    pub quotients: Vec<f64>,
}

/// Values of `u` at time indices `s` and `t`, at points `y` and `x`.
fn solve_pair(
    scheme: Scheme,
    kernel: &SpatialKernel,
    solver: &SpectralSolver,
    sigma: &SigmaSpec,
    noise: &NoiseIncrements,
    probe: &DerivativeProbe,
) -> Result<(f64, f64)> {
    match scheme {
        Scheme::MildDirect => {
            let sol = solve_mild_direct(kernel, noise.grid(), sigma, noise)?;
            Ok((sol.at(probe.s_index, probe.y), sol.at(probe.t_index, probe.x)))
        }
        _ => {
            let mut work = solver.work();
            let (mut us, mut ut) = (f64::NAN, f64::NAN);
            solver.run(
                sigma,
                noise,
                &mut work,
                |n| n == probe.s_index || n == probe.t_index,
                |n, u| {
                    if n == probe.s_index {
                        us = u[probe.y];
                    }
                    if n == probe.t_index {
                        ut = u[probe.x];
                    }
                },
            )?;
            Ok((us, ut))
        }
    }
}

/// Central-difference estimate of `‖D̃_{s,y}u(t,x)‖_p`.
pub fn smoothed_derivative(
    kernel: &SpatialKernel,
    grid: &Grid,
    sigma: &SigmaSpec,
    probe: &DerivativeProbe,
    seed: u64,
) -> Result<DerivativeEstimate> {
    let sampler = NoiseSampler::new(kernel, grid)?;
    let solver = SpectralSolver::new(grid);
    estimate_with(kernel, grid, sigma, probe, seed, &sampler, &solver)
}

fn estimate_with(
    kernel: &SpatialKernel,
    grid: &Grid,
    sigma: &SigmaSpec,
    probe: &DerivativeProbe,
    seed: u64,
    sampler: &NoiseSampler,
    solver: &SpectralSolver,
) -> Result<DerivativeEstimate> {
    probe.validate(grid)?;
    if probe.scheme == Scheme::MildDirect && grid.dim() != 1 {
        return Err(Error::DimensionUnsupported(grid.dim()));
    }
    let pairs: Vec<(f64, f64, f64)> = (0..probe.replicas)
        .into_par_iter()
        .map(|r| {
            let base = sampler.increments(replica_seed(seed, r as u64));
            let plus = shift_increments(&base, probe.s_index, probe.y, probe.epsilon)?;
            let minus = shift_increments(&base, probe.s_index, probe.y, -probe.epsilon)?;
            let (us, up) = solve_pair(probe.scheme, kernel, solver, sigma, &plus, probe)?;
            let (_, um) = solve_pair(probe.scheme, kernel, solver, sigma, &minus, probe)?;
            let scale = up.abs().max(um.abs());
            Ok(((up - um) / (2.0 * probe.epsilon), sigma.eval(us), scale))
        })
        .collect::<Result<_>>()?;
    let quotients: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let sig: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    if quotients.iter().any(|q| !q.is_finite()) {
        return Err(Error::DegenerateEpsilon(probe.epsilon));
    }
    let m = moment_from_samples(&quotients, probe.p, seed ^ 0x5eed)?;
    let s = moment_from_samples(&sig, probe.p, seed ^ 0x51)?;
    let n = quotients.len() as f64;
    let mean = quotients.iter().sum::<f64>() / n;
    let mean_se = crate::stats::fit::std_dev(&quotients) / n.sqrt();
    let scale = pairs.iter().map(|p| p.2).fold(0.0, f64::max);
    let roundoff = 1e3 * f64::EPSILON * scale / probe.epsilon;
    Ok(DerivativeEstimate {
        estimate: m.estimate,
        se: m.stderr,
        mean,
        mean_se,
        sigma_norm: s.estimate,
        roundoff,
        quotients,
    })
}

/// `(G_{t−r} * γ)(x − y)` averaged over `r` in the forcing step
/// `[t_s, t_{s+1}]`: the linear response to the shift.
pub fn smoothed_green_oracle(kernel: &SpatialKernel, grid: &Grid, s_index: usize, t_index: usize, x: usize, y: usize) -> Result<f64> {
    let cx = grid.coords(x);
    let cy = grid.coords(y);
    let z: Vec<f64> = match grid.dim() {
        1 => vec![grid.wrapped_offset(x, y)],
        _ => {
            let n = grid.n();
            let _ = (cx, cy);
            vec![grid.wrapped_offset(x / n, y / n), grid.wrapped_offset(x % n, y % n)]
        }
    };
    let t = grid.time(t_index);
    let (a, b) = (t - grid.time(s_index + 1), t - grid.time(s_index));
    let mut acc = 0.0;
    for (node, w) in gauss_legendre(6) {
        let tau = 0.5 * (a + b) + 0.5 * (b - a) * node;
        acc += 0.5 * w * smoothed_green(kernel, tau, &z)?;
    }
    Ok(acc)
}

/// The scheme's own response `(u₊ − u₋)/2` to a unit shift at `(s, y)`
/// with zero base noise and `σ ≡ 1`: the discrete counterpart of
/// [`smoothed_green_oracle`].
#[allow(clippy::too_many_arguments)]
pub fn discrete_smoothed_green(
    kernel: &SpatialKernel,
    grid: &Grid,
    s_index: usize,
    t_index: usize,
    x: usize,
    y: usize,
    scheme: Scheme,
) -> Result<f64> {
    let mut probe = DerivativeProbe::new(kernel, s_index, t_index, y, x, 1, 2.0);
    probe.epsilon = 1.0;
    probe.scheme = scheme;
    probe.validate(grid)?;
    if scheme == Scheme::MildDirect && grid.dim() != 1 {
        return Err(Error::DimensionUnsupported(grid.dim()));
    }
    let base = NoiseIncrements::zeros(*grid, *kernel);
    let plus = shift_increments(&base, s_index, y, 1.0)?;
    let minus = shift_increments(&base, s_index, y, -1.0)?;
    let one = SigmaSpec::additive(1.0)?;
    let solver = SpectralSolver::new(grid);
    let (_, up) = solve_pair(scheme, kernel, &solver, &one, &plus, &probe)?;
    let (_, um) = solve_pair(scheme, kernel, &solver, &one, &minus, &probe)?;
    Ok(0.5 * (up - um))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    /// Signed offsets `y − x` probed along the first axis.
    pub offsets: Vec<f64>,
    pub estimates: Vec<f64>,
    pub z_scores: Vec<f64>,
    /// Radius of the broadened cone `(t−s) + λ + 2dx`.
    pub cone_radius: f64,
    pub outside_max_abs: f64,
    pub outside_max_z: f64,
    pub inside_estimate: f64,
    pub inside_se: f64,
}

/// `|mean|/se`, with means below the roundoff floor counted as zero.
fn z_score(mean: f64, se: f64, floor: f64) -> f64 {
    if mean.abs() <= floor {
        0.0
    } else {
        let se = se.max(floor);
        if se > 0.0 {
            (mean / se).abs()
        } else {
            f64::INFINITY
        }
    }
}

/// Probes `D̃_{s,y}u(t,x)` along a ray of `y` and reports the largest
/// estimate outside the broadened cone `|x−y| > (t−s) + λ + 2dx`.
#[allow(clippy::too_many_arguments)]
pub fn lightcone_support_check(
    kernel: &SpatialKernel,
    grid: &Grid,
    sigma: &SigmaSpec,
    s_index: usize,
    t_index: usize,
    x: usize,
    seed: u64,
    replicas: usize,
    scheme: Scheme,
) -> Result<SupportReport> {
    if kernel.family() != KernelFamily::Triangle {
        return Err(Error::InvalidParameter("support check needs a compactly supported kernel".into()));
    }
    let dx = grid.dx();
    let gap = grid.time(t_index) - grid.time(s_index);
    let cone_radius = gap + kernel.length_scale() + 2.0 * dx;
    let reach = cone_radius + kernel.length_scale() + 4.0 * dx;
    let cells = (reach / dx).ceil() as usize;
    let stride = (cells / 24).max(1);
    let sampler = NoiseSampler::new(kernel, grid)?;
    let solver = SpectralSolver::new(grid);
    let n = grid.n();
    let (x0, x1) = match grid.dim() {
        1 => (x, 0),
        _ => (x / n, x % n),
    };
    let mut offsets = Vec::new();
    let mut estimates = Vec::new();
    let mut z_scores = Vec::new();
    let (mut outside_max_abs, mut outside_max_z) = (0.0f64, 0.0f64);
    let (mut inside_estimate, mut inside_se) = (0.0, 0.0);
    for k in (0..=cells).step_by(stride) {
        let yi = (x0 + k) % n;
        let y = match grid.dim() {
            1 => yi,
            _ => yi * n + x1,
        };
        let mut probe = DerivativeProbe::new(kernel, s_index, t_index, y, x, replicas, 2.0);
        probe.scheme = scheme;
        let est = estimate_with(kernel, grid, sigma, &probe, seed, &sampler, &solver)?;
        let off = k as f64 * dx;
        let z = z_score(est.mean, est.mean_se, est.roundoff);
        if off > cone_radius {
            outside_max_abs = outside_max_abs.max(est.mean.abs());
            outside_max_z = outside_max_z.max(z);
        }
        if k == 0 {
            inside_estimate = est.estimate;
            inside_se = est.se;
        }
        offsets.push(off);
        estimates.push(est.estimate);
        z_scores.push(z);
    }
    Ok(SupportReport {
        offsets,
        estimates,
        z_scores,
        cone_radius,
        outside_max_abs,
        outside_max_z,
        inside_estimate,
        inside_se,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub s: f64,
    pub y: f64,
    pub estimate: f64,
    pub se: f64,
    /// `(G*γ)` as the scheme resolves it; both bounds use this.
    pub smoothed_green: f64,
    /// The continuous `(G*γ)` averaged over the forcing step.
    pub smoothed_green_continuous: f64,
    pub lower: f64,
    pub upper_fitted: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub rows: Vec<SandwichRow>,
    /// Largest ratio `estimate / (G*γ)` over the probes.
    pub fitted_constant: f64,
    /// `max / min` of that ratio.
    pub ratio_spread: f64,
    /// `C·κ_{p,t,L}` from the constant formulas; `None` in d = 2, where
    /// the constant `C_ℓ` is not known.
    pub formula_constant: Option<f64>,
    pub violations: usize,
}

impl SandwichReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "s,y,estimate,se,lower,upper_fitted,violation_flag")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.s, r.y, r.estimate, r.se, r.lower, r.upper_fitted, r.violation as u8
            )?;
        }
        Ok(())
    }
}

/// Sandwich check `(G*γ)·‖σ(u(s,y))‖_p ≤ ‖D̃_{s,y}u(t,x)‖_p ≤ C·(G*γ)` over
/// a set of probes `(s_index, y)`, with `G*γ` taken from the scheme itself
/// so that discretisation error does not masquerade as a violation. A
/// violation is a lower bound exceeding the estimate by more than 4
/// standard errors.
#[allow(clippy::too_many_arguments)]
pub fn sandwich_report(
    kernel: &SpatialKernel,
    grid: &Grid,
    sigma: &SigmaSpec,
    probes: &[(usize, usize)],
    p: f64,
    t_index: usize,
    x: usize,
    seed: u64,
    replicas: usize,
    scheme: Scheme,
) -> Result<SandwichReport> {
    let sampler = NoiseSampler::new(kernel, grid)?;
    let solver = SpectralSolver::new(grid);
    let t = grid.time(t_index);
    let mut rows = Vec::with_capacity(probes.len());
    let mut ratios = Vec::new();
    for &(s_index, y) in probes {
        let mut probe = DerivativeProbe::new(kernel, s_index, t_index, y, x, replicas, p);
        probe.scheme = scheme;
        let est = estimate_with(kernel, grid, sigma, &probe, seed, &sampler, &solver)?;
        let sg = discrete_smoothed_green(kernel, grid, s_index, t_index, x, y, scheme)?;
        let continuous = smoothed_green_oracle(kernel, grid, s_index, t_index, x, y)?;
        let lower = sg * est.sigma_norm;
        if sg > 0.0 {
            ratios.push(est.estimate / sg);
        }
        rows.push(SandwichRow {
            s: grid.time(s_index),
            y: grid.coords(y)[0],
            estimate: est.estimate,
            se: est.se,
            smoothed_green: sg,
            smoothed_green_continuous: continuous,
            lower,
            upper_fitted: 0.0,
            violation: lower > est.estimate + 4.0 * est.se,
        });
    }
    let fitted_constant = ratios.iter().copied().fold(0.0, f64::max);
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    for r in &mut rows {
        r.upper_fitted = fitted_constant * r.smoothed_green;
    }
    let l = sigma.lipschitz();
    let formula_constant = if grid.dim() == 1 {
        let k = kernels::kappa(p, t, l, sigma.sigma0(), kernel)?;
        Some(kernels::derivative_constant_1d(p, t, l, kernel) * k)
    } else {
        None
    };
    let violations = rows.iter().filter(|r| r.violation).count();
    Ok(SandwichReport {
        rows,
        fitted_constant,
        ratio_spread: if min_ratio > 0.0 { fitted_constant / min_ratio } else { f64::INFINITY },
        formula_constant,
        violations,
    })
}
