//! Random-field solutions of the mild equation
//! `u(t,x) = 1 + ∫∫ G_{t−s}(x−y) σ(u(s,y)) W(ds,dy)`.
//!
//! Three schemes share the same noise increments:
//!
//! * [`SpectralSolver`]: exact wave propagator in Fourier space with the
//!   forcing `σ(u(t_m))·ΔW_m/(dx^d·dt)` held constant over each step.
//!   Works in d = 1 and d = 2 and is the workhorse for Monte Carlo.
//! * [`solve_mild_direct`]: full-history quadrature of the mild form with
//!   `G` evaluated at lag `t_n − t_m − dt/2` (d = 1 only).
//! * [`solve_picard`]: Picard iterates of the same quadrature.

use std::io::Write;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{FftScratch, FieldFft};
use crate::grid::Grid;
use crate::kernels::SpatialKernel;
use crate::noise::{self, NoiseIncrements};
use crate::sigma::SigmaSpec;

pub const SOLUTION_MAGIC: &[u8; 4] = b"SWSL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    MildDirect,
    Spectral,
    Picard(usize),
}

/// Values of `u` at every time index `0..=n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    values: Vec<f64>,
    grid: Grid,
    scheme: Scheme,
    seed: u64,
    kernel: SpatialKernel,
    sigma: SigmaSpec,
}

impl SolutionField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn kernel(&self) -> &SpatialKernel {
        &self.kernel
    }
    pub fn sigma(&self) -> &SigmaSpec {
        &self.sigma
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    /// Spatial slice at time index `n`.
    pub fn slice(&self, n: usize) -> &[f64] {
        let len = self.grid.len();
        &self.values[n * len..(n + 1) * len]
    }
    pub fn at(&self, n: usize, j: usize) -> f64 {
        self.values[n * self.grid.len() + j]
    }

    /// Max-abs difference against another field on the same grid.
    pub fn max_abs_diff(&self, other: &SolutionField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Snapshot CSV with columns `t, x1[, x2], u`.
    pub fn write_csv<W: Write>(&self, mut w: W, time_indices: &[usize]) -> Result<()> {
        let d = self.grid.dim();
        if d == 1 {
            writeln!(w, "t,x1,u")?;
        } else {
            writeln!(w, "t,x1,x2,u")?;
        }
        for &n in time_indices {
            if n > self.grid.n_steps() {
                return Err(Error::IndexOutOfRange {
                    index: n,
                    len: self.grid.n_steps() + 1,
                });
            }
            let t = self.grid.time(n);
            for (j, u) in self.slice(n).iter().enumerate() {
                let c = self.grid.coords(j);
                if d == 1 {
                    writeln!(w, "{t},{},{u}", c[0])?;
                } else {
                    writeln!(w, "{t},{},{},{u}", c[0], c[1])?;
                }
            }
        }
        Ok(())
    }

    /// Binary snapshot mirroring the noise dump, rows `0..=n_steps`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        noise::write_header(
            &mut w,
            SOLUTION_MAGIC,
            &self.grid,
            (self.grid.n_steps() + 1) as u64,
            self.seed,
        )?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a binary snapshot; returns the grid, seed and values.
    pub fn read_binary<R: std::io::Read>(mut r: R) -> Result<(Grid, u64, Vec<f64>)> {
        let (grid, rows, seed) = noise::read_header(&mut r, SOLUTION_MAGIC)?;
        let values = noise::read_values(&mut r, rows as usize * grid.len())?;
        Ok((grid, seed, values))
    }
}

fn check_inputs(kernel: &SpatialKernel, grid: &Grid, noise: &NoiseIncrements) -> Result<()> {
    if noise.grid() != grid || kernel.dim() != grid.dim() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Fourier-space propagator for one grid.
#[derive(Debug, Clone)]
pub struct SpectralSolver {
    grid: Grid,
    fft: FieldFft,
    cos: Vec<f64>,
    sinc: Vec<f64>,
    one_minus_cos: Vec<f64>,
    neg_omega_sin: Vec<f64>,
}

/// Reusable buffers for [`SpectralSolver::run`].
#[derive(Debug, Clone)]
pub struct SolverWork {
    u_hat: Vec<Complex64>,
    v_hat: Vec<Complex64>,
    buf: Vec<Complex64>,
    u: Vec<f64>,
    scratch: FftScratch,
}

impl SpectralSolver {
    pub fn new(grid: &Grid) -> Self {
        let fft = FieldFft::new(grid.dim(), grid.n());
        let h = grid.dt();
        let omega = fft.wavenumbers(grid.half_width());
        let mut cos = Vec::with_capacity(omega.len());
        let mut sinc = Vec::with_capacity(omega.len());
        let mut one_minus_cos = Vec::with_capacity(omega.len());
        let mut neg_omega_sin = Vec::with_capacity(omega.len());
        for &w in &omega {
            let wh = w * h;
            cos.push(wh.cos());
            if w == 0.0 {
                sinc.push(h);
                one_minus_cos.push(0.5 * h * h);
                neg_omega_sin.push(0.0);
            } else {
                sinc.push(wh.sin() / w);
                let s = (0.5 * wh).sin();
                one_minus_cos.push(2.0 * s * s / (w * w));
                neg_omega_sin.push(-w * wh.sin());
            }
        }
        Self {
            grid: *grid,
            fft,
            cos,
            sinc,
            one_minus_cos,
            neg_omega_sin,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn work(&self) -> SolverWork {
        let len = self.grid.len();
        SolverWork {
            u_hat: vec![Complex64::default(); len],
            v_hat: vec![Complex64::default(); len],
            buf: vec![Complex64::default(); len],
            u: vec![1.0; len],
            scratch: self.fft.scratch(),
        }
    }

    /// Evolve from `u ≡ 1`, `∂_t u ≡ 0`, calling `observe(n, u(t_n))` for
    /// every time index `n` with `wants(n)`. Physical values are only
    /// reconstructed when σ is non-constant or an observation is wanted.
    pub fn run<O, P>(
        &self,
        sigma: &SigmaSpec,
        noise: &NoiseIncrements,
        work: &mut SolverWork,
        wants: P,
        mut observe: O,
    ) -> Result<()>
    where
        O: FnMut(usize, &[f64]),
        P: Fn(usize) -> bool,
    {
        if noise.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let len = self.grid.len();
        let norm = 1.0 / len as f64;
        let force_scale = 1.0 / (self.grid.cell_volume() * self.grid.dt());
        let constant = sigma.constant_value();
        work.u_hat.iter_mut().for_each(|c| *c = Complex64::default());
        work.v_hat.iter_mut().for_each(|c| *c = Complex64::default());
        work.u_hat[0] = Complex64::new(len as f64, 0.0);
        work.u.iter_mut().for_each(|v| *v = 1.0);
        if wants(0) {
            observe(0, &work.u);
        }
        for m in 0..self.grid.n_steps() {
            let dw = noise.step(m);
            match constant {
                Some(c) => {
                    let s = c * force_scale;
                    for (b, w) in work.buf.iter_mut().zip(dw) {
                        *b = Complex64::new(s * w, 0.0);
                    }
                }
                None => {
                    for ((b, w), u) in work.buf.iter_mut().zip(dw).zip(&work.u) {
                        *b = Complex64::new(sigma.eval(*u) * w * force_scale, 0.0);
                    }
                }
            }
            self.fft.forward(&mut work.buf, &mut work.scratch);
            for k in 0..len {
                let (u, v, f) = (work.u_hat[k], work.v_hat[k], work.buf[k]);
                work.u_hat[k] = u * self.cos[k] + v * self.sinc[k] + f * self.one_minus_cos[k];
                work.v_hat[k] = u * self.neg_omega_sin[k] + v * self.cos[k] + f * self.sinc[k];
            }
            let n = m + 1;
            let want = wants(n);
            if constant.is_none() || want {
                work.buf.copy_from_slice(&work.u_hat);
                self.fft.inverse(&mut work.buf, &mut work.scratch);
                for (u, b) in work.u.iter_mut().zip(&work.buf) {
                    *u = b.re * norm;
                }
                if want {
                    observe(n, &work.u);
                }
            }
        }
        Ok(())
    }
}

fn collect_solution(
    solver: &SpectralSolver,
    sigma: &SigmaSpec,
    noise: &NoiseIncrements,
    kernel: &SpatialKernel,
) -> Result<SolutionField> {
    let grid = *solver.grid();
    let len = grid.len();
    let mut values = vec![0.0; (grid.n_steps() + 1) * len];
    let mut work = solver.work();
    solver.run(sigma, noise, &mut work, |_| true, |n, u| {
        values[n * len..(n + 1) * len].copy_from_slice(u);
    })?;
    Ok(SolutionField {
        values,
        grid,
        scheme: Scheme::Spectral,
        seed: noise.seed(),
        kernel: *kernel,
        sigma: *sigma,
    })
}

/// Spectral scheme, full space-time field.
pub fn solve_spectral(
    kernel: &SpatialKernel,
    grid: &Grid,
    sigma: &SigmaSpec,
    noise: &NoiseIncrements,
) -> Result<SolutionField> {
    check_inputs(kernel, grid, noise)?;
    collect_solution(&SpectralSolver::new(grid), sigma, noise, kernel)
}

/// Half-width, in cells, of the set `{k : |k|·dx < τ}`.
fn cone_cells(tau: f64, dx: f64, n: usize) -> usize {
    let q = tau / dx;
    let k = ((q - 1e-9).ceil() as i64 - 1).max(0) as usize;
    k.min((n - 1) / 2)
}

/// Direct-quadrature time stepping shared by the mild and Picard schemes.
/// `sigma_source(m)` yields the values `σ(·)` is applied to at step `m`;
/// `None` means "use the field being built".
fn direct_sum(
    grid: &Grid,
    sigma: &SigmaSpec,
    noise: &NoiseIncrements,
    previous: Option<&[f64]>,
) -> Vec<f64> {
    let n = grid.n();
    let steps = grid.n_steps();
    let dx = grid.dx();
    let dt = grid.dt();
    let mut values = vec![1.0; (steps + 1) * n];
    // prefix sums over the ring repeated three times, one row per step
    let mut prefix = vec![0.0; steps * (3 * n + 1)];
    let row = 3 * n + 1;
    let cone: Vec<usize> = (0..=steps)
        .map(|lag| {
            if lag == 0 {
                0
            } else {
                cone_cells((lag as f64 - 0.5) * dt, dx, n)
            }
        })
        .collect();
    for t in 1..=steps {
        let m = t - 1;
        let src = match previous {
            Some(p) => &p[m * n..(m + 1) * n],
            None => &values[m * n..(m + 1) * n],
        };
        let dw = noise.step(m);
        let p = &mut prefix[m * row..(m + 1) * row];
        p[0] = 0.0;
        for r in 0..3 * n {
            let j = r % n;
            p[r + 1] = p[r] + 0.5 * sigma.eval(src[j]) * dw[j];
        }
        for i in 0..n {
            let mut acc = 0.0;
            for mm in 0..t {
                let k = cone[t - mm];
                let p = &prefix[mm * row..(mm + 1) * row];
                acc += p[n + i + k + 1] - p[n + i - k];
            }
            values[t * n + i] = 1.0 + acc;
        }
    }
    values
}

/// Full-history quadrature of the mild equation (d = 1 only):
/// `u(t_n,x_i) = 1 + Σ_{m<n} Σ_j G_{t_n−t_m−dt/2}(x_i−x_j) σ(u(t_m,x_j)) ΔW_{m,j}`,
/// with `ΔW` the cell-integrated increment.
pub fn solve_mild_direct(
    kernel: &SpatialKernel,
    grid: &Grid,
    sigma: &SigmaSpec,
    noise: &NoiseIncrements,
) -> Result<SolutionField> {
    if grid.dim() != 1 {
        return Err(Error::DimensionUnsupported(grid.dim()));
    }
    check_inputs(kernel, grid, noise)?;
    Ok(SolutionField {
        values: direct_sum(grid, sigma, noise, None),
        grid: *grid,
        scheme: Scheme::MildDirect,
        seed: noise.seed(),
        kernel: *kernel,
        sigma: *sigma,
    })
}

/// Picard iterates `u_{k+1} = 1 + ∫∫ G σ(u_k) dW` from `u_0 ≡ 1`, using the
/// same quadrature as [`solve_mild_direct`] (d = 1 only).
pub fn solve_picard(
    kernel: &SpatialKernel,
    grid: &Grid,
    sigma: &SigmaSpec,
    noise: &NoiseIncrements,
    n_iter: usize,
) -> Result<SolutionField> {
    if grid.dim() != 1 {
        return Err(Error::DimensionUnsupported(grid.dim()));
    }
    check_inputs(kernel, grid, noise)?;
    let mut current = vec![1.0; (grid.n_steps() + 1) * grid.n()];
    for _ in 0..n_iter {
        current = direct_sum(grid, sigma, noise, Some(&current));
    }
    Ok(SolutionField {
        values: current,
        grid: *grid,
        scheme: Scheme::Picard(n_iter),
        seed: noise.seed(),
        kernel: *kernel,
        sigma: *sigma,
    })
}

/// Monte Carlo `‖X‖_p` with a bootstrap standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub replicas: usize,
}

pub const MIN_MOMENT_REPLICAS: usize = 100;

/// `‖X‖_p` from samples of `X`, bootstrap SE over 200 resamples.
pub fn moment_from_samples(samples: &[f64], p: f64, seed: u64) -> Result<MomentEstimate> {
    if samples.len() < MIN_MOMENT_REPLICAS {
        return Err(Error::InsufficientReplicas {
            needed: MIN_MOMENT_REPLICAS,
            got: samples.len(),
        });
    }
    if !(p >= 2.0) {
        return Err(Error::InvalidParameter(format!("p must be >= 2, got {p}")));
    }
    let powers: Vec<f64> = samples.iter().map(|v| v.abs().powf(p)).collect();
    let norm = |xs: &mut dyn Iterator<Item = f64>, n: usize| (xs.sum::<f64>() / n as f64).powf(1.0 / p);
    let estimate = norm(&mut powers.iter().copied(), powers.len());
    let stderr = crate::stats::fit::bootstrap_se(&powers, 200, seed, |xs| {
        (xs.iter().sum::<f64>() / xs.len() as f64).powf(1.0 / p)
    });
    Ok(MomentEstimate {
        estimate,
        stderr,
        replicas: samples.len(),
    })
}

/// `‖u(t,x)‖_p` over a replica set of solutions.
pub fn moment_estimate(
    solutions: &[SolutionField],
    p: f64,
    t_index: usize,
    x_index: usize,
) -> Result<MomentEstimate> {
    let samples: Vec<f64> = solutions.iter().map(|s| s.at(t_index, x_index)).collect();
    moment_from_samples(&samples, p, 0x6d6f_6d65_6e74)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;
    use crate::noise::sample_increments;
    use crate::sigma::SigmaFamily;

    fn setup() -> (SpatialKernel, Grid) {
        (
            SpatialKernel::new(KernelFamily::Triangle, 1.0, 1.0, 1).unwrap(),
            Grid::new(1, 3.2, 64, 1.0 / 32.0, 32).unwrap(),
        )
    }

    #[test]
    fn zero_noise_keeps_constant() {
        let (k, g) = setup();
        let z = NoiseIncrements::zeros(g, k);
        let s = SigmaSpec::identity();
        for sol in [
            solve_spectral(&k, &g, &s, &z).unwrap(),
            solve_mild_direct(&k, &g, &s, &z).unwrap(),
            solve_picard(&k, &g, &s, &z, 3).unwrap(),
        ] {
            assert!(sol.values().iter().all(|&v| (v - 1.0).abs() < 1e-13));
        }
    }

    #[test]
    fn trivial_sigma_gives_constant_solution() {
        let (k, g) = setup();
        let noise = sample_increments(&k, &g, 1).unwrap();
        let s = SigmaSpec::unchecked(SigmaFamily::Affine { c0: 0.0, c1: 0.0 });
        let direct = solve_mild_direct(&k, &g, &s, &noise).unwrap();
        assert!(direct.values().iter().all(|&v| v == 1.0));
        let s = SigmaSpec::unchecked(SigmaFamily::Affine { c0: 1.0, c1: -1.0 });
        for n in 0..4 {
            let p = solve_picard(&k, &g, &s, &noise, n).unwrap();
            assert!(p.values().iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn initial_slice_is_one() {
        let (k, g) = setup();
        let noise = sample_increments(&k, &g, 2).unwrap();
        let s = SigmaSpec::identity();
        let sol = solve_spectral(&k, &g, &s, &noise).unwrap();
        assert!(sol.slice(0).iter().all(|&v| v == 1.0));
        assert!(sol.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn picard_reaches_mild_direct() {
        let (k, g) = setup();
        let noise = sample_increments(&k, &g, 9).unwrap();
        let s = SigmaSpec::new(SigmaFamily::Affine { c0: 0.5, c1: 0.8 }).unwrap();
        let direct = solve_mild_direct(&k, &g, &s, &noise).unwrap();
        assert!(solve_picard(&k, &g, &s, &noise, 0).unwrap().values().iter().all(|&v| v == 1.0));
        let p12 = solve_picard(&k, &g, &s, &noise, 12).unwrap();
        assert!(p12.max_abs_diff(&direct) <= 1e-6);
        // the explicit scheme is reproduced exactly after n_steps iterations
        let full = solve_picard(&k, &g, &s, &noise, g.n_steps()).unwrap();
        assert!(full.max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn schemes_agree_on_shared_noise() {
        let k = SpatialKernel::new(KernelFamily::Triangle, 1.0, 1.0, 1).unwrap();
        let g = Grid::new(1, 4.0, 128, 1.0 / 32.0, 32).unwrap();
        let noise = sample_increments(&k, &g, 4).unwrap();
        let s = SigmaSpec::identity();
        let a = solve_mild_direct(&k, &g, &s, &noise).unwrap();
        let b = solve_spectral(&k, &g, &s, &noise).unwrap();
        assert!(a.max_abs_diff(&b) < 0.1, "{}", a.max_abs_diff(&b));
    }

    #[test]
    fn mild_direct_rejects_2d() {
        let k = SpatialKernel::new(KernelFamily::Gaussian, 1.0, 1.0, 2).unwrap();
        let g = Grid::new(2, 4.0, 16, 0.1, 2).unwrap();
        let z = NoiseIncrements::zeros(g, k);
        assert_eq!(
            solve_mild_direct(&k, &g, &SigmaSpec::identity(), &z),
            Err(Error::DimensionUnsupported(2))
        );
    }

    #[test]
    fn cone_cell_counting() {
        assert_eq!(cone_cells(0.025, 0.05, 64), 0);
        assert_eq!(cone_cells(0.1, 0.05, 64), 1);
        assert_eq!(cone_cells(0.1000001, 0.05, 64), 2);
        assert_eq!(cone_cells(100.0, 0.05, 64), 31);
    }

    #[test]
    fn moment_needs_replicas() {
        assert!(matches!(
            moment_from_samples(&[1.0; 10], 2.0, 0),
            Err(Error::InsufficientReplicas { .. })
        ));
        let m = moment_from_samples(&[1.0; 100], 3.0, 0).unwrap();
        assert_eq!(m.estimate, 1.0);
    }

    #[test]
    fn csv_and_binary_export() {
        let (k, g) = setup();
        let noise = sample_increments(&k, &g, 4).unwrap();
        let sol = solve_spectral(&k, &g, &SigmaSpec::identity(), &noise).unwrap();
        let mut csv = Vec::new();
        sol.write_csv(&mut csv, &[0, 32]).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("t,x1,u\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 64);
        let mut bin = Vec::new();
        sol.write_binary(&mut bin).unwrap();
        assert_eq!(&bin[0..4], b"SWSL");
        let (grid, seed, values) = SolutionField::read_binary(bin.as_slice()).unwrap();
        assert_eq!(grid, g);
        assert_eq!(seed, 4);
        assert_eq!(values, sol.values());
    }
}
