//! Discretised noise: white in time, γ-correlated in space.
//!
//! Spatial fields are drawn by circulant embedding on the simulation torus.
//! The embedded covariance is the full periodisation of the sampled kernel,
//! whose circulant eigenvalues are aliased samples of the spectral density
//! and therefore nonnegative up to rounding.

use std::io::{Read, Write};

use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{FftScratch, FieldFft};
use crate::grid::Grid;
use crate::kernels::SpatialKernel;
use crate::rng;

pub const NOISE_MAGIC: &[u8; 4] = b"SWNZ";
pub const DUMP_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;

/// Noise realisation `ΔW[m][j]`, row-major by time step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrements {
    values: Vec<f64>,
    seed: u64,
    grid: Grid,
    kernel: SpatialKernel,
}

impl NoiseIncrements {
    pub fn from_values(values: Vec<f64>, seed: u64, grid: Grid, kernel: SpatialKernel) -> Result<Self> {
        if values.len() != grid.len() * grid.n_steps() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            values,
            seed,
            grid,
            kernel,
        })
    }

    pub fn zeros(grid: Grid, kernel: SpatialKernel) -> Self {
        Self {
            values: vec![0.0; grid.len() * grid.n_steps()],
            seed: 0,
            grid,
            kernel,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn kernel(&self) -> &SpatialKernel {
        &self.kernel
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn step(&self, m: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[m * n..(m + 1) * n]
    }
    pub fn step_mut(&mut self, m: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.values[m * n..(m + 1) * n]
    }

    /// Write the binary dump: 64-byte header then little-endian `f64`s.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        write_header(&mut w, NOISE_MAGIC, &self.grid, self.grid.n_steps() as u64, self.seed)?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R, kernel: SpatialKernel) -> Result<Self> {
        let (grid, rows, seed) = read_header(&mut r, NOISE_MAGIC)?;
        let values = read_values(&mut r, rows as usize * grid.len())?;
        Self::from_values(values, seed, grid, kernel)
    }
}

pub(crate) fn write_header<W: Write>(w: &mut W, magic: &[u8; 4], grid: &Grid, rows: u64, seed: u64) -> Result<()> {
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(magic);
    h[4..8].copy_from_slice(&DUMP_VERSION.to_le_bytes());
    h[8..12].copy_from_slice(&(grid.dim() as u32).to_le_bytes());
    h[12..16].copy_from_slice(&(grid.n() as u32).to_le_bytes());
    h[16..24].copy_from_slice(&rows.to_le_bytes());
    h[24..32].copy_from_slice(&grid.half_width().to_le_bytes());
    h[32..40].copy_from_slice(&grid.dt().to_le_bytes());
    h[40..48].copy_from_slice(&seed.to_le_bytes());
    h[48..56].copy_from_slice(&(grid.n_steps() as u64).to_le_bytes());
    w.write_all(&h)?;
    Ok(())
}

pub(crate) fn read_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<(Grid, u64, u64)> {
    let mut h = [0u8; HEADER_LEN];
    r.read_exact(&mut h)?;
    if &h[0..4] != magic {
        return Err(Error::Format("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(h[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(h[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(h[o..o + 8].try_into().unwrap());
    if u32_at(4) != DUMP_VERSION {
        return Err(Error::Format(format!("unsupported version {}", u32_at(4))));
    }
    let grid = Grid::new(
        u32_at(8) as usize,
        f64_at(24),
        u32_at(12) as usize,
        f64_at(32),
        u64_at(48) as usize,
    )?;
    Ok((grid, u64_at(16), u64_at(40)))
}

pub(crate) fn read_values<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Periodised kernel `Σ_m γ(x + 2X·m)` at the minimum-image displacement
/// `(d0, d1)`.
fn periodised(kernel: &SpatialKernel, grid: &Grid, d0: f64, d1: f64) -> f64 {
    let side = 2.0 * grid.half_width();
    let cutoff = match kernel.family() {
        crate::kernels::KernelFamily::Triangle => kernel.length_scale(),
        crate::kernels::KernelFamily::Gaussian => 9.0 * kernel.length_scale(),
        crate::kernels::KernelFamily::Exponential => 40.0 * kernel.length_scale(),
    };
    let images = (cutoff / side).ceil() as i64 + 1;
    let mut sum = 0.0;
    if grid.dim() == 1 {
        for m in -images..=images {
            sum += kernel.gamma_radial(d0 + side * m as f64);
        }
    } else {
        for m0 in -images..=images {
            let a = d0 + side * m0 as f64;
            for m1 in -images..=images {
                let b = d1 + side * m1 as f64;
                sum += kernel.gamma_radial(a.hypot(b));
            }
        }
    }
    sum
}

/// Wrapped covariance between flat grid indices `a` and `b`.
pub fn wrapped_gamma(kernel: &SpatialKernel, grid: &Grid, a: usize, b: usize) -> f64 {
    let (d0, d1) = match grid.dim() {
        1 => (grid.wrapped_offset(a, b), 0.0),
        _ => (
            grid.wrapped_offset(a / grid.n(), b / grid.n()),
            grid.wrapped_offset(a % grid.n(), b % grid.n()),
        ),
    };
    periodised(kernel, grid, d0, d1)
}

/// Circulant-embedding sampler for one `(kernel, grid)` pair.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    kernel: SpatialKernel,
    grid: Grid,
    fft: FieldFft,
    /// `sqrt(Λ_k / N)` in FFT ordering.
    amplitudes: Vec<f64>,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
}

impl NoiseSampler {
    pub fn new(kernel: &SpatialKernel, grid: &Grid) -> Result<Self> {
        if kernel.dim() != grid.dim() {
            return Err(Error::InvalidParameter("kernel and grid dimensions differ".into()));
        }
        let fft = FieldFft::new(grid.dim(), grid.n());
        let mut scratch = fft.scratch();
        let len = grid.len();
        // first row of the circulant: covariance with the point at index 0
        let mut row: Vec<Complex64> = (0..len)
            .map(|j| Complex64::new(wrapped_gamma(kernel, grid, j, 0), 0.0))
            .collect();
        fft.forward(&mut row, &mut scratch);
        let max = row.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
        let min = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if min < -1e-9 * max {
            return Err(Error::EmbeddingNotPsd {
                min_eigenvalue: min,
                max_eigenvalue: max,
            });
        }
        let amplitudes = row
            .iter()
            .map(|c| (c.re.max(0.0) / len as f64).sqrt())
            .collect();
        Ok(Self {
            kernel: *kernel,
            grid: *grid,
            fft,
            amplitudes,
            min_eigenvalue: min,
            max_eigenvalue: max,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn kernel(&self) -> &SpatialKernel {
        &self.kernel
    }
    /// Extreme circulant eigenvalues before clipping.
    pub fn eigenvalue_range(&self) -> (f64, f64) {
        (self.min_eigenvalue, self.max_eigenvalue)
    }

    /// Two independent stationary fields with covariance `γ_per`, as the
    /// real and imaginary parts of one transform.
    pub fn field_pair<R: rand::Rng>(&self, rng: &mut R, buf: &mut Vec<Complex64>, work: &mut FftScratch) {
        buf.clear();
        buf.extend(self.amplitudes.iter().map(|&a| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(a * re, a * im)
        }));
        self.fft.forward(buf, work);
    }

    /// One field drawn from `rng`.
    pub fn sample_field<R: rand::Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut buf = Vec::with_capacity(self.grid.len());
        let mut work = self.fft.scratch();
        self.field_pair(rng, &mut buf, &mut work);
        buf.iter().map(|c| c.re).collect()
    }

    /// `n_steps` independent fields scaled by `√dt·dx^d`. Steps `2k` and
    /// `2k+1` share the counter-based stream `(seed, k)`.
    pub fn increments(&self, seed: u64) -> NoiseIncrements {
        let mut work = self.fft.scratch();
        let mut buf = Vec::with_capacity(self.grid.len());
        let scale = self.grid.dt().sqrt() * self.grid.cell_volume();
        let len = self.grid.len();
        let steps = self.grid.n_steps();
        let mut values = vec![0.0; len * steps];
        for pair in 0..steps.div_ceil(2) {
            let mut rng = rng::stream(seed, pair as u64);
            self.field_pair(&mut rng, &mut buf, &mut work);
            let m = 2 * pair;
            for (v, c) in values[m * len..(m + 1) * len].iter_mut().zip(&buf) {
                *v = scale * c.re;
            }
            if m + 1 < steps {
                for (v, c) in values[(m + 1) * len..(m + 2) * len].iter_mut().zip(&buf) {
                    *v = scale * c.im;
                }
            }
        }
        NoiseIncrements {
            values,
            seed,
            grid: self.grid,
            kernel: self.kernel,
        }
    }
}

/// One stationary Gaussian field with covariance `γ_per` and mean zero.
pub fn sample_field<R: rand::Rng>(kernel: &SpatialKernel, grid: &Grid, rng: &mut R) -> Result<Vec<f64>> {
    Ok(NoiseSampler::new(kernel, grid)?.sample_field(rng))
}

/// Noise increments for all time steps of `grid`, reproducible from `seed`.
pub fn sample_increments(kernel: &SpatialKernel, grid: &Grid, seed: u64) -> Result<NoiseIncrements> {
    Ok(NoiseSampler::new(kernel, grid)?.increments(seed))
}

/// Cameron-Martin shift in the direction of a point mass at
/// `(step s_index, grid point y)`:
/// `ΔW[s][j] += ε·γ(x_j − y)·dx^d`.
pub fn shift_increments(noise: &NoiseIncrements, s_index: usize, y: usize, epsilon: f64) -> Result<NoiseIncrements> {
    let grid = noise.grid;
    if s_index >= grid.n_steps() {
        return Err(Error::IndexOutOfRange {
            index: s_index,
            len: grid.n_steps(),
        });
    }
    if y >= grid.len() {
        return Err(Error::IndexOutOfRange {
            index: y,
            len: grid.len(),
        });
    }
    let mut out = noise.clone();
    if epsilon == 0.0 {
        return Ok(out);
    }
    let w = epsilon * grid.cell_volume();
    let kernel = noise.kernel;
    for (j, v) in out.step_mut(s_index).iter_mut().enumerate() {
        let g = wrapped_gamma(&kernel, &grid, j, y);
        if g != 0.0 {
            *v += w * g;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;

    fn tri_grid() -> (SpatialKernel, Grid) {
        let k = SpatialKernel::new(KernelFamily::Triangle, 1.0, 1.0, 1).unwrap();
        (k, Grid::new(1, 4.0, 64, 0.05, 5).unwrap())
    }

    #[test]
    fn eigenvalues_are_nonnegative() {
        for (k, g) in [
            tri_grid(),
            (
                SpatialKernel::new(KernelFamily::Gaussian, 0.5, 1.0, 2).unwrap(),
                Grid::new(2, 4.0, 32, 0.1, 2).unwrap(),
            ),
            (
                SpatialKernel::new(KernelFamily::Exponential, 0.5, 1.0, 2).unwrap(),
                Grid::new(2, 4.0, 32, 0.1, 2).unwrap(),
            ),
        ] {
            let s = NoiseSampler::new(&k, &g).unwrap();
            let (lo, hi) = s.eigenvalue_range();
            assert!(lo >= -1e-9 * hi, "{lo} {hi}");
        }
    }

    #[test]
    fn same_seed_same_noise() {
        let (k, g) = tri_grid();
        let a = sample_increments(&k, &g, 11).unwrap();
        let b = sample_increments(&k, &g, 11).unwrap();
        let c = sample_increments(&k, &g, 12).unwrap();
        assert_eq!(a, b);
        let differing = a.values().iter().zip(c.values()).filter(|(x, y)| x != y).count();
        assert!(differing as f64 > 0.99 * a.values().len() as f64);
    }

    #[test]
    fn shift_is_local_in_time_and_space() {
        let (k, g) = tri_grid();
        let base = sample_increments(&k, &g, 3).unwrap();
        assert_eq!(shift_increments(&base, 2, 10, 0.0).unwrap(), base);
        let y = g.origin();
        let shifted = shift_increments(&base, 2, y, 0.1).unwrap();
        for m in 0..g.n_steps() {
            if m != 2 {
                assert_eq!(shifted.step(m), base.step(m));
            }
        }
        for j in 0..g.len() {
            let d = g.wrapped_distance(j, y);
            let expected = 0.1 * k.gamma_radial(d) * g.dx();
            let got = shifted.step(2)[j] - base.step(2)[j];
            assert!((got - expected).abs() < 1e-15, "{j}: {got} vs {expected}");
            if d >= 1.0 {
                assert_eq!(got, 0.0);
            }
        }
        assert!(matches!(
            shift_increments(&base, 5, y, 0.1),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn binary_dump_round_trips() {
        let (k, g) = tri_grid();
        let noise = sample_increments(&k, &g, 5).unwrap();
        let mut bytes = Vec::new();
        noise.write_binary(&mut bytes).unwrap();
        assert_eq!(&bytes[0..4], b"SWNZ");
        assert_eq!(bytes.len(), HEADER_LEN + 8 * g.len() * g.n_steps());
        let back = NoiseIncrements::read_binary(bytes.as_slice(), k).unwrap();
        assert_eq!(back, noise);
    }
}
