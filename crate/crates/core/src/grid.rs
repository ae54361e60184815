//! Periodic space-time grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::SpatialKernel;

/// Periodic box `[−X, X)^d` with `n` points per axis and `n_steps` time
/// steps of length `dt`. Grid point `i` sits at `−X + i·dx`, so the origin
/// is point `n/2` on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    n: usize,
    dt: f64,
    n_steps: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, n: usize, dt: f64, n_steps: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {dim}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidParameter("half width must be positive".into()));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "points per axis must be a power of two >= 2, got {n}"
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) || n_steps == 0 {
            return Err(Error::InvalidParameter("time step and step count must be positive".into()));
        }
        Ok(Self {
            dim,
            half_width,
            n,
            dt,
            n_steps,
        })
    }

    /// Smallest grid at spacing `dx` whose box holds the ball of radius
    /// `r_max`, its light cone up to time `t_final`, and the kernel range.
    /// `dt` is shrunk if needed so that `t_final` is a whole number of steps.
    pub fn auto(kernel: &SpatialKernel, r_max: f64, t_final: f64, dx: f64, dt: f64) -> Result<Self> {
        if !(dx > 0.0) || !(dt > 0.0) || !(t_final > 0.0) {
            return Err(Error::InvalidParameter("dx, dt and t must be positive".into()));
        }
        let needed = r_max + t_final + kernel.effective_range();
        let n = ((2.0 * needed / dx) - 1e-9).ceil().max(2.0) as usize;
        let n = n.next_power_of_two();
        let n_steps = ((t_final / dt) - 1e-9).ceil().max(1.0) as usize;
        Self::new(
            kernel.dim(),
            0.5 * n as f64 * dx,
            n,
            t_final / n_steps as f64,
            n_steps,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn half_width(&self) -> f64 {
        self.half_width
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }
    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }
    /// Volume of one cell, `dx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }
    /// Total number of cells, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn final_time(&self) -> f64 {
        self.dt * self.n_steps as f64
    }
    pub fn time(&self, index: usize) -> f64 {
        self.dt * index as f64
    }
    /// Coordinate of grid index `i` along one axis.
    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dx()
    }
    /// Axis index of the origin.
    pub fn origin_axis(&self) -> usize {
        self.n / 2
    }
    /// Flat index of the origin.
    pub fn origin(&self) -> usize {
        match self.dim {
            1 => self.n / 2,
            _ => (self.n / 2) * self.n + self.n / 2,
        }
    }
    /// Flat index from per-axis indices.
    pub fn flat(&self, idx: &[usize]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] * self.n + idx[1],
        }
    }
    /// Coordinates of flat index `j` (second entry unused in d=1).
    pub fn coords(&self, j: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.axis_coord(j), 0.0],
            _ => [self.axis_coord(j / self.n), self.axis_coord(j % self.n)],
        }
    }
    /// Minimum-image displacement along one axis between indices.
    pub fn wrapped_offset(&self, i: usize, j: usize) -> f64 {
        let n = self.n as i64;
        let mut k = (i as i64 - j as i64).rem_euclid(n);
        if k > n / 2 {
            k -= n;
        }
        k as f64 * self.dx()
    }
    /// Minimum-image distance between two flat indices.
    pub fn wrapped_distance(&self, a: usize, b: usize) -> f64 {
        match self.dim {
            1 => self.wrapped_offset(a, b).abs(),
            _ => {
                let d0 = self.wrapped_offset(a / self.n, b / self.n);
                let d1 = self.wrapped_offset(a % self.n, b % self.n);
                d0.hypot(d1)
            }
        }
    }
    /// Largest ball radius whose light cone up to `t` (plus the kernel
    /// range) stays inside the box.
    pub fn max_radius(&self, t: f64, kernel: &SpatialKernel) -> f64 {
        self.half_width - t - kernel.effective_range()
    }
    /// Advisory CFL-style check `dt ≤ dx`.
    pub fn cfl_ok(&self) -> bool {
        self.dt <= self.dx() * (1.0 + 1e-12)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;

    #[test]
    fn auto_sizing_holds_light_cone() {
        let k = SpatialKernel::new(KernelFamily::Triangle, 1.0, 1.0, 1).unwrap();
        let g = Grid::auto(&k, 16.0, 1.0, 0.05, 0.025).unwrap();
        assert!(g.n().is_power_of_two());
        assert!(g.half_width() >= 18.0);
        assert!((g.dx() - 0.05).abs() < 1e-12);
        assert_eq!(g.n_steps(), 40);
        assert!(g.max_radius(1.0, &k) >= 16.0);
    }

    #[test]
    fn origin_is_a_grid_point() {
        let g = Grid::new(2, 4.0, 16, 0.1, 3).unwrap();
        let c = g.coords(g.origin());
        assert_eq!(c, [0.0, 0.0]);
        assert!((g.wrapped_distance(g.flat(&[0, 0]), g.flat(&[15, 15])) - 2f64.sqrt() * 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(1, 1.0, 12, 0.1, 1).is_err());
        assert!(Grid::new(3, 1.0, 16, 0.1, 1).is_err());
        assert!(Grid::new(1, 1.0, 16, 0.0, 1).is_err());
    }
}
