//! Spatial averages over the ball `B_R` centred at the origin.
//!
//! Cells enter with the exact volume of `cell ∩ B_R`, so boundary cells are
//! fractional and there is no staircase bias in R.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::SpatialKernel;
use crate::solver::SolutionField;

/// One `F_R(t)` value for one replica.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageSample {
    pub r: f64,
    pub t: f64,
    pub value: f64,
    pub replica: u64,
    pub seed: u64,
}

pub fn write_samples_csv<W: Write>(mut w: W, samples: &[AverageSample]) -> Result<()> {
    writeln!(w, "R,t,replica,seed,value")?;
    for s in samples {
        writeln!(w, "{},{},{},{},{}", s.r, s.t, s.replica, s.seed, s.value)?;
    }
    Ok(())
}

/// Bounded Lipschitz test functions for ergodic averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Probe {
    /// `v ↦ v − 1`
    Centered,
    /// `v ↦ tanh(v − 1)`
    Tanh,
    /// `v ↦ sin v`
    Sine,
    /// `v ↦ 1`, a normalisation check
    One,
}

impl Probe {
    pub fn eval(&self, v: f64) -> f64 {
        match self {
            Probe::Centered => v - 1.0,
            Probe::Tanh => (v - 1.0).tanh(),
            Probe::Sine => v.sin(),
            Probe::One => 1.0,
        }
    }
    pub fn lipschitz(&self) -> f64 {
        match self {
            Probe::One => 0.0,
            _ => 1.0,
        }
    }
}

/// `∫_0^u √(R²−s²) ds`.
fn half_chord_primitive(r: f64, u: f64) -> f64 {
    let u = u.clamp(-r, r);
    0.5 * (u * (r * r - u * u).max(0.0).sqrt() + r * r * (u / r).clamp(-1.0, 1.0).asin())
}

/// Area of `B_R ∩ {u ≤ x, v ≤ y}`.
fn disc_corner_area(r: f64, x: f64, y: f64) -> f64 {
    let xe = x.clamp(-r, r);
    let full = |a: f64, b: f64| {
        if b > a {
            2.0 * (half_chord_primitive(r, b) - half_chord_primitive(r, a))
        } else {
            0.0
        }
    };
    if y >= r {
        return full(-r, xe);
    }
    if y <= -r {
        return 0.0;
    }
    let us = (r * r - y * y).sqrt();
    let mut area = 0.0;
    // |u| < us: the vertical chord is cut at y
    let (a, b) = (-us, xe.min(us));
    if b > a {
        area += y * (b - a) + 0.5 * full(a, b);
    }
    if y > 0.0 {
        area += full(-r, xe.min(-us));
        area += full(us, xe);
    }
    area
}

/// Area of `B_R ∩ [x0,x1]×[y0,y1]`.
pub fn disc_rect_area(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    (disc_corner_area(r, x1, y1) - disc_corner_area(r, x0, y1) - disc_corner_area(r, x1, y0)
        + disc_corner_area(r, x0, y0))
    .max(0.0)
}

/// Sparse cell weights `|cell_j ∩ B_R|` for one grid and radius.
#[derive(Debug, Clone, PartialEq)]
pub struct BallWeights {
    r: f64,
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl BallWeights {
    /// Weights without the light-cone domain check.
    pub fn new(grid: &Grid, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!("R must be positive, got {r}")));
        }
        let dx = grid.dx();
        let n = grid.n();
        let span = (r / dx).ceil() as usize + 1;
        let o = grid.origin_axis();
        let lo = o.saturating_sub(span);
        let hi = (o + span).min(n - 1);
        let mut entries = Vec::new();
        match grid.dim() {
            1 => {
                for i in lo..=hi {
                    let c = grid.axis_coord(i);
                    let w = ((c + 0.5 * dx).min(r) - (c - 0.5 * dx).max(-r)).max(0.0);
                    if w > 0.0 {
                        entries.push((i, w));
                    }
                }
            }
            _ => {
                for i in lo..=hi {
                    let a = grid.axis_coord(i);
                    for j in lo..=hi {
                        let b = grid.axis_coord(j);
                        let w = disc_rect_area(r, a - 0.5 * dx, a + 0.5 * dx, b - 0.5 * dx, b + 0.5 * dx)
                            .min(dx * dx);
                        if w > 0.0 {
                            entries.push((i * n + j, w));
                        }
                    }
                }
            }
        }
        Ok(Self {
            r,
            dim: grid.dim(),
            entries,
        })
    }

    /// Weights after checking that the ball and its light cone up to the
    /// grid's final time stay inside the box.
    pub fn checked(grid: &Grid, kernel: &SpatialKernel, r: f64) -> Result<Self> {
        let limit = grid.max_radius(grid.final_time(), kernel);
        if r > limit + 1e-9 {
            return Err(Error::BallExceedsDomain { radius: r, limit });
        }
        Self::new(grid, r)
    }

    pub fn radius(&self) -> f64 {
        self.r
    }
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }
    pub fn volume(&self) -> f64 {
        neumaier(self.entries.iter().map(|e| e.1))
    }

    /// `Σ_j (u_j − 1)·|cell_j ∩ B_R|`.
    pub fn centered_integral(&self, u: &[f64]) -> f64 {
        neumaier(self.entries.iter().map(|&(j, w)| (u[j] - 1.0) * w))
    }

    /// `R^{-d} Σ_j g(u_j)·|cell_j ∩ B_R|`.
    pub fn probe_mean(&self, u: &[f64], g: Probe) -> f64 {
        neumaier(self.entries.iter().map(|&(j, w)| g.eval(u[j]) * w)) / self.r.powi(self.dim as i32)
    }
}

/// Compensated summation.
pub fn neumaier<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// `F_R(t) = ∫_{B_R} (u(t,x) − 1) dx` at time index `t_index`.
pub fn f_r(solution: &SolutionField, r: f64, t_index: usize) -> Result<f64> {
    let w = BallWeights::checked(solution.grid(), solution.kernel(), r)?;
    check_time(solution, t_index)?;
    Ok(w.centered_integral(solution.slice(t_index)))
}

/// `R^{-d} ∫_{B_R} g(u(t,x)) dx`.
pub fn ergodic_average(solution: &SolutionField, g: Probe, r: f64, t_index: usize) -> Result<f64> {
    let w = BallWeights::checked(solution.grid(), solution.kernel(), r)?;
    check_time(solution, t_index)?;
    Ok(w.probe_mean(solution.slice(t_index), g))
}

fn check_time(solution: &SolutionField, t_index: usize) -> Result<()> {
    let len = solution.grid().n_steps() + 1;
    if t_index >= len {
        return Err(Error::IndexOutOfRange { index: t_index, len });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;
    use crate::noise::{sample_increments, NoiseIncrements};
    use crate::sigma::SigmaSpec;
    use crate::solver::solve_spectral;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn kernel(d: usize) -> SpatialKernel {
        SpatialKernel::new(KernelFamily::Gaussian, 0.5, 1.0, d).unwrap()
    }

    #[test]
    fn disc_area_pieces() {
        let r = 1.3;
        assert!((disc_rect_area(r, -2.0, 2.0, -2.0, 2.0) - PI * r * r).abs() < 1e-12);
        assert!((disc_rect_area(r, 0.0, 2.0, 0.0, 2.0) - PI * r * r / 4.0).abs() < 1e-12);
        assert!((disc_rect_area(r, -2.0, 2.0, 0.0, 2.0) - PI * r * r / 2.0).abs() < 1e-12);
        assert_eq!(disc_rect_area(r, 1.0, 2.0, 1.0, 2.0), 0.0);
        assert!((disc_rect_area(r, -0.1, 0.1, -0.2, 0.3) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn disc_area_matches_monte_carlo_grid() {
        let (r, x0, x1, y0, y1) = (1.0, 0.4, 0.95, -0.3, 0.8);
        let n = 2000;
        let mut hits = 0usize;
        for i in 0..n {
            for j in 0..n {
                let x = x0 + (i as f64 + 0.5) * (x1 - x0) / n as f64;
                let y = y0 + (j as f64 + 0.5) * (y1 - y0) / n as f64;
                if x * x + y * y < r * r {
                    hits += 1;
                }
            }
        }
        let brute = hits as f64 / (n * n) as f64 * (x1 - x0) * (y1 - y0);
        assert!((disc_rect_area(r, x0, x1, y0, y1) - brute).abs() < 1e-5);
    }

    #[test]
    fn probe_one_gives_ball_constant() {
        let g1 = Grid::new(1, 12.8, 256, 0.05, 4).unwrap();
        let w1 = BallWeights::new(&g1, 3.33).unwrap();
        assert!((w1.probe_mean(&vec![1.0; 256], Probe::One) - 2.0).abs() < 1e-12);
        let g2 = Grid::new(2, 6.4, 128, 0.05, 4).unwrap();
        let w2 = BallWeights::new(&g2, 2.17).unwrap();
        assert!((w2.probe_mean(&vec![1.0; 128 * 128], Probe::One) - PI).abs() < 1e-6);
    }

    #[test]
    fn constant_solution_has_zero_average() {
        let k = kernel(1);
        let g = Grid::auto(&k, 4.0, 1.0, 0.1, 0.05).unwrap();
        let z = NoiseIncrements::zeros(g, k);
        let sol = solve_spectral(&k, &g, &SigmaSpec::identity(), &z).unwrap();
        assert_eq!(f_r(&sol, 4.0, g.n_steps()).unwrap(), 0.0);
        assert_eq!(ergodic_average(&sol, Probe::Centered, 4.0, g.n_steps()).unwrap(), 0.0);
    }

    #[test]
    fn initial_time_average_is_zero_and_domain_checked() {
        let k = kernel(2);
        let g = Grid::auto(&k, 2.0, 0.5, 0.1, 0.05).unwrap();
        let noise = sample_increments(&k, &g, 3).unwrap();
        let sol = solve_spectral(&k, &g, &SigmaSpec::identity(), &noise).unwrap();
        assert_eq!(f_r(&sol, 2.0, 0).unwrap(), 0.0);
        assert!(matches!(
            f_r(&sol, 100.0, 1),
            Err(Error::BallExceedsDomain { .. })
        ));
    }

    #[test]
    fn nested_balls_and_linearity() {
        let k = kernel(1);
        let g = Grid::auto(&k, 6.0, 1.0, 0.05, 0.025).unwrap();
        let noise = sample_increments(&k, &g, 8).unwrap();
        let sol = solve_spectral(&k, &g, &SigmaSpec::additive(1.0).unwrap(), &noise).unwrap();
        let n = g.n_steps();
        let u = sol.slice(n);
        let (r1, r2) = (3.0, 5.5);
        let a = f_r(&sol, r1, n).unwrap();
        let b = f_r(&sol, r2, n).unwrap();
        let max_dev = u.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        assert!((b - a).abs() <= 2.0 * (r2 - r1) * max_dev + 1e-12);
        let w = BallWeights::new(&g, r2).unwrap();
        let scaled: Vec<f64> = u.iter().map(|v| 1.0 + 2.5 * (v - 1.0)).collect();
        assert!((w.centered_integral(&scaled) - 2.5 * b).abs() < 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn samples_csv_header() {
        let mut out = Vec::new();
        write_samples_csv(
            &mut out,
            &[AverageSample { r: 1.0, t: 0.5, value: 0.25, replica: 3, seed: 9 }],
        )
        .unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "R,t,replica,seed,value\n1,0.5,3,9,0.25\n");
    }

    proptest! {
        #[test]
        fn weights_bounded_by_cell_volume(r in 0.05f64..3.0) {
            let g = Grid::new(2, 3.2, 64, 0.1, 1).unwrap();
            let w = BallWeights::new(&g, r).unwrap();
            for &(_, v) in w.entries() {
                prop_assert!(v > 0.0 && v <= g.cell_volume() * (1.0 + 1e-12));
            }
            prop_assert!((w.volume() - PI * r * r).abs() < 1e-10);
        }

        #[test]
        fn rect_area_additive(x0 in -2.0f64..0.0, xm in 0.0f64..1.0, x1 in 1.0f64..2.0,
                              y0 in -2.0f64..0.0, y1 in 0.0f64..2.0) {
            let whole = disc_rect_area(1.5, x0, x1, y0, y1);
            let parts = disc_rect_area(1.5, x0, xm, y0, y1) + disc_rect_area(1.5, xm, x1, y0, y1);
            prop_assert!((whole - parts).abs() < 1e-12);
        }
    }
}
