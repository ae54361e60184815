//! Fundamental solutions of the wave equation and the deterministic
//! integrals built from them.
//!
//! In d = 2 the kernel `G_t(x) = (2π√(t²−|x|²))⁻¹` is unbounded on the
//! light cone, so every integral of it goes through polar coordinates with
//! the exact radial antiderivative `∫_0^a r(t²−r²)^{-1/2} dr = t − √(t²−a²)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, SpatialKernel};
use crate::quad;

const ANGULAR_BUDGET: usize = 400_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreenSpec {
    dim: usize,
}

impl GreenSpec {
    pub fn new(dim: usize) -> Result<Self> {
        match dim {
            1 | 2 => Ok(Self { dim }),
            d => Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {d}"))),
        }
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `G_t(x)`; zero on and outside the light cone and for `t ≤ 0`.
pub fn green(spec: GreenSpec, t: f64, x: &[f64]) -> f64 {
    let r = norm(x);
    if !(t > 0.0) || r >= t {
        return 0.0;
    }
    match spec.dim {
        1 => 0.5,
        _ => 1.0 / (2.0 * PI * ((t - r) * (t + r)).sqrt()),
    }
}

/// `∫_0^a r/(2π√(τ²−r²)) dr` with `a` clamped to `[0, τ]`.
fn radial_mass(tau: f64, a: f64) -> f64 {
    let a = a.clamp(0.0, tau);
    (tau - ((tau - a) * (tau + a)).sqrt()) / (2.0 * PI)
}

/// Range of `r ≥ 0` with `p + r·e` inside the box, if any.
fn ray_box(p: [f64; 2], e: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> Option<(f64, f64)> {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for i in 0..2 {
        if e[i].abs() < 1e-300 {
            if p[i] < lo[i] || p[i] > hi[i] {
                return None;
            }
        } else {
            let a = (lo[i] - p[i]) / e[i];
            let b = (hi[i] - p[i]) / e[i];
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    (t1 > t0).then_some((t0, t1))
}

/// `∫_cell G_t(x) dx` over an axis-aligned box given as `[(lo, hi); d]`.
pub fn green_cell_integral(spec: GreenSpec, t: f64, cell: &[(f64, f64)]) -> Result<f64> {
    if cell.len() != spec.dim || cell.iter().any(|(a, b)| !(b > a)) {
        return Err(Error::InvalidParameter("degenerate or mismatched cell".into()));
    }
    if !(t > 0.0) {
        return Ok(0.0);
    }
    if spec.dim == 1 {
        let (a, b) = cell[0];
        return Ok(0.5 * (b.min(t) - a.max(-t)).max(0.0));
    }
    let lo = [cell[0].0, cell[1].0];
    let hi = [cell[0].1, cell[1].1];
    // nearest point of the box to the origin
    let near = [0.0f64.clamp(lo[0], hi[0]), 0.0f64.clamp(lo[1], hi[1])];
    if norm(&near) >= t {
        return Ok(0.0);
    }
    let corners = [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
    let contains = near == [0.0, 0.0];
    let integrand = |theta: f64| {
        let e = [theta.cos(), theta.sin()];
        match ray_box([0.0, 0.0], e, lo, hi) {
            Some((r0, r1)) => radial_mass(t, r1) - radial_mass(t, r0),
            None => 0.0,
        }
    };
    let mut breaks: Vec<f64>;
    let (a, b);
    if contains {
        a = 0.0;
        b = 2.0 * PI;
        breaks = corners
            .iter()
            .map(|c| c[1].atan2(c[0]).rem_euclid(2.0 * PI))
            .collect();
    } else {
        let centre = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        let base = centre[1].atan2(centre[0]);
        let rel: Vec<f64> = corners
            .iter()
            .map(|c| {
                let mut d = c[1].atan2(c[0]) - base;
                while d > PI {
                    d -= 2.0 * PI;
                }
                while d < -PI {
                    d += 2.0 * PI;
                }
                d
            })
            .collect();
        a = base + rel.iter().copied().fold(f64::INFINITY, f64::min);
        b = base + rel.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        breaks = rel.iter().map(|d| base + d).collect();
    }
    breaks.push(a);
    breaks.push(b);
    breaks.retain(|x| *x >= a && *x <= b);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut total = 0.0;
    let mut used = 0;
    for w in breaks.windows(2) {
        if w[1] - w[0] < 1e-15 {
            continue;
        }
        let q = quad::adaptive_simpson(&integrand, w[0], w[1], 1e-12, ANGULAR_BUDGET - used)?;
        used += q.evaluations;
        total += q.value;
    }
    Ok(total)
}

/// `φ_{t,R}(s,y) = ∫_{B_R} G_{t−s}(x−y) dx`.
pub fn phi(spec: GreenSpec, t: f64, r: f64, s: f64, y: &[f64]) -> Result<f64> {
    if !(r > 0.0) || !(s >= 0.0) || !(s < t) {
        return Err(Error::InvalidParameter(format!(
            "phi needs R > 0 and 0 <= s < t (R={r}, s={s}, t={t})"
        )));
    }
    let tau = t - s;
    if spec.dim == 1 {
        let y = y[0];
        return Ok(0.5 * ((y + tau).min(r) - (y - tau).max(-r)).max(0.0));
    }
    let d = norm(y);
    if d >= r + tau {
        return Ok(0.0);
    }
    if d + tau <= r {
        return Ok(tau);
    }
    let c = d * d - r * r;
    let chord = |theta: f64| {
        let b = y[0] * theta.cos() + y[1] * theta.sin();
        let disc = b * b - c;
        if disc <= 0.0 {
            return 0.0;
        }
        let sq = disc.sqrt();
        let r1 = -b + sq;
        let r0 = (-b - sq).max(0.0);
        if r1 <= r0 {
            0.0
        } else {
            radial_mass(tau, r1) - radial_mass(tau, r0)
        }
    };
    let tol = 1e-6 * tau * 1e-2;
    if d < r {
        let q = quad::adaptive_simpson(&chord, 0.0, 2.0 * PI, tol, ANGULAR_BUDGET)?;
        Ok(q.value)
    } else {
        // rays from outside the disc meet it within the tangent cone
        let base = (-y[1]).atan2(-y[0]);
        let half = (r / d).min(1.0).asin();
        let q = quad::adaptive_simpson(&chord, base - half, base + half, tol, ANGULAR_BUDGET)?;
        Ok(q.value)
    }
}

/// `∫ sin²(t|ξ|)/|ξ|² μ(dξ)`, which equals `∫∫ G_t(y)G_t(z)γ(y−z) dy dz`.
pub fn spectral_variance(kernel: &SpatialKernel, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    let w = |r: f64| {
        if r * t < 1e-6 {
            t * t * (1.0 - (r * t).powi(2) / 3.0)
        } else {
            (r * t).sin().powi(2) / (r * r)
        }
    };
    kernel.spectral_integral(w, 0.0, 2, 1e-8).map(|(v, _)| v)
}

/// `Var u(t,x)` for `σ ≡ 1`: `∫_0^t spectral_variance(τ) dτ`, using
/// `∫_0^t sin²(τr) dτ = t/2 − sin(2tr)/(4r)`.
pub fn additive_point_variance(kernel: &SpatialKernel, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    let w = |r: f64| {
        let x = r * t;
        if x < 1e-3 {
            t.powi(3) * (1.0 / 3.0 - x * x / 15.0)
        } else {
            (0.5 * t - (2.0 * x).sin() / (4.0 * r)) / (r * r)
        }
    };
    kernel.spectral_integral(w, 0.0, 2, 1e-8).map(|(v, _)| v)
}

/// Antiderivative of the radial profile along a line, `∫_0^v γ(|w|) dw`.
fn gamma_line_primitive(kernel: &SpatialKernel, v: f64) -> f64 {
    let (a, l) = (kernel.amplitude(), kernel.length_scale());
    let sgn = v.signum();
    let x = v.abs();
    let mag = match kernel.family() {
        KernelFamily::Triangle => {
            let x = x.min(l);
            a * (x - x * x / (2.0 * l))
        }
        KernelFamily::Exponential => a * l * (1.0 - (-x / l).exp()),
        KernelFamily::Gaussian => {
            a * l * (PI / 2.0).sqrt() * statrs::function::erf::erf(x / (l * 2f64.sqrt()))
        }
    };
    sgn * mag
}

/// `(G_τ * γ)(z) = ∫ G_τ(w) γ(z−w) dw`, the response of the linear
/// equation to a point-mass shift of the noise, smoothed by γ.
pub fn smoothed_green(kernel: &SpatialKernel, tau: f64, z: &[f64]) -> Result<f64> {
    if !(tau > 0.0) {
        return Ok(0.0);
    }
    if kernel.dim() == 1 {
        let z = z[0];
        return Ok(0.5 * (gamma_line_primitive(kernel, z + tau) - gamma_line_primitive(kernel, z - tau)));
    }
    let zn = norm(z);
    if zn >= tau + kernel.effective_range() && kernel.family() == KernelFamily::Triangle {
        return Ok(0.0);
    }
    // w = τ sin α (cos θ, sin θ) removes the edge singularity
    let inner = |theta: f64| {
        let (c, s) = (theta.cos(), theta.sin());
        quad::integrate(
            |alpha: f64| {
                let r = tau * alpha.sin();
                let d = (z[0] - r * c).hypot(z[1] - r * s);
                tau * alpha.sin() * kernel.gamma_radial(d)
            },
            0.0,
            PI / 2.0,
            1e-13,
            1e-9,
            20_000,
        )
        .map(|q| q.value)
        .unwrap_or(f64::NAN)
    };
    let q = quad::integrate(inner, 0.0, 2.0 * PI, 1e-12, 1e-8, 20_000)?;
    if !q.value.is_finite() {
        return Err(Error::QuadratureBudgetExceeded { evaluations: 20_000 });
    }
    Ok(q.value / (2.0 * PI))
}

/// `c²∫_0^{t1∧t2} ∫∫ φ_{t1,R}(s,y) φ_{t2,R}(s,y') γ(y−y') dy dy' ds`, the
/// covariance of `F_R(t1)` and `F_R(t2)` for constant σ ≡ c (d = 1).
///
/// The spatial double integral is a trapezoid sum on a grid of spacing
/// `h`; φ is piecewise linear so the error is O(h²).
pub fn average_covariance_oracle(
    kernel: &SpatialKernel,
    c: f64,
    t1: f64,
    t2: f64,
    r: f64,
    h: f64,
) -> Result<f64> {
    if kernel.dim() != 1 {
        return Err(Error::DimensionUnsupported(kernel.dim()));
    }
    if !(r > 0.0) || !(h > 0.0) {
        return Err(Error::InvalidParameter("R and h must be positive".into()));
    }
    let tmin = t1.min(t2);
    if !(tmin > 0.0) {
        return Ok(0.0);
    }
    let tmax = t1.max(t2);
    let reach = kernel.effective_range();
    let half = r + tmax + reach;
    let m = (2.0 * half / h).ceil() as usize + 1;
    let ys: Vec<f64> = (0..m).map(|i| -half + i as f64 * h).collect();
    let band = (reach / h).ceil() as usize + 1;
    let gam: Vec<f64> = (0..=band).map(|k| kernel.gamma_radial(k as f64 * h)).collect();
    let spec = GreenSpec { dim: 1 };
    // Gauss-Legendre in s; the integrand is piecewise polynomial in s
    let nodes = gauss_legendre(24);
    let mut total = 0.0;
    let pieces = 8;
    for piece in 0..pieces {
        let a = tmin * piece as f64 / pieces as f64;
        let b = tmin * (piece + 1) as f64 / pieces as f64;
        for &(x, w) in &nodes {
            let s = 0.5 * (a + b) + 0.5 * (b - a) * x;
            let p1: Vec<f64> = ys.iter().map(|&y| phi(spec, t1, r, s, &[y]).unwrap_or(0.0)).collect();
            let p2: Vec<f64> = if t1 == t2 {
                p1.clone()
            } else {
                ys.iter().map(|&y| phi(spec, t2, r, s, &[y]).unwrap_or(0.0)).collect()
            };
            let mut acc = 0.0;
            for i in 0..m {
                if p1[i] == 0.0 {
                    continue;
                }
                let lo = i.saturating_sub(band);
                let hi = (i + band).min(m - 1);
                let mut inner = 0.0;
                for j in lo..=hi {
                    inner += p2[j] * gam[i.abs_diff(j)];
                }
                acc += p1[i] * inner;
            }
            total += 0.5 * (b - a) * w * acc * h * h;
        }
    }
    Ok(c * c * total)
}

/// Gauss-Legendre nodes and weights on [−1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}
