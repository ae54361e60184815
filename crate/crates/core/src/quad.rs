//! One-dimensional adaptive quadrature.
//!
//! Globally adaptive Gauss-Kronrod (7/15) on finite intervals, adaptive
//! Simpson for cheap angular integrands, and a panel-marching driver for
//! semi-infinite integrals whose tail is controlled by a caller-supplied
//! majorant.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Integrate `f` over `[a, b]` until the estimated error is below
/// `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_evals: usize,
) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut segments = vec![{
        let (v, e) = gk15(&f, a, b);
        (a, b, v, e)
    }];
    let mut evals = 15;
    loop {
        let value: f64 = segments.iter().map(|s| s.2).sum();
        let error: f64 = segments.iter().map(|s| s.3).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Quadrature {
                value,
                error,
                evaluations: evals,
            });
        }
        if evals + 30 > max_evals {
            return Err(Error::QuadratureBudgetExceeded { evaluations: evals });
        }
        let (idx, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = segments.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        evals += 30;
        segments.push((lo, mid, v1, e1));
        segments.push((mid, hi, v2, e2));
    }
}

/// Integrate over `[a, b]` split at the given interior breakpoints.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_evals: usize,
) -> Result<Quadrature> {
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let pieces = (pts.len() - 1).max(1) as f64;
    let mut total = Quadrature {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    for w in pts.windows(2) {
        let q = integrate(
            &f,
            w[0],
            w[1],
            abs_tol / pieces,
            rel_tol,
            max_evals.saturating_sub(total.evaluations),
        )?;
        total.value += q.value;
        total.error += q.error;
        total.evaluations += q.evaluations;
    }
    Ok(total)
}

/// Adaptive Simpson rule with a recursion depth cap.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_evals: usize,
) -> Result<Quadrature> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut evals = 3;
    let mut err = 0.0;
    let value = simpson_rec(
        f, a, b, fa, fm, fb, whole, tol, 48, &mut evals, max_evals, &mut err,
    )?;
    Ok(Quadrature {
        value,
        error: err,
        evaluations: evals,
    })
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evals: &mut usize,
    max_evals: usize,
    err: &mut f64,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    *evals += 2;
    if *evals > max_evals {
        return Err(Error::QuadratureBudgetExceeded { evaluations: *evals });
    }
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        *err += delta.abs() / 15.0;
        return Ok(left + right + delta / 15.0);
    }
    let l = simpson_rec(
        f,
        a,
        m,
        fa,
        flm,
        fm,
        left,
        0.5 * tol,
        depth - 1,
        evals,
        max_evals,
        err,
    )?;
    let r = simpson_rec(
        f,
        m,
        b,
        fm,
        frm,
        fb,
        right,
        0.5 * tol,
        depth - 1,
        evals,
        max_evals,
        err,
    )?;
    Ok(l + r)
}

/// Semi-infinite integral over `[a, ∞)` by marching panels of width
/// `panel` until `tail(x)` (an upper bound on `∫_x^∞ |f|`) falls below
/// the tolerance. Returns the value and the final tail bound.
pub fn integrate_to_infinity<F, T>(
    f: F,
    a: f64,
    panel: f64,
    tail: T,
    abs_tol: f64,
    rel_tol: f64,
    max_evals: usize,
) -> Result<(Quadrature, f64)>
where
    F: Fn(f64) -> f64,
    T: Fn(f64) -> f64,
{
    let mut total = Quadrature {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    let mut x = a;
    // panels double in width once the integrand is far into its tail
    let mut width = panel;
    let mut count = 0usize;
    loop {
        let tb = tail(x);
        let target = abs_tol.max(rel_tol * total.value.abs());
        if tb <= 0.5 * target && count > 0 {
            return Ok((total, tb));
        }
        if total.evaluations >= max_evals {
            return Err(Error::NonConvergent(format!(
                "tail bound {tb:e} above tolerance {target:e} after {} evaluations",
                total.evaluations
            )));
        }
        // far panels only need accuracy relative to what is already summed
        let panel_tol = abs_tol.max(0.05 * rel_tol * total.value.abs()) / (1.0 + count as f64);
        let q = integrate(
            &f,
            x,
            x + width,
            panel_tol.max(1e-300),
            rel_tol * 0.25,
            max_evals - total.evaluations,
        )?;
        total.value += q.value;
        total.error += q.error;
        total.evaluations += q.evaluations;
        x += width;
        count += 1;
        if count % 16 == 0 {
            width *= 2.0;
        }
    }
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
/// Returns `(argmin, min)`.
pub fn golden_section<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> (f64, f64) {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol * (a.abs() + b.abs()).max(1e-12) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Fixed Gauss-Legendre rule on `[a, b]` with `n` composite panels of
/// 2-point rules; exact for piecewise cubics aligned with the panels.
pub fn gauss2_composite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let g = 0.5 / 3f64.sqrt();
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let c = a + (i as f64 + 0.5) * h;
            f(c - g * h) + f(c + g * h)
        })
        .sum::<f64>()
        * 0.5
        * h
}
