//! Thin wrapper over `rustfft` for periodic fields in one or two
//! dimensions. Transforms are unnormalised in both directions.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct FieldFft {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FieldFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldFft")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .finish()
    }
}

/// Per-thread scratch space.
#[derive(Debug, Default, Clone)]
pub struct FftScratch {
    scratch: Vec<Complex64>,
    transpose: Vec<Complex64>,
}

impl FieldFft {
    pub fn new(dim: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dim,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn scratch(&self) -> FftScratch {
        let s = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        FftScratch {
            scratch: vec![Complex64::default(); s],
            transpose: if self.dim == 2 {
                vec![Complex64::default(); self.len()]
            } else {
                Vec::new()
            },
        }
    }

    pub fn forward(&self, buf: &mut [Complex64], work: &mut FftScratch) {
        self.run(&self.forward, buf, work);
    }

    pub fn inverse(&self, buf: &mut [Complex64], work: &mut FftScratch) {
        self.run(&self.inverse, buf, work);
    }

    fn run(&self, plan: &Arc<dyn Fft<f64>>, buf: &mut [Complex64], work: &mut FftScratch) {
        debug_assert_eq!(buf.len(), self.len());
        plan.process_with_scratch(buf, &mut work.scratch);
        if self.dim == 2 {
            let n = self.n;
            transpose(buf, &mut work.transpose, n);
            plan.process_with_scratch(&mut work.transpose, &mut work.scratch);
            transpose(&work.transpose, buf, n);
        }
    }

    /// Angular wavenumber magnitudes `|ξ_k|` in FFT ordering for a box of
    /// side `2·half_width`.
    pub fn wavenumbers(&self, half_width: f64) -> Vec<f64> {
        let base = std::f64::consts::PI / half_width;
        let axis: Vec<f64> = (0..self.n)
            .map(|k| {
                let kk = if k <= self.n / 2 { k as f64 } else { k as f64 - self.n as f64 };
                kk * base
            })
            .collect();
        match self.dim {
            1 => axis.iter().map(|v| v.abs()).collect(),
            _ => {
                let mut out = Vec::with_capacity(self.len());
                for a in &axis {
                    for b in &axis {
                        out.push(a.hypot(*b));
                    }
                }
                out
            }
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const B: usize = 16;
    for ib in (0..n).step_by(B) {
        for jb in (0..n).step_by(B) {
            for i in ib..(ib + B).min(n) {
                for j in jb..(jb + B).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}
