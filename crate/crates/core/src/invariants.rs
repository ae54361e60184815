//! Cross-module invariants checked through the public API.

use proptest::prelude::*;

use crate::noise::wrapped_gamma;
use crate::stats::experiments::Resolution;
use crate::stats::{shape_moments, ReplicaFarm};
use crate::{
    clt_experiment, sample_increments, smoothed_derivative, with_threads, DerivativeProbe, Grid, KernelFamily,
    SigmaFamily, SigmaSpec, SpatialKernel,
};

const FAMILIES: [(KernelFamily, usize); 5] = [
    (KernelFamily::Triangle, 1),
    (KernelFamily::Gaussian, 1),
    (KernelFamily::Exponential, 1),
    (KernelFamily::Gaussian, 2),
    (KernelFamily::Exponential, 2),
];

fn kernel(i: usize, scale: f64) -> SpatialKernel {
    let (f, d) = FAMILIES[i];
    SpatialKernel::new(f, scale, 1.5, d).unwrap()
}

proptest! {
    #[test]
    fn kernel_is_maximal_at_origin(i in 0usize..5, scale in 0.1f64..5.0, x in -10.0f64..10.0, y in -10.0f64..10.0) {
        let k = kernel(i, scale);
        let p: Vec<f64> = if k.dim() == 1 { vec![x] } else { vec![x, y] };
        let g = k.gamma_at(&p);
        prop_assert!(g >= 0.0);
        prop_assert!(g <= k.gamma_at(&vec![0.0; k.dim()]));
    }

    #[test]
    fn kernel_is_positive_definite(
        i in 0usize..5,
        scale in 0.2f64..3.0,
        pts in prop::collection::vec((-4.0f64..4.0, -4.0f64..4.0, -1.0f64..1.0), 2..12),
    ) {
        let k = kernel(i, scale);
        let mut q = 0.0;
        let mut norm = 0.0;
        for a in &pts {
            norm += a.2 * a.2;
            for b in &pts {
                let d = if k.dim() == 1 { vec![a.0 - b.0] } else { vec![a.0 - b.0, a.1 - b.1] };
                q += a.2 * b.2 * k.gamma_at(&d);
            }
        }
        prop_assert!(q >= -1e-9 * norm);
    }

    #[test]
    fn spectral_density_is_nonnegative(i in 0usize..5, scale in 0.1f64..5.0, xi in -50.0f64..50.0) {
        let k = kernel(i, scale);
        let p: Vec<f64> = if k.dim() == 1 { vec![xi] } else { vec![xi, 0.5 * xi] };
        prop_assert!(k.spectral_density(&p) >= 0.0);
    }
}

#[test]
fn spectral_density_at_zero_is_the_integral() {
    for i in 0..5 {
        let k = kernel(i, 0.7);
        // radial quadrature of ∫γ with a plain composite rule on a long range
        let n = 200_000;
        let top = 60.0 * 0.7;
        let h = top / n as f64;
        let mut s = 0.0;
        for j in 0..n {
            let r = (j as f64 + 0.5) * h;
            let shell = if k.dim() == 1 { 2.0 } else { 2.0 * std::f64::consts::PI * r };
            s += shell * k.gamma_radial(r) * h;
        }
        let zero = vec![0.0; k.dim()];
        assert!((k.spectral_density(&zero) - s).abs() <= 1e-6 * s, "kernel {i}: {} vs {s}", k.spectral_density(&zero));
    }
}

#[test]
fn frak_m_is_nondecreasing_in_time() {
    for i in 0..5 {
        let k = kernel(i, 1.0);
        let vals: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0].iter().map(|&t| k.frak_m(t).unwrap()).collect();
        for w in vals.windows(2) {
            assert!(w[1] >= w[0] * (1.0 - 1e-9), "kernel {i}: {vals:?}");
        }
    }
}

#[test]
fn noise_covariance_matches_kernel() {
    let k = SpatialKernel::new(KernelFamily::Exponential, 0.4, 1.0, 1).unwrap();
    let grid = Grid::new(1, 3.2, 64, 0.01, 2).unwrap();
    let probes: Vec<usize> = (0..16).map(|i| 20 + 2 * i).collect();
    let replicas = 10_000;
    let mut sum = vec![0.0; 256];
    let mut sq = vec![0.0; 256];
    for r in 0..replicas {
        let noise = sample_increments(&k, &grid, r as u64).unwrap();
        let w = noise.step(0);
        for (a, &i) in probes.iter().enumerate() {
            for (b, &j) in probes.iter().enumerate() {
                let p = w[i] * w[j];
                sum[16 * a + b] += p;
                sq[16 * a + b] += p * p;
            }
        }
    }
    let n = replicas as f64;
    let scale = grid.dt() * grid.cell_volume().powi(2);
    for (a, &i) in probes.iter().enumerate() {
        for (b, &j) in probes.iter().enumerate() {
            let m = sum[16 * a + b] / n;
            let se = ((sq[16 * a + b] / n - m * m) / n).sqrt();
            let target = scale * wrapped_gamma(&k, &grid, i, j);
            assert!((m - target).abs() <= 4.0 * se, "({i},{j}): {m} vs {target} ± {se}");
        }
    }
}

#[test]
fn noise_is_independent_of_thread_count() {
    let k = SpatialKernel::new(KernelFamily::Gaussian, 0.5, 1.0, 2).unwrap();
    let grid = Grid::new(2, 3.2, 32, 0.05, 5).unwrap();
    let one = with_threads(1, || sample_increments(&k, &grid, 9).unwrap()).unwrap();
    let four = with_threads(4, || sample_increments(&k, &grid, 9).unwrap()).unwrap();
    assert_eq!(one.values(), four.values());
}

#[test]
fn additive_solution_is_gaussian_at_a_point() {
    let k = SpatialKernel::new(KernelFamily::Triangle, 1.0, 1.0, 1).unwrap();
    let grid = Grid::new(1, 3.2, 64, 0.05, 20).unwrap();
    let farm = ReplicaFarm::new(&k, &SigmaSpec::additive(1.0).unwrap(), &grid).unwrap();
    let o = grid.origin();
    let rows = farm.run(10_000, 17, &[grid.n_steps()], |_, u| u[o] - 1.0).unwrap();
    let xs: Vec<f64> = rows.into_iter().map(|r| r[0]).collect();
    let m = shape_moments(&xs).unwrap();
    assert!(m.skewness.abs() <= 4.0 * m.skewness_se, "{m:?}");
    assert!(m.excess_kurtosis.abs() <= 4.0 * m.kurtosis_se, "{m:?}");
}

#[test]
fn derivative_is_symmetric_about_the_observation_point() {
    let k = SpatialKernel::new(KernelFamily::Triangle, 0.5, 1.0, 1).unwrap();
    let grid = Grid::new(1, 3.2, 128, 0.025, 20).unwrap();
    let x = grid.origin();
    for off in [4usize, 12] {
        let est = |y: usize| {
            let probe = DerivativeProbe::new(&k, 4, 20, y, x, 300, 2.0);
            smoothed_derivative(&k, &grid, &SigmaSpec::identity(), &probe, 5).unwrap()
        };
        let (a, b) = (est(x + off), est(x - off));
        let se = a.se.hypot(b.se);
        assert!((a.estimate - b.estimate).abs() <= 4.0 * se, "{} vs {} ± {se}", a.estimate, b.estimate);
    }
}

#[test]
fn limit_variance_is_strictly_positive() {
    let k = SpatialKernel::new(KernelFamily::Gaussian, 0.5, 1.0, 1).unwrap();
    let sigma = SigmaSpec::new(SigmaFamily::Sine { amplitude: 1.0, frequency: 1.0 }).unwrap();
    let res = Resolution { dx: 0.1, dt: 0.05 };
    let report = clt_experiment(&k, &sigma, 1.0, &[1.0, 2.0, 4.0], 300, 3, res).unwrap();
    for r in &report.records {
        assert!(r.sigma2 > 4.0 * r.sigma2_se, "R={}: {} ± {}", r.r, r.sigma2, r.sigma2_se);
    }
}
