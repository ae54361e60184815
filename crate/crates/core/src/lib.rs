//! Simulation of the stochastic wave equation
//! `∂²_t u = Δu + σ(u) Ẇ`, `u(0,·) = 1`, `∂_t u(0,·) = 0`, in one and two
//! space dimensions, driven by noise that is white in time and correlated
//! in space by a kernel γ; plus the Monte Carlo checks built on it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging;
pub mod error;
pub mod fft;
pub mod grid;
pub mod kernels;
pub mod malliavin;
pub mod noise;
pub mod quad;
pub mod rng;
pub mod sigma;
pub mod solver;
pub mod stats;
pub mod waveprop;

#[cfg(test)]
mod invariants;

pub use averaging::{ergodic_average, f_r, AverageSample, BallWeights, Probe};
pub use error::{Error, Result};
pub use grid::Grid;
pub use kernels::{kappa, DalangReport, KernelFamily, SpatialKernel};
pub use malliavin::{
    discrete_smoothed_green, lightcone_support_check, sandwich_report, smoothed_derivative, DerivativeProbe,
};
pub use noise::{sample_field, sample_increments, shift_increments, NoiseIncrements, NoiseSampler};
pub use sigma::{SigmaFamily, SigmaSpec};
pub use solver::{moment_estimate, solve_mild_direct, solve_picard, solve_spectral, Scheme, SolutionField};
pub use stats::{
    clt_experiment, ergodic_decay_scan, fdd_check, ks_to_standard_normal, limit_covariance_target, tightness_scan,
    tv_proxy, CltReport, RateFit,
};
pub use waveprop::{additive_point_variance, green, green_cell_integral, phi, spectral_variance, GreenSpec};

pub use stats::{
    with_threads, CovarianceMode, ErgodicReport, FddReport, RadiusRecord, Resolution,
    TightnessReport,
};
pub use malliavin::{SandwichReport, SandwichRow};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
