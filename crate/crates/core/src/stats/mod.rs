//! Monte Carlo orchestration and statistical checks.

pub mod distance;
pub mod experiments;
pub mod farm;
pub mod fit;
pub mod report;

pub use distance::{gaussian_ks_baseline, ks_to_standard_normal, shape_moments, tv_proxy, ShapeMoments};
pub use experiments::{
    clt_experiment, ergodic_decay_scan, fdd_check, limit_covariance_target, tightness_scan, CovarianceMode,
    ErgodicReport, FddReport, Resolution, TightnessReport,
};
pub use farm::{with_threads, ReplicaFarm};
pub use fit::RateFit;
pub use report::{CltReport, RadiusRecord};
