//! Run configuration: TOML with dotted sections, e.g.
//!
//! ```toml
//! experiment = "clt"
//! dimension = 1
//! seed = 7
//! r_list = [4.0, 8.0, 16.0]
//! t_list = [1.0]
//! kernel.family = "triangle"
//! kernel.length_scale = 1.0
//! sigma.family = "identity"
//! grid.dx = 0.05
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use swl_core::{KernelFamily, Probe, Resolution, Scheme, SigmaFamily, SigmaSpec, SpatialKernel};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    Clt,
    Fdd,
    Tightness,
    Ergodic,
    Malliavin,
    KernelCheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Clt => "clt",
            Experiment::Fdd => "fdd",
            Experiment::Tightness => "tightness",
            Experiment::Ergodic => "ergodic",
            Experiment::Malliavin => "malliavin",
            Experiment::KernelCheck => "kernel-check",
        }
    }

    pub fn has_plot(self) -> bool {
        matches!(
            self,
            Experiment::Clt | Experiment::Tightness | Experiment::Ergodic | Experiment::Malliavin
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub length_scale: f64,
    pub amplitude: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            family: KernelFamily::Triangle,
            length_scale: 1.0,
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub dx: f64,
    pub dt: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { dx: 0.05, dt: 0.025 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TightnessConfig {
    pub s: f64,
    pub gaps: Vec<f64>,
    pub r: f64,
}

impl Default for TightnessConfig {
    fn default() -> Self {
        Self {
            s: 1.0,
            gaps: vec![0.05, 0.1, 0.2, 0.4],
            r: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErgodicConfig {
    pub probe: Probe,
}

impl Default for ErgodicConfig {
    fn default() -> Self {
        Self { probe: Probe::Centered }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MalliavinConfig {
    pub p: f64,
    /// Number of source times, spread evenly over `[0, t)`.
    pub sources: usize,
    /// Number of points per source time across the closed light cone.
    pub points: usize,
    pub scheme: Scheme,
}

impl Default for MalliavinConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            sources: 4,
            points: 4,
            scheme: Scheme::Spectral,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub experiment: Experiment,
    pub dimension: usize,
    pub seed: u64,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
    pub replicas: usize,
    pub r_list: Vec<f64>,
    /// Observation times; single-time experiments use the last entry.
    pub t_list: Vec<f64>,
    pub out: Option<String>,
    pub kernel: KernelConfig,
    pub sigma: SigmaFamily,
    pub grid: GridConfig,
    pub tightness: TightnessConfig,
    pub ergodic: ErgodicConfig,
    pub malliavin: MalliavinConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            experiment: Experiment::Clt,
            dimension: 1,
            seed: 0,
            threads: 0,
            replicas: 400,
            r_list: vec![4.0, 8.0, 16.0],
            t_list: vec![1.0],
            out: None,
            kernel: KernelConfig::default(),
            sigma: SigmaFamily::Identity,
            grid: GridConfig::default(),
            tightness: TightnessConfig::default(),
            ergodic: ErgodicConfig::default(),
            malliavin: MalliavinConfig::default(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn kernel(&self) -> Result<SpatialKernel, CliError> {
        let k = &self.kernel;
        Ok(SpatialKernel::new(k.family, k.length_scale, k.amplitude, self.dimension)?)
    }

    pub fn sigma(&self) -> Result<SigmaSpec, CliError> {
        Ok(SigmaSpec::new(self.sigma)?)
    }

    pub fn resolution(&self) -> Resolution {
        Resolution {
            dx: self.grid.dx,
            dt: self.grid.dt,
        }
    }

    pub fn final_time(&self) -> Result<f64, CliError> {
        self.t_list
            .last()
            .copied()
            .filter(|t| *t > 0.0 && t.is_finite())
            .ok_or_else(|| CliError::Config("t_list must end with a positive time".into()))
    }

    /// Checks everything that does not need a grid, before any compute.
    pub fn validate(&self) -> Result<(SpatialKernel, SigmaSpec), CliError> {
        if !matches!(self.dimension, 1 | 2) {
            return Err(CliError::Config(format!("dimension must be 1 or 2, got {}", self.dimension)));
        }
        let kernel = self.kernel()?;
        let sigma = self.sigma()?;
        if self.experiment == Experiment::KernelCheck {
            return Ok((kernel, sigma));
        }
        self.final_time()?;
        if self.t_list.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(CliError::Config("times must be positive".into()));
        }
        if self.r_list.is_empty() || self.r_list.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(CliError::Config("r_list must hold positive radii".into()));
        }
        if !(self.grid.dx > 0.0) || !(self.grid.dt > 0.0) {
            return Err(CliError::Config("grid.dx and grid.dt must be positive".into()));
        }
        if self.experiment == Experiment::Malliavin && (self.malliavin.sources == 0 || self.malliavin.points < 2) {
            return Err(CliError::Config("malliavin needs sources >= 1 and points >= 2".into()));
        }
        Ok((kernel, sigma))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let mut c = Config {
            sigma: SigmaFamily::Affine { c0: 0.5, c1: -0.25 },
            dimension: 2,
            out: Some("x".into()),
            ..Config::default()
        };
        c.kernel.family = KernelFamily::Gaussian;
        c.malliavin.scheme = Scheme::Picard(4);
        let text = c.to_toml().unwrap();
        let back = Config::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn dotted_keys_parse() {
        let c = Config::parse(
            "experiment = \"tightness\"\nkernel.family = \"gaussian\"\nsigma.family = \"sine\"\n\
             sigma.amplitude = 2.0\nsigma.frequency = 1.0\ntightness.r = 2.5\n",
        )
        .unwrap();
        assert_eq!(c.experiment, Experiment::Tightness);
        assert_eq!(c.kernel.family, KernelFamily::Gaussian);
        assert_eq!(c.tightness.r, 2.5);
        assert_eq!(c.sigma, SigmaFamily::Sine { amplitude: 2.0, frequency: 1.0 });
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::parse("kernel.shape = 1\n").is_err());
    }

    #[test]
    fn trivial_sigma_is_a_validation_error() {
        let c = Config::parse("sigma.family = \"affine\"\nsigma.c0 = 1.0\nsigma.c1 = -1.0\n").unwrap();
        let e = c.validate().unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("(C3)"));
    }
}
