//! Report file written by every experiment, and its CSV/SVG renderings.

use std::io::Write;

use serde::{Deserialize, Serialize};
use swl_core::stats::report::loglog_svg;
use swl_core::{CltReport, DalangReport, ErgodicReport, FddReport, SandwichReport, TightnessReport};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub t: f64,
    pub u_origin: f64,
    pub u_mean: f64,
    pub u_min: f64,
    pub u_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSummary {
    pub dalang: DalangReport,
    pub gamma0: f64,
    pub l1_norm: f64,
    pub spectral_total_mass: f64,
    pub t_list: Vec<f64>,
    /// `𝔪_t` at each time of `t_list`.
    pub frak_m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MalliavinSummary {
    pub t: f64,
    pub p: f64,
    pub sandwich: SandwichReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", content = "result", rename_all = "kebab-case")]
pub enum Outcome {
    Simulate(SimulateSummary),
    Clt(CltReport),
    Fdd(FddReport),
    Tightness(TightnessReport),
    Ergodic(ErgodicReport),
    Malliavin(MalliavinSummary),
    KernelCheck(KernelSummary),
}

/// Contents of `report.json`. Holds no timing or thread information, so a
/// rerun with the same config and seed reproduces it byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub version: String,
    pub seed: u64,
    #[serde(flatten)]
    pub outcome: Outcome,
}

impl ReportFile {
    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("not a report file: {e}")))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), CliError> {
        match &self.outcome {
            Outcome::Clt(r) => r.write_csv(w)?,
            Outcome::Malliavin(m) => m.sandwich.write_csv(w)?,
            Outcome::Tightness(r) => {
                writeln!(w, "gap,norm,norm_se")?;
                for ((g, n), se) in r.gaps.iter().zip(&r.norms).zip(&r.norm_se) {
                    writeln!(w, "{g},{n},{se}")?;
                }
            }
            Outcome::Ergodic(r) => {
                writeln!(w, "r,variance")?;
                for (r, v) in r.r_list.iter().zip(&r.variances) {
                    writeln!(w, "{r},{v}")?;
                }
            }
            Outcome::Fdd(r) => {
                writeln!(w, "t_i,t_j,empirical,se,target")?;
                for (i, ti) in r.t_list.iter().enumerate() {
                    for (j, tj) in r.t_list.iter().enumerate() {
                        writeln!(
                            w,
                            "{ti},{tj},{},{},{}",
                            r.empirical[i][j], r.standard_errors[i][j], r.target[i][j]
                        )?;
                    }
                }
            }
            Outcome::Simulate(s) => {
                writeln!(w, "key,value")?;
                for (k, v) in [
                    ("t", s.t),
                    ("u_origin", s.u_origin),
                    ("u_mean", s.u_mean),
                    ("u_min", s.u_min),
                    ("u_max", s.u_max),
                ] {
                    writeln!(w, "{k},{v}")?;
                }
            }
            Outcome::KernelCheck(k) => {
                writeln!(w, "t,frak_m")?;
                for (t, m) in k.t_list.iter().zip(&k.frak_m) {
                    writeln!(w, "{t},{m}")?;
                }
            }
        }
        Ok(())
    }

    pub fn to_svg(&self) -> Result<String, CliError> {
        Ok(match &self.outcome {
            Outcome::Clt(r) => r.to_svg(),
            Outcome::Tightness(r) => {
                let pts: Vec<(f64, f64)> = r.gaps.iter().copied().zip(r.norms.iter().copied()).collect();
                loglog_svg(
                    "increment norm vs gap",
                    "h",
                    "||F_R(s+h) - F_R(s)||_2",
                    &[("norm", "#1f77b4", &pts)],
                    Some((r.fit.slope, r.fit.intercept)),
                )
            }
            Outcome::Ergodic(r) => {
                let pts: Vec<(f64, f64)> = r.r_list.iter().copied().zip(r.variances.iter().copied()).collect();
                loglog_svg(
                    "variance of ergodic average vs R",
                    "R",
                    "variance",
                    &[("variance", "#1f77b4", &pts)],
                    Some((r.fit.slope, r.fit.intercept)),
                )
            }
            Outcome::Malliavin(m) => {
                let rows = &m.sandwich.rows;
                let est: Vec<(f64, f64)> = rows.iter().map(|r| (r.smoothed_green, r.estimate)).collect();
                let low: Vec<(f64, f64)> = rows.iter().map(|r| (r.smoothed_green, r.lower)).collect();
                let c = m.sandwich.fitted_constant;
                loglog_svg(
                    "derivative norm vs G*gamma",
                    "G*gamma",
                    "norm",
                    &[("estimate", "#1f77b4", &est), ("lower bound", "#d62728", &low)],
                    (c > 0.0).then(|| (1.0, c.ln())),
                )
            }
            other => {
                return Err(CliError::Usage(format!(
                    "no plot for experiment {}; svg is available for clt, tightness, ergodic and malliavin",
                    other.name()
                )))
            }
        })
    }
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Simulate(_) => "simulate",
            Outcome::Clt(_) => "clt",
            Outcome::Fdd(_) => "fdd",
            Outcome::Tightness(_) => "tightness",
            Outcome::Ergodic(_) => "ergodic",
            Outcome::Malliavin(_) => "malliavin",
            Outcome::KernelCheck(_) => "kernel-check",
        }
    }
}
