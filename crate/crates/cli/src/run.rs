//! Experiment dispatch and output files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use swl_core::stats::experiments::time_index;
use swl_core::{
    clt_experiment, ergodic_decay_scan, fdd_check, sample_increments, sandwich_report, solve_spectral,
    tightness_scan, with_threads, Grid, SigmaSpec, SpatialKernel,
};

use crate::config::{Config, Experiment};
use crate::error::CliError;
use crate::report::{KernelSummary, MalliavinSummary, Outcome, ReportFile, SimulateSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

/// Written next to the report; everything needed to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    pub threads: usize,
    /// The effective config, after command-line overrides.
    pub config: String,
    pub config_sha256: String,
    /// File name and SHA-256 of every output file except the manifest.
    pub outputs: Vec<(String, String)>,
    pub wall_time_seconds: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads a config, or the config embedded in a manifest.
pub fn load_config(path: &Path) -> Result<Config, CliError> {
    if path.extension().is_some_and(|e| e == "json") {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("manifest: {e}")))?;
        return Config::parse(&m.config);
    }
    Config::load(path)
}

/// Result of one experiment; `snapshot` holds the solution CSV of `simulate`.
pub struct Computed {
    pub outcome: Outcome,
    pub snapshot: Option<Vec<u8>>,
}

pub fn compute(config: &Config) -> Result<Computed, CliError> {
    let (kernel, sigma) = config.validate()?;
    with_threads(config.threads, || dispatch(config, &kernel, &sigma))?
}

fn dispatch(config: &Config, kernel: &SpatialKernel, sigma: &SigmaSpec) -> Result<Computed, CliError> {
    let res = config.resolution();
    let seed = config.seed;
    let n = config.replicas;
    let r_list = &config.r_list;
    let mut snapshot = None;
    let outcome = match config.experiment {
        Experiment::KernelCheck => {
            let frak_m = config
                .t_list
                .iter()
                .map(|&t| kernel.frak_m(t))
                .collect::<swl_core::Result<Vec<f64>>>()?;
            Outcome::KernelCheck(KernelSummary {
                dalang: kernel.check_dalang(1e-6)?,
                gamma0: kernel.gamma_radial(0.0),
                l1_norm: kernel.l1_norm(),
                spectral_total_mass: kernel.spectral_total_mass(),
                t_list: config.t_list.clone(),
                frak_m,
            })
        }
        Experiment::Simulate => {
            let t = config.final_time()?;
            let grid = simulation_grid(config, kernel, t)?;
            let noise = sample_increments(kernel, &grid, seed)?;
            let field = solve_spectral(kernel, &grid, sigma, &noise)?;
            let idx: Vec<usize> = config
                .t_list
                .iter()
                .map(|&t| time_index(&grid, t))
                .collect::<swl_core::Result<_>>()?;
            let mut buf = Vec::new();
            field.write_csv(&mut buf, &idx)?;
            snapshot = Some(buf);
            let u = field.slice(grid.n_steps());
            Outcome::Simulate(SimulateSummary {
                dim: grid.dim(),
                n: grid.n(),
                half_width: grid.half_width(),
                dt: grid.dt(),
                n_steps: grid.n_steps(),
                t: grid.final_time(),
                u_origin: u[grid.origin()],
                u_mean: u.iter().sum::<f64>() / u.len() as f64,
                u_min: u.iter().copied().fold(f64::INFINITY, f64::min),
                u_max: u.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            })
        }
        Experiment::Clt => Outcome::Clt(clt_experiment(kernel, sigma, config.final_time()?, r_list, n, seed, res)?),
        Experiment::Fdd => {
            let r = r_list.iter().copied().fold(0.0, f64::max);
            Outcome::Fdd(fdd_check(kernel, sigma, &config.t_list, r, n, seed, res, None)?)
        }
        Experiment::Tightness => {
            let tc = &config.tightness;
            Outcome::Tightness(tightness_scan(kernel, sigma, tc.s, &tc.gaps, tc.r, n, seed, res)?)
        }
        Experiment::Ergodic => Outcome::Ergodic(ergodic_decay_scan(
            kernel,
            sigma,
            config.ergodic.probe,
            config.final_time()?,
            r_list,
            n,
            seed,
            res,
        )?),
        Experiment::Malliavin => {
            let mc = &config.malliavin;
            let t = config.final_time()?;
            let grid = simulation_grid(config, kernel, t)?;
            let probes = cone_probes(&grid, mc.sources, mc.points);
            let t_index = grid.n_steps();
            let sandwich =
                sandwich_report(kernel, &grid, sigma, &probes, mc.p, t_index, grid.origin(), seed, n, mc.scheme)?;
            Outcome::Malliavin(MalliavinSummary {
                t: grid.final_time(),
                p: mc.p,
                sandwich,
            })
        }
    };
    Ok(Computed { outcome, snapshot })
}

fn simulation_grid(config: &Config, kernel: &SpatialKernel, t: f64) -> Result<Grid, CliError> {
    let r = config.r_list.iter().copied().fold(0.0, f64::max);
    Ok(Grid::auto(kernel, r, t, config.grid.dx, config.grid.dt)?)
}

/// Probe points `(s_index, y)`: `sources` source times evenly spread over
/// `[0, t)` and `points` positions along the first axis from the origin to
/// the edge of the light cone.
fn cone_probes(grid: &Grid, sources: usize, points: usize) -> Vec<(usize, usize)> {
    let steps = grid.n_steps();
    let o = grid.origin_axis();
    let mut out = Vec::new();
    for k in 0..sources {
        let s = k * steps / sources;
        let reach = (steps - s) as f64 * grid.dt() / grid.dx();
        for i in 0..points {
            let off = (reach * i as f64 / (points - 1) as f64).round() as usize;
            let a = (o + off).min(grid.n() - 1);
            let y = if grid.dim() == 1 { a } else { grid.flat(&[a, o]) };
            out.push((s, y));
        }
    }
    out
}

/// Runs `config` and writes `report.json` plus the requested rendering
/// and `manifest.json`, all inside `out`.
pub fn execute(config: &Config, out: &Path, format: Format) -> Result<(Outcome, Vec<PathBuf>), CliError> {
    let start = Instant::now();
    if format == Format::Svg && !config.experiment.has_plot() {
        return Err(CliError::Usage(format!(
            "no plot for experiment {}; svg is available for clt, tightness, ergodic and malliavin",
            config.experiment.name()
        )));
    }
    let Computed { outcome, snapshot } = compute(config)?;
    let report = ReportFile {
        version: swl_core::VERSION.to_string(),
        seed: config.seed,
        outcome,
    };
    fs::create_dir_all(out)?;
    let mut written = write_report(&report, out, format)?;
    if let Some(bytes) = snapshot {
        let path = out.join("snapshot.csv");
        fs::write(&path, bytes)?;
        written.push(path);
    }
    let config_text = config.to_toml()?;
    let outputs = written
        .iter()
        .map(|p| {
            let bytes = fs::read(p)?;
            Ok((file_name(p), sha256_hex(&bytes)))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let manifest = Manifest {
        version: swl_core::VERSION.to_string(),
        experiment: config.experiment.name().to_string(),
        seed: config.seed,
        threads: config.threads,
        config_sha256: sha256_hex(config_text.as_bytes()),
        config: config_text,
        outputs,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
    fs::write(&path, text + "\n")?;
    written.push(path);
    Ok((report.outcome, written))
}

/// Writes `report.json` and, for csv/svg, the matching rendering.
pub fn write_report(report: &ReportFile, out: &Path, format: Format) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(out)?;
    let json = out.join("report.json");
    fs::write(&json, report.to_json()?)?;
    let mut written = vec![json];
    written.extend(render(report, out, format)?);
    Ok(written)
}

/// Writes the csv or svg rendering of an existing report.
pub fn render(report: &ReportFile, out: &Path, format: Format) -> Result<Option<PathBuf>, CliError> {
    Ok(match format {
        Format::Json => None,
        Format::Csv => {
            let path = out.join("report.csv");
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            fs::write(&path, buf)?;
            Some(path)
        }
        Format::Svg => {
            let svg = report.to_svg()?;
            let path = out.join("report.svg");
            fs::write(&path, svg)?;
            Some(path)
        }
    })
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}
