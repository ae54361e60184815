#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod error;
mod report;
mod run;

use config::{Config, Experiment};
use error::CliError;
use report::{Outcome, ReportFile};
use run::Format;

const DEFAULT_OUT: &str = "swl-out";

#[derive(Parser)]
#[command(name = "swl", version, about = "Stochastic wave equation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one realisation and export a snapshot.
    Simulate(Common),
    /// Distance of F_R(t) to the normal law across radii.
    Clt(Common),
    /// Covariance of F_R at several times against its limit.
    Fdd(Common),
    /// Increment norms of F_R in time.
    Tightness(Common),
    /// Decay of the variance of ergodic averages.
    Ergodic(Common),
    /// Sandwich bound for the smoothed Malliavin derivative.
    Malliavin(Common),
    /// Spectral integrability of the kernel.
    KernelCheck(Common),
    /// Run the experiment named in the config (or in a manifest).
    Run(Common),
    /// Re-render an existing report.json without recomputing.
    Report {
        report: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "svg")]
        format: Format,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "SWL_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("swl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let (experiment, common) = match command {
        Command::Report { report, out, format } => return rerender(&report, out.as_deref(), format),
        Command::Run(c) => (None, c),
        Command::Simulate(c) => (Some(Experiment::Simulate), c),
        Command::Clt(c) => (Some(Experiment::Clt), c),
        Command::Fdd(c) => (Some(Experiment::Fdd), c),
        Command::Tightness(c) => (Some(Experiment::Tightness), c),
        Command::Ergodic(c) => (Some(Experiment::Ergodic), c),
        Command::Malliavin(c) => (Some(Experiment::Malliavin), c),
        Command::KernelCheck(c) => (Some(Experiment::KernelCheck), c),
    };
    let mut config = match (&common.config, experiment) {
        (Some(path), _) => run::load_config(path)?,
        (None, Some(_)) => Config::default(),
        (None, None) => return Err(CliError::Usage("run needs --config".into())),
    };
    if let Some(e) = experiment {
        config.experiment = e;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(threads) = common.threads {
        config.threads = threads;
    }
    let out = common
        .out
        .or_else(|| config.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    config.out = Some(out.to_string_lossy().into_owned());

    let (outcome, written) = run::execute(&config, &out, common.format)?;
    if let Outcome::KernelCheck(k) = &outcome {
        println!("{}", serde_json::to_string_pretty(k).map_err(|e| CliError::Config(e.to_string()))?);
    }
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn rerender(path: &Path, out: Option<&Path>, format: Format) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let report = ReportFile::from_json(&text)?;
    let out = match out {
        Some(o) => o.to_path_buf(),
        None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    std::fs::create_dir_all(&out)?;
    let written = match format {
        Format::Json => {
            let p = out.join("report.json");
            std::fs::write(&p, report.to_json()?)?;
            Some(p)
        }
        f => run::render(&report, &out, f)?,
    };
    if let Some(p) = written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}
