//! `fanet` command line: single runs, parameter sweeps and SEFC-vs-baseline
//! comparison tables.
//!
//! Exit codes: 0 success, 1 other failure, 2 file not found, 3 parse error,
//! 4 validation error.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use fanet_core::config_io::{self, LoadError};
use fanet_core::experiment::{self, MetricsRow, SweepError};
use fanet_core::trace::write_trace;

#[derive(Parser)]
#[command(name = "fanet", version, about = "FANET clustering simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and print its metrics row as CSV.
    Run {
        config: PathBuf,
        /// Write an NDJSON event trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Print the CSV header line before the row.
        #[arg(long)]
        header: bool,
    },
    /// Run every (value, seed, algorithm) cell of a sweep file.
    Sweep {
        sweep: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
    },
    /// Percent advantage of SEFC over each baseline per cell and metric.
    Compare { csv: PathBuf },
    /// Print the default configuration file.
    Defaults,
    /// Print a named sweep file (fig2, fig3, fig4, fig5).
    Preset { name: String },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[derive(Debug)]
enum Failure {
    NotFound(String),
    Parse(String),
    Invalid(String),
    Other(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::NotFound(_) => 2,
            Failure::Parse(_) => 3,
            Failure::Invalid(_) => 4,
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        let msg = e.to_string();
        match e {
            LoadError::NotFound { .. } => Failure::NotFound(msg),
            LoadError::Parse(_) => Failure::Parse(msg),
            LoadError::Invalid(_) | LoadError::InvalidSweep(_) => Failure::Invalid(msg),
            LoadError::Io { .. } => Failure::Other(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn cmd_run(config: &Path, trace: Option<&Path>, header: bool) -> Result<(), Failure> {
    let cfg = config_io::load_config(config)?;
    let art = fanet_core::run_simulation(&cfg).map_err(|e| Failure::Invalid(e.to_string()))?;
    if let Some(path) = trace {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_trace(&art.trace(), BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))?;
    }
    let text = experiment::metrics_csv_string(&[MetricsRow::from_run(&cfg, &art.summary)]);
    let mut lines = text.lines();
    let head = lines.next().unwrap_or_default();
    let mut out = io::stdout().lock();
    if header {
        writeln!(out, "{head}").context("writing stdout")?;
    }
    for l in lines {
        writeln!(out, "{l}").context("writing stdout")?;
    }
    Ok(())
}

fn cmd_sweep(sweep: &Path, out: &Path, workers: usize) -> Result<(), Failure> {
    let spec = experiment::load_sweep(sweep)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let rows = experiment::run_sweep(&spec, workers).map_err(|e| match e {
        SweepError::Load(l) => Failure::from(l),
        other => Failure::Other(other.into()),
    })?;
    let metrics = out.join("metrics.csv");
    let file = File::create(&metrics).with_context(|| format!("creating {}", metrics.display()))?;
    experiment::write_metrics_csv(&rows, BufWriter::new(file)).with_context(|| format!("writing {}", metrics.display()))?;
    let aggregate = out.join("aggregate.csv");
    let file = File::create(&aggregate).with_context(|| format!("creating {}", aggregate.display()))?;
    experiment::write_aggregate_csv(&experiment::aggregate(&rows, spec.axis), BufWriter::new(file))
        .with_context(|| format!("writing {}", aggregate.display()))?;
    eprintln!("{} runs -> {}", rows.len(), out.display());
    Ok(())
}

fn cmd_compare(csv: &Path) -> Result<(), Failure> {
    let text = config_io::read_file(csv)?;
    let rows = experiment::parse_metrics_csv(&text).map_err(|e| Failure::Parse(format!("{}: {e}", csv.display())))?;
    let table = experiment::compare(&rows).map_err(|e| Failure::Invalid(e.to_string()))?;
    experiment::write_comparison_csv(&table, io::stdout().lock()).context("writing stdout")?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, trace, header } => cmd_run(&config, trace.as_deref(), header),
        Command::Sweep { sweep, out, workers } => cmd_sweep(&sweep, &out, workers),
        Command::Compare { csv } => cmd_compare(&csv),
        Command::Defaults => {
            print!("{}", config_io::config_to_toml(&Default::default()));
            Ok(())
        }
        Command::Preset { name } => match experiment::preset(&name) {
            Some(spec) => {
                print!("{}", spec.to_toml());
                Ok(())
            }
            None => Err(Failure::Invalid(format!(
                "unknown preset {name:?} (expected one of {})",
                experiment::PRESETS.join(", ")
            ))),
        },
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::NotFound(m) | Failure::Parse(m) | Failure::Invalid(m) => eprintln!("error: {m}"),
                Failure::Other(e) => eprintln!("error: {e:#}"),
            }
            ExitCode::from(f.code())
        }
    }
}
