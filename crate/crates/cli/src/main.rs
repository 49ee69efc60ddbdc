//! `percep` command-line driver.
//!
//! Exit codes: 0 on success, 1 when the numerical pipeline itself fails
//! (non-finite values, degenerate layers, undefined statistics), 2 for
//! usage, configuration and input errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use percep::distance::Weighting;
use percep::eval::Protocol;

use config::{GridSpec, MetricKind, SubsetMode};

#[derive(Debug)]
pub enum CliError {
    Core(percep::Error),
    Usage(String),
}

impl From<percep::Error> for CliError {
    fn from(e: percep::Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(msg) => write!(f, "usage: {msg}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numeric_failure() => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "percep", version, about = "Probe CNN channels with gratings and build perceptual distances")]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true, env = "PERCEP_THREADS")]
    threads: Option<usize>,

    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
struct ModelArgs {
    /// Network manifest (JSON).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Weight container.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Tap (layer output) to probe or measure.
    #[arg(long)]
    tap: Option<String>,
}

#[derive(Debug, Args, Clone, Default)]
struct GridArgs {
    /// Viewing geometry in pixels per degree.
    #[arg(long)]
    ppd: Option<f64>,
    /// Michelson contrast of the gratings.
    #[arg(long)]
    contrast: Option<f64>,
    /// Frequency sweep in cpd as start:stop:step.
    #[arg(long, value_name = "START:STOP:STEP")]
    frequencies: Option<GridSpec>,
    /// Orientation sweep in degrees as start:stop:step.
    #[arg(long, value_name = "START:STOP:STEP")]
    orientations: Option<GridSpec>,
}

#[derive(Debug, Args, Clone, Default)]
struct SubsetArgs {
    /// Subset JSON written by `select`.
    #[arg(long, conflicts_with = "scores")]
    subset: Option<PathBuf>,
    /// Score CSV written by `probe`; selection runs on the fly.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Selection mode when no subset file is given.
    #[arg(long, value_enum)]
    mode: Option<SubsetMode>,
    /// Percentage x of an H-x/L-x subset.
    #[arg(long)]
    percent: Option<f64>,
    /// Channel weighting inside the distance.
    #[arg(long, value_parser = parse_weighting)]
    weighting: Option<Weighting>,
}

fn parse_weighting(s: &str) -> Result<Weighting, String> {
    match s {
        "uniform" => Ok(Weighting::Uniform),
        "pe-proportional" => Ok(Weighting::PeProportional),
        _ => Err(format!("unknown weighting '{s}' (expected uniform or pe-proportional)")),
    }
}

fn parse_protocol(s: &str) -> Result<Protocol, String> {
    s.parse().map_err(|e: percep::Error| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the deterministic fixture network (and optional synthetic datasets).
    GenFixture {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write blur-based QA, JND and 2AFC datasets under OUT/datasets.
        #[arg(long)]
        datasets: bool,
    },
    /// Write the probe gratings as PGM images.
    DumpStimuli {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Image side length in pixels.
        #[arg(long, default_value_t = 128)]
        size: usize,
        /// Frequency (cpd) of the orientation sweep; defaults to the CSF peak.
        #[arg(long)]
        orientation_cpd: Option<f64>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Score every channel of a tap; writes the score CSV and both response curves.
    Probe {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Score CSV; curves go to <stem>.freq.csv and <stem>.orient.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a channel subset from a score CSV.
    Select {
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<SubsetMode>,
        #[arg(long)]
        percent: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distance between two images, or between every pair listed in a CSV.
    Distance {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        subset: SubsetArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum)]
        metric: Option<MetricKind>,
        /// CSV with columns image1,image2 (batch mode).
        #[arg(long, conflicts_with = "images")]
        pairs: Option<PathBuf>,
        /// Output CSV for batch mode (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(num_args = 2, value_names = ["IMAGE1", "IMAGE2"])]
        images: Vec<PathBuf>,
    },
    /// Run a validation protocol on a dataset manifest.
    Evaluate {
        #[arg(long, value_parser = parse_protocol)]
        protocol: Option<Protocol>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum)]
        metric: Option<MetricKind>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        subset: SubsetArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Result JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("percep: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
