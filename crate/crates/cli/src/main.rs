//! `rangevol`: volatility estimates from OHLC or tick files, Monte Carlo
//! studies of the canonical estimators, and analytic tables.

mod density;
mod estimate;
mod output;
mod simulate;
mod tables;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rangevol_core::{EstimatorKind, SeriesConfig};

use output::{Format, Sink};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag combinations (exit code 2).
    Usage(String),
    /// Input, numerical or I/O failure (exit code 1).
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<rangevol_core::Error> for CliError {
    fn from(e: rangevol_core::Error) -> Self {
        match e {
            rangevol_core::Error::InvalidArgument(_) | rangevol_core::Error::ResourceLimit { .. } => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "rangevol", version, about = "Range-based volatility estimators")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 20_240_601)]
    pub seed: u64,
    /// Output file (stdout when absent). `tables all` expects a directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Absolute truncation tolerance of the density series.
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub series_tol: f64,
    /// Hard cap on series terms.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    pub max_terms: usize,
}

impl Common {
    pub fn series(&self) -> Result<SeriesConfig, CliError> {
        let cfg = SeriesConfig {
            abs_tol: self.series_tol,
            max_terms: self.max_terms,
            ..SeriesConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-window estimates from an OHLC or tick CSV.
    Estimate(estimate::EstimateArgs),
    /// Monte Carlo study over a drift grid.
    Simulate(simulate::SimulateArgs),
    /// Evaluate a density on a grid.
    Density(density::DensityArgs),
    /// Analytic tables: mean, variance, relative bias, F(N), P_Delta.
    Tables(tables::TablesArgs),
}

/// A comma-separated flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

pub fn parse_list(raw: &str) -> Result<List<f64>, String> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("`{s}` is not a finite number"))
        })
        .collect::<Result<_, _>>()
        .map(List)
}

/// Estimator names; `all` selects every estimator.
pub fn parse_estimators(raw: &str) -> Result<List<EstimatorKind>, String> {
    if raw.trim() == "all" {
        return Ok(List(EstimatorKind::ALL.to_vec()));
    }
    let mut kinds = Vec::new();
    for name in raw.split(',') {
        let kind: EstimatorKind = name.parse().map_err(|e: rangevol_core::Error| e.to_string())?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    Ok(List(kinds))
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("RANGEVOL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("RANGEVOL_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn provenance() -> String {
    let args: Vec<String> = std::env::args().skip(1).collect();
    format!("# rangevol {} {}", env!("CARGO_PKG_VERSION"), args.join(" "))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let sink = Sink {
        format: cli.common.format,
        provenance: provenance(),
    };
    match cli.command {
        Command::Estimate(a) => estimate::run(&cli.common, &sink, a),
        Command::Simulate(a) => simulate::run(&cli.common, &sink, a),
        Command::Density(a) => density::run(&cli.common, &sink, a),
        Command::Tables(a) => tables::run(&cli.common, &sink, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
