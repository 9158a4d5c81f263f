//! `mirrorfix` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

pub mod manifest;
pub mod pipelines;
pub mod report;
mod rf;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

pub use pipelines::TsMode;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Environment variable that replaces the scenario seed.
pub const SEED_ENV: &str = "MIRRORFIX_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

macro_rules! data_err {
    ($($t:tt)*) => { $crate::cli::CliError::Data(format!($($t)*)) };
}
pub(crate) use data_err;

#[derive(Debug, Parser)]
#[command(name = "mirrorfix", version, about = "GNSS backscatter positioning toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate measurements and truth from a scenario.
    Simulate(SimulateArgs),
    /// Detect ON-OFF keying per satellite and label rows.
    Detect(DetectArgs),
    /// Absolute positioning with virtual satellites.
    SolveAbs(SolveAbsArgs),
    /// Differential base-vector positioning.
    SolveDiff(SolveDiffArgs),
    /// Convert a raw-log subset file to canonical CSV.
    Convert(ConvertArgs),
    /// Reflection-amplifier design calculator.
    #[command(subcommand)]
    Rf(rf::RfCommand),
    /// Join solutions with truth and emit error statistics.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the measurements as a raw-log subset file.
    #[arg(long)]
    pub raw_log: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct DetectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = crate::tagdetect::DEFAULT_PERIOD_MS)]
    pub period_ms: i64,
    #[arg(long, default_value_t = 0.5)]
    pub duty: f64,
    #[arg(long, default_value_t = crate::tagdetect::COVERAGE_THRESHOLD_DB)]
    pub threshold_db: f64,
    #[arg(long, default_value_t = crate::tagdetect::DEFAULT_SCORE_MIN)]
    pub score_min: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveAbsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// `known:<seconds>`, `estimate` or `joint`.
    #[arg(long, default_value = "estimate", value_parser = pipelines::parse_ts_mode)]
    pub ts: TsMode,
    #[arg(long, default_value_t = crate::solver_abs::DEFAULT_TOLERANCE)]
    pub tol: f64,
    #[arg(long, default_value_t = crate::solver_abs::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Start point `x,y,z` in ECEF meters instead of the origin.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    pub warm_start: Option<[f64; 3]>,
    /// EMA smoothing for scatter-delay estimates.
    #[arg(long, default_value_t = crate::solver_abs::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Pairing window; defaults to two switching periods.
    #[arg(long)]
    pub window_ms: Option<i64>,
    #[arg(long, value_enum, default_value = "cn0")]
    pub weights: pipelines::WeightArg,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveDiffArgs {
    /// Labeled canonical CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Floor-plan JSON: `{"polygon": [[e, n], ...], "height": [lo, hi]}`.
    #[arg(long)]
    pub floor_plan: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    pub mode: pipelines::DiffModeArg,
    #[arg(long)]
    pub window_ms: Option<i64>,
    /// Consecutive scattered epochs pooled into one fix.
    #[arg(long, default_value_t = 1)]
    pub epochs_per_fix: usize,
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    pub b_init: Option<[f64; 3]>,
    #[arg(long, default_value_t = crate::solver_diff::DEFAULT_TOLERANCE)]
    pub tol: f64,
    #[arg(long, default_value_t = crate::solver_diff::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "simple")]
    pub clock_model: pipelines::ClockModelArg,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// CSV whose first four columns are epoch_ms,x,y,z.
    #[arg(long)]
    pub solutions: PathBuf,
    /// Truth CSV from `simulate`.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse `a,b,c`.
pub fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got '{s}'"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|_| format!("'{p}' is not a number"))?;
    }
    Ok(out)
}

/// Parse `a,b`.
pub fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected re,im, got '{s}'"));
    }
    let a = parts[0].trim().parse().map_err(|_| format!("'{}' is not a number", parts[0]))?;
    let b = parts[1].trim().parse().map_err(|_| format!("'{}' is not a number", parts[1]))?;
    Ok([a, b])
}

/// Run with explicit arguments (first item is the program name) and return
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            if code == EXIT_USAGE {
                eprintln!("\nSee `mirrorfix <command> --help`; file formats are described in docs/formats.md.");
            }
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(a) => pipelines::simulate(&a),
        Command::Detect(a) => pipelines::detect(&a),
        Command::SolveAbs(a) => pipelines::solve_abs(&a),
        Command::SolveDiff(a) => pipelines::solve_diff(&a),
        Command::Convert(a) => pipelines::convert(&a),
        Command::Rf(c) => rf::run(&c),
        Command::Report(a) => pipelines::report(&a),
    }
}
