//! `covchol` command-line tool: estimation on CSV data, Monte Carlo
//! simulation, band selection and QDA.
//!
//! Exit codes: 0 on success, 2 for usage, input or parse problems, 3 when
//! an estimator fails.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use covchol::estimators::Method;
use covchol::simulation::DEFAULT_SEED;
use thiserror::Error;

mod commands;
pub mod config;
pub mod io;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error(transparent)]
    Core(#[from] covchol::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use covchol::Error as E;
        match self {
            CliError::Usage(_) | CliError::Input { .. } => 2,
            CliError::Core(E::Parse { .. } | E::Shape(_) | E::Io(_)) => 2,
            CliError::Core(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "covchol", version, about = "Covariance estimation through Cholesky-factor regressions")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Flat key = value file of default flags; command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a covariance matrix from an n × p CSV.
    #[command(args_override_self = true)]
    Estimate(EstimateArgs),
    /// Monte Carlo comparison on a population model.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Pick a band (or penalty) by repeated random splitting.
    #[command(args_override_self = true)]
    Select(SelectArgs),
    /// Quadratic discriminant analysis on the sonar data.
    #[command(args_override_self = true)]
    Qda(QdaArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Ar1,
    Ma4,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Numeric CSV, rows are observations.
    pub input: PathBuf,
    /// The first row is data, not column names.
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 100)]
    pub splits: usize,
    /// Training share of each split, as a decimal or a ratio like 1/3.
    #[arg(long, default_value = "1/3", value_parser = parse_fraction)]
    pub train_frac: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Choose k or λ by random splitting.
    #[arg(long)]
    pub auto: bool,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Where to write the selection record (default: `<out>.selection.json`).
    #[arg(long)]
    pub selection_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Round CSV numbers to this many decimals.
    #[arg(long)]
    pub digits: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[arg(long, default_value_t = 0.7)]
    pub rho: f64,
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, required = true)]
    pub p: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, value_parser = parse_method,
          default_value = "sample,ledoit_wolf,sample_banding,chol_banding")]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub n_train: usize,
    #[arg(long, default_value_t = 100)]
    pub n_valid: usize,
    /// Skip eigenvectors and the K(q) curves.
    #[arg(long)]
    pub no_eigenvectors: bool,
    /// Output base name: writes `<out>.csv` and `<out>.json`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub digits: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QdaArgs {
    /// Sonar file: 60 features then R or M per row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    /// Leave-one-out error instead of the training error.
    #[arg(long)]
    pub loocv: bool,
    /// Random splits per class for tuning.
    #[arg(long, default_value_t = covchol::qda::LOOCV_SPLITS)]
    pub splits: usize,
    #[arg(long, default_value = "1/3", value_parser = parse_fraction)]
    pub train_frac: f64,
    /// Fixed band for both classes instead of tuning.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Scale features to unit variance first.
    #[arg(long)]
    pub standardize: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Per-observation CSV: index,true,predicted,score_0,score_1.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad fraction {s:?}"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad fraction {s:?}"))?;
            a / b
        }
        None => s.parse().map_err(|_| format!("bad fraction {s:?}"))?,
    };
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("fraction must lie in (0, 1), got {s}"))
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match config::expand_args(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            pool.install(|| commands::dispatch(cli.command))
        }
        None => commands::dispatch(cli.command),
    }
}
