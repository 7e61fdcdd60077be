//! The `zspeedl` command line: training, evaluation, timing runs, sweeps and
//! FPS tables over manifest-described datasets.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use zspeedl::methods::Method;
use zspeedl::ZslError;

pub mod commands;
pub mod fps;
pub mod hp;
pub mod sweep;

pub const THREADS_ENV: &str = "ZSPEEDL_THREADS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ZslError> for CliError {
    fn from(e: ZslError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else if e.is_usage() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Zsl,
    Gzsl,
}

#[derive(Parser, Debug)]
#[command(name = "zspeedl", version, about = "Zero-shot learning accuracy and inference-speed experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a method on the training split and save the model directory.
    Train(TrainArgs),
    /// Score a saved model on the test split.
    Eval(EvalArgs),
    /// Time single-sample classification of saved models.
    Bench(BenchArgs),
    /// Train and evaluate every (method, dataset) pair into one CSV.
    Sweep(SweepArgs),
    /// Combine extraction and classification timings into frames per second.
    Fps(FpsArgs),
    /// Load a manifest, check every invariant and print a summary.
    Validate(ValidateArgs),
    /// Write a seeded synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub method: Method,
    /// Hyper-parameters as key=value, repeatable or comma separated.
    #[arg(long = "hp", value_name = "KEY=VALUE")]
    pub hp: Vec<String>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Model directory to create.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Model directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "zsl")]
    pub setting: Setting,
    /// Result JSON path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Model directories, one report entry each.
    #[arg(long, required = true, num_args = 1..)]
    pub model: Vec<PathBuf>,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = zspeedl::bench::DEFAULT_WARMUP)]
    pub warmup: usize,
    #[arg(long, default_value_t = zspeedl::bench::DEFAULT_REPEATS)]
    pub repeats: usize,
    /// Free-form host label such as `desktop` or `rpi4b`.
    #[arg(long, default_value = "unlabeled")]
    pub device_label: String,
    /// Time batches of this many rows instead of single samples.
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the methods x dimensions table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepSetting {
    Zsl,
    Gzsl,
    Both,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, required = true, value_delimiter = ',', num_args = 1..)]
    pub method: Vec<Method>,
    /// Dataset manifests, typically one per backbone.
    #[arg(long, required = true, num_args = 1..)]
    pub dataset: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub setting: SweepSetting,
    /// Per-method hyper-parameters as method:key=value.
    #[arg(long = "hp", value_name = "METHOD:KEY=VALUE")]
    pub hp: Vec<String>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Completed cells are recorded here; defaults to `<out>.progress.jsonl`.
    #[arg(long)]
    pub progress: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FpsArgs {
    /// Extraction timing JSON (single entry, list, or report with `entries`).
    #[arg(long)]
    pub extract: PathBuf,
    /// Classification report written by `bench`.
    #[arg(long)]
    pub classify: PathBuf,
    /// Result JSON from `eval` (object or list) to join on method and backbone.
    #[arg(long)]
    pub accuracy: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Directory for the arrays and `manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "synthetic")]
    pub name: String,
    #[arg(long, default_value = "synthetic")]
    pub backbone_tag: String,
    #[arg(long, default_value_t = 6)]
    pub classes: usize,
    #[arg(long, default_value_t = 2)]
    pub unseen: usize,
    #[arg(long, default_value_t = 10)]
    pub per_class: usize,
    #[arg(long, default_value_t = 8)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 4)]
    pub attribute_dim: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

/// Sizes the global rayon pool from `ZSPEEDL_THREADS`, falling back to
/// `default` (0 means one thread per core).
pub fn configure_threads(default: usize) -> CliResult<usize> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => n,
            _ => return Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => default,
    };
    // a pool built earlier in the process stays in effect
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        log::debug!("rayon pool already initialized");
    }
    Ok(rayon::current_num_threads())
}

pub fn run_command(cli: Cli) -> CliResult<()> {
    let threads = configure_threads(match cli.command {
        Command::Bench(_) => 1,
        _ => 0,
    })?;
    log::debug!("using {threads} threads");
    match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Sweep(a) => sweep::sweep(&a),
        Command::Fps(a) => fps::fps(&a),
        Command::Validate(a) => commands::validate(&a),
        Command::Synth(a) => commands::synth(&a),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run_command(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("zspeedl: {e}");
            e.exit_code()
        }
    }
}
