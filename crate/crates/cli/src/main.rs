//! `errasym`: generate datasets, evaluate the theory, fit models and run
//! the benchmark harnesses.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on invalid arguments.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use errasym_core::NoisePolicy;

#[derive(Parser)]
#[command(
    name = "errasym",
    version,
    about = "Causal vs. anticausal prediction error experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset and write it as CSV with a JSON sidecar.
    Generate(GenerateArgs),
    /// Evaluate the predicted causal and anticausal errors for an oracle.
    Theory(TheoryArgs),
    /// Fit a regression model to a dataset CSV.
    Fit(FitArgs),
    /// Run an experiment harness.
    Bench {
        #[command(subcommand)]
        mode: BenchMode,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    oracle: String,
    /// Standard deviation of the Gaussian noise.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    sigma: f64,
    #[arg(long, default_value_t = 1000, allow_negative_numbers = true)]
    n: i64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output; the sidecar goes next to it with a `.json` extension.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "resample")]
    noise_policy: NoisePolicy,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long)]
    oracle: String,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    sigma: f64,
    /// JSON output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Linear,
    Power,
    Spline,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    CToE,
    EToC,
}

#[derive(Args)]
struct FitArgs {
    /// Dataset CSV with header `c,e`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    model: ModelKind,
    #[arg(long, value_enum, default_value = "c-to-e")]
    direction: DirectionArg,
    /// Spline smoothing parameter; chosen by GCV when omitted.
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Also report the inverted model.
    #[arg(long)]
    invert: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchMode {
    /// Exact oracle and exact inverse.
    Known(SyntheticArgs),
    /// Smoothing splines in both directions.
    Unknown(SyntheticArgs),
    /// Power-law fits on a cause-effect pair corpus.
    Pairs(PairsArgs),
}

#[derive(Args)]
struct SyntheticArgs {
    /// Comma-separated oracle tokens, e.g. `linear,exp:a=5,pow:a=2`.
    #[arg(long, visible_alias = "oracle")]
    oracles: String,
    /// Comma-separated noise levels.
    #[arg(long, visible_alias = "sigma", allow_hyphen_values = true)]
    sigmas: String,
    #[arg(long, default_value_t = 1000, allow_negative_numbers = true)]
    n: i64,
    #[arg(long, default_value_t = 100, allow_negative_numbers = true)]
    runs: i64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output stem; writes `<stem>.csv` and `<stem>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long)]
    noise_policy: Option<NoisePolicy>,
}

#[derive(Args)]
struct PairsArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long)]
    meta: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure category, mapped to the process exit code.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<errasym_core::Error> for CliError {
    fn from(e: errasym_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Theory(a) => commands::theory(a),
        Command::Fit(a) => commands::fit(a),
        Command::Bench { mode } => match mode {
            BenchMode::Known(a) => commands::bench_synthetic(a, commands::Mode::Known),
            BenchMode::Unknown(a) => commands::bench_synthetic(a, commands::Mode::Unknown),
            BenchMode::Pairs(a) => commands::bench_pairs(a),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
