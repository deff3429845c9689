//! `abba`: relative evaluation of two keyword spotters from cross-decoded,
//! accept-only data: simulation, estimation, calibration, annotation
//! planning, and threshold sweeps, all seeded and reproducible.

mod commands;
mod report;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit codes: 0 success, 2 input/config error, 3 estimation undefined.
pub enum AppError {
    Input(String),
    Undefined(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Input(_) => 2,
            AppError::Undefined(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Input(m) | AppError::Undefined(m) => m,
        }
    }
}

impl From<abba_core::Error> for AppError {
    fn from(err: abba_core::Error) -> Self {
        use abba_core::Error::*;
        match err {
            UndefinedRatio { .. }
            | SweepUndefined { .. }
            | BootstrapUnstable { .. }
            | MissingSoftLabels { .. } => AppError::Undefined(err.to_string()),
            _ => AppError::Input(err.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(err: std::io::Error) -> Self {
        AppError::Input(err.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "abba",
    version,
    about = "Relative recall / FPR analysis between two keyword-spotting models from cross-decoded accept-only data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded simulated dataset with known true ratios
    Simulate(SimulateArgs),
    /// Estimate rRecall / rFPR from a labeled dataset
    Estimate(EstimateArgs),
    /// Estimate rRecall / rFPR from soft labels
    SsEstimate(SsEstimateArgs),
    /// Fit a cubic score-to-probability calibration model
    Calibrate(CalibrateArgs),
    /// Plan an annotation budget across strata
    Allocate(AllocateArgs),
    /// Re-estimate both ratios across a grid of candidate thresholds
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    /// Deployment simulation with hard labels and arm traffic
    Abba,
    /// Soft-label simulation with a configurable label machine
    Ss,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Simulation family
    #[arg(long, value_enum)]
    kind: SimKind,
    /// JSON config file (must carry an explicit seed)
    #[arg(long)]
    config: std::path::PathBuf,
    /// Output dataset path; a `.meta.json` sidecar lands next to it
    #[arg(long)]
    output: std::path::PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    format: OutputFormat,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Direct,
    Approx,
    /// Classic A/B-test rFPR baseline (needs --traffic)
    Abtest,
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Dataset in the line-delimited record format
    #[arg(long)]
    input: std::path::PathBuf,
    /// Baseline model threshold
    #[arg(long)]
    ta: f64,
    /// Candidate model threshold
    #[arg(long)]
    tb: f64,
    /// Estimation methods (repeatable)
    #[arg(long = "method", value_enum, default_values = ["direct", "approx"])]
    methods: Vec<MethodArg>,
    /// Arm traffic JSON, required by --method abtest
    #[arg(long)]
    traffic: Option<std::path::PathBuf>,
    /// Bootstrap replicates; intervals are omitted without this
    #[arg(long, requires = "seed")]
    bootstrap: Option<usize>,
    /// Confidence level for bootstrap intervals
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Master seed for bootstrap resampling (required with --bootstrap)
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "table")]
    format: OutputFormat,
}

#[derive(Args)]
pub struct SsEstimateArgs {
    #[arg(long)]
    input: std::path::PathBuf,
    #[arg(long)]
    ta: f64,
    #[arg(long)]
    tb: f64,
    /// Calibration model JSON; with --scores, fills soft labels before
    /// estimating
    #[arg(long, requires = "scores")]
    calibration: Option<std::path::PathBuf>,
    /// Machine scores as a JSON object {record id: score}
    #[arg(long, requires = "calibration")]
    scores: Option<std::path::PathBuf>,
    #[arg(long, requires = "seed")]
    bootstrap: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "table")]
    format: OutputFormat,
}

#[derive(Args)]
pub struct CalibrateArgs {
    /// Pairs file: one JSON object per line with `score`, `label`, and an
    /// optional `weight`
    #[arg(long)]
    input: std::path::PathBuf,
    /// Where to write the fitted model JSON
    #[arg(long)]
    output: std::path::PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    format: OutputFormat,
}

#[derive(Args)]
pub struct AllocateArgs {
    /// Annotation budget
    #[arg(long)]
    budget: u64,
    /// Strata JSON: [{"name", "weight", "expected_fpr"}, ...]
    #[arg(long)]
    strata: std::path::PathBuf,
    /// Overall FPR override for the efficiency figure (pooled otherwise)
    #[arg(long)]
    overall_fpr: Option<f64>,
    /// Realized per-stratum annotation counts; derives record sampling
    /// weights
    #[arg(long, value_delimiter = ',')]
    annotated: Option<Vec<u64>>,
    #[arg(long, value_enum, default_value = "table")]
    format: OutputFormat,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long)]
    input: std::path::PathBuf,
    /// Baseline model threshold
    #[arg(long)]
    ta: f64,
    /// Deployment threshold the candidate arm was collected under; grid
    /// points below it are rejected
    #[arg(long)]
    tb: f64,
    /// Candidate threshold grid as lo:hi:step (inclusive)
    #[arg(long)]
    tb_grid: String,
    #[arg(long = "method", value_enum, default_value = "direct")]
    method: SweepMethodArg,
    /// Pick an operating point for a goal
    #[arg(long, value_enum)]
    goal: Option<GoalArg>,
    #[arg(long, value_enum, default_value = "table")]
    format: OutputFormat,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMethodArg {
    Direct,
    Approx,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GoalArg {
    /// Hold rFPR at 1, maximize recall
    MatchFpr,
    /// Hold rRecall at 1, minimize FPR
    MatchRecall,
    /// Strictly improve both
    Dominate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Estimate(args) => commands::estimate(args),
        Command::SsEstimate(args) => commands::ss_estimate(args),
        Command::Calibrate(args) => commands::calibrate(args),
        Command::Allocate(args) => commands::allocate(args),
        Command::Sweep(args) => commands::sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}
