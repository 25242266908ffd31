//! `stlplan`: plan, falsify, evaluate and benchmark robust STL missions.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stlplan::missions::Method;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable files, malformed configs, mismatched dimensions.
    #[error("{0}")]
    Input(String),
    /// The solver or the numerics gave up.
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Solver(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "stlplan",
    version,
    about = "Robust planning from signal temporal logic"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the counterexample-guided solver and write the plan and its nominal trace.
    Plan(PlanArgs),
    /// Search the exogenous box for the worst case of a finished plan.
    Falsify(FalsifyArgs),
    /// Report robustness, impulse and cost of a plan at one exogenous value.
    Evaluate(EvaluateArgs),
    /// Plan and falsify over many seeds and methods.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args)]
struct PlanArgs {
    /// Mission configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FalsifyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Plan file written by `plan`, or a bare JSON array.
    #[arg(long)]
    theta: PathBuf,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    theta: PathBuf,
    /// Exogenous value: a falsification report or a bare JSON array.
    /// Defaults to the center of the box.
    #[arg(long)]
    chi: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    #[arg(long)]
    config: PathBuf,
    /// Seeds as `a..b` (exclusive), `a..=b` or a comma list.
    #[arg(long)]
    seeds: String,
    /// Comma list of `cg`, `dr32`, `dr64` (any `dr<samples>` is accepted).
    #[arg(long, value_delimiter = ',', default_value = "cg")]
    method: Vec<Method>,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

/// Worker count from `STLPLAN_THREADS`, else the available parallelism.
fn threads() -> Result<usize, CliError> {
    match std::env::var("STLPLAN_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Input(format!(
                "STLPLAN_THREADS must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = threads()?;
    match cli.command {
        Command::Plan(a) => commands::plan(&a.config, a.seed, &a.out, threads),
        Command::Falsify(a) => commands::falsify(
            &a.config,
            &a.theta,
            a.restarts,
            a.seed,
            a.out.as_deref(),
            threads,
        ),
        Command::Evaluate(a) => {
            commands::evaluate(&a.config, &a.theta, a.chi.as_deref(), a.out.as_deref())
        }
        Command::Benchmark(a) => {
            let seeds = commands::parse_seeds(&a.seeds)?;
            commands::benchmark(&a.config, &a.method, &seeds, a.restarts, &a.out, threads)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
