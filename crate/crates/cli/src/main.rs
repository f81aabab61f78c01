use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod dot;
mod trace;

#[derive(Parser, Debug)]
#[command(name = "cherry", version, about = "Type checking, compliance and simulation for cherry-pi collaborations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the session type of every initiator.
    Infer {
        file: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Rollback safety: compliance of every requester/acceptor group.
    Check {
        file: PathBuf,
        /// Also write a DOT graph to PATH.
        #[arg(long, value_name = "PATH")]
        dot: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
        #[command(flatten)]
        limits: Limits,
    },
    /// Compliance of session types, one per file, in role order.
    Comply {
        #[arg(required = true, num_args = 2..)]
        types: Vec<PathBuf>,
        /// Also write a DOT graph to PATH.
        #[arg(long, value_name = "PATH")]
        dot: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
        #[command(flatten)]
        limits: Limits,
    },
    /// Simulate one execution.
    Run {
        file: PathBuf,
        #[command(flatten)]
        out: Output,
        #[command(flatten)]
        sim: Simulation,
        /// Write the trace as JSON.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
    },
    /// Bounded exhaustive exploration of all executions.
    Explore {
        file: PathBuf,
        /// Also write a DOT graph to PATH.
        #[arg(long, value_name = "PATH")]
        dot: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
        #[command(flatten)]
        limits: Limits,
        #[arg(long, default_value_t = 30)]
        depth: usize,
        #[arg(long, value_enum, default_value_t = ErrorMode::Detect)]
        error_mode: ErrorMode,
    },
    /// DOT rendering of the type-configuration transition system.
    Graph {
        /// A program, or two or more session type files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        limits: Limits,
        #[arg(long, value_name = "PATH")]
        dot: Option<PathBuf>,
    },
    /// Re-execute a trace written by `run --trace`.
    Replay {
        trace: PathBuf,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args, Debug)]
pub struct Output {
    /// Machine-readable output.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct Limits {
    /// Maximum number of explored states.
    #[arg(long, env = "CHERRY_BUDGET")]
    pub budget: Option<usize>,
}

#[derive(Args, Debug)]
pub struct Simulation {
    /// Seed for scheduling and for unscripted function outcomes.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    pub max_steps: usize,
    /// JSON object mapping function names to their successive outcomes.
    #[arg(long, value_name = "PATH")]
    pub script: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ErrorMode::Detect)]
    pub error_mode: ErrorMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ErrorMode {
    Plain,
    Detect,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("cherry: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
