//! `regraft` experiment runner.
//!
//! Subcommands cover the full distillation workflow: train a teacher on real
//! data, distill a student from it without that data, evaluate saved models,
//! dump synthetic batches for plotting, and check optimizer displacement
//! bounds. Every run is driven by a flat `key = value` config (plus `--set`
//! overrides) and writes its resolved settings next to its outputs.
//!
//! Exit codes: 0 success, 1 configuration/usage error, 2 runtime or numeric
//! failure.

mod commands;
mod config;
mod specs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use config::Config;

#[derive(Debug)]
pub enum CliError {
    /// The invocation or config is wrong; fix the inputs. Exit 1.
    Config(String),
    /// The run itself failed (numeric trouble, write failure, ...). Exit 2.
    Runtime(String),
}

/// Core errors raised while interpreting configuration: numeric and
/// capability problems still count as runtime, everything else means the
/// config pointed at something unusable.
pub fn cfg_err(e: regraft_core::Error) -> CliError {
    use regraft_core::Error;
    match e {
        Error::Numeric(_) | Error::Capability(_) => CliError::Runtime(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

/// Core errors raised mid-run.
pub fn run_err(e: regraft_core::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser)]
#[command(
    name = "regraft",
    version,
    about = "Data-free knowledge distillation experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Config file in flat `key = value` form; `#` starts a comment line.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Set or override one config key, repeatable (last wins).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a teacher model on a CSV dataset and save it.
    TrainTeacher(RunArgs),
    /// Distill a student from a saved teacher using synthetic data.
    Distill(RunArgs),
    /// Evaluate a saved model on a CSV dataset.
    Evaluate(RunArgs),
    /// Write a CSV of synthetic inputs with teacher/student predictions.
    GenDump(RunArgs),
    /// Check gradient-descent displacement bounds on synthesis traces.
    BoundsCheck(RunArgs),
}

fn dispatch(cmd: &Cmd) -> Result<(), CliError> {
    let args = match cmd {
        Cmd::TrainTeacher(a)
        | Cmd::Distill(a)
        | Cmd::Evaluate(a)
        | Cmd::GenDump(a)
        | Cmd::BoundsCheck(a) => a,
    };
    let cfg = Config::load(args.config.as_deref(), &args.set)?;
    match cmd {
        Cmd::TrainTeacher(_) => commands::train_teacher(&cfg),
        Cmd::Distill(_) => commands::distill(&cfg),
        Cmd::Evaluate(_) => commands::evaluate(&cfg),
        Cmd::GenDump(_) => commands::gen_dump(&cfg),
        Cmd::BoundsCheck(_) => commands::bounds_check(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("runtime error: {msg}");
            ExitCode::from(2)
        }
    }
}
