//! `rotatest`: distribution-free goodness-of-fit testing of grouped
//! Bernoulli trials from the command line.
//!
//! Exit codes: 0 on success, 1 when the run aborts (for instance more
//! than 1% of replications fail), 2 on usage errors.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod experiment;
mod svg;
mod verify_cmd;

#[derive(Parser)]
#[command(name = "rotatest", version, about = "Goodness-of-fit tests for grouped Bernoulli trials via empirical-process rotation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated experiment and write EDFs, p-values and plot data.
    Experiment(experiment::ExperimentArgs),
    /// Check the rotation identities over random cases.
    Verify(verify_cmd::VerifyArgs),
}

/// Seed precedence: flag, then config file, then ROTATEST_SEED, then 0.
fn env_seed() -> Option<u64> {
    std::env::var("ROTATEST_SEED").ok()?.trim().parse().ok()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Experiment(args) => experiment::run(args),
        Command::Verify(args) => verify_cmd::run(args),
    }
}
