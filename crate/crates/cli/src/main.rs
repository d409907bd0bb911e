use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod estimate;
mod manifest;
mod report;
mod simulate;
mod svg;

/// Doubly-robust estimation with mismeasured treatment and outcome and a
/// two-phase validation subsample.
#[derive(Debug, Parser)]
#[command(name = "twophase-dr", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Monte Carlo grid over sample sizes and validation fractions.
    Simulate(simulate::SimulateArgs),
    /// Estimate E[Y(1)], E[Y(0)] and the ATE from a CSV file.
    Estimate(estimate::EstimateArgs),
    /// Pivot a simulation summary into per-metric tables or SVG panels.
    Report(report::ReportArgs),
}

/// Bad flags or bad input: exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Estimate(a) => estimate::run(a),
        Command::Report(a) => report::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
