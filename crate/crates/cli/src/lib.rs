//! Command-line front end: correlation estimates from long-format trial
//! data, power and testing-order reports, and simulation studies.

pub mod error;
pub mod estimate;
pub mod input;
pub mod json;
pub mod power;
pub mod simulate;

use clap::{Parser, Subcommand};

pub use error::{exit, CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "lrcorr", version, about = "Correlation between log-rank statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the correlation matrix of the endpoints' log-rank statistics.
    Estimate(estimate::EstimateArgs),
    /// Marginal and conjunctive power, testing order and sensitivity.
    Power(power::PowerArgs),
    /// Run simulation studies and append one results row per scenario.
    Simulate(simulate::SimulateArgs),
    /// Write one simulated trial as a long-format CSV.
    SampleTrial(simulate::SampleTrialArgs),
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Estimate(a) => estimate::run(a),
        Command::Power(a) => power::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::SampleTrial(a) => simulate::run_sample_trial(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
