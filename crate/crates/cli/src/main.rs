//! `shp`: run the stochastic hierarchical planning simulator from the shell.
//!
//! Exit status is 0 on success, 1 when a run fails and 2 when the input is
//! unusable. Every flag can also be set through an `SHP_`-prefixed
//! environment variable (`--days` is `SHP_DAYS`, `--sd-min-samples` is
//! `SHP_SD_MIN_SAMPLES`); flags beat the environment, which beats the
//! `--config` file.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "shp", version, about = "Stochastic hierarchical planning of power-system operations")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a case and its series without running anything.
    Validate(config::RunArgs),
    /// Simulate one planning setting and write ledger, instance log and metrics.
    Simulate(config::RunArgs),
    /// Run a grid of settings, reserve levels and renewable multipliers.
    Sweep(commands::SweepArgs),
    /// Rebuild the aggregate report of a finished sweep.
    Report {
        /// Output directory of the sweep.
        #[arg(long, env = "SHP_OUT")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let outcome = match &cli.command {
        Command::Validate(a) => commands::validate(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Report { out } => commands::report(out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
