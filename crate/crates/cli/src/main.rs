use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod plot;

/// Optimal balance experiments on the ramped fast-slow toy model.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One nudging run; writes trace.csv and prints a summary line.
    Run { config: PathBuf },
    /// Sweep over ε and ramps; writes sweep.csv, fit.csv and sweep.svg.
    Sweep { config: PathBuf },
    /// Oscillator quadrature against the exact slow manifold; writes oracle.csv.
    OracleCheck { config: PathBuf },
    /// Shooting against nudging; writes bvp.csv.
    BvpCompare { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => commands::run(config),
        Command::Sweep { config } => commands::sweep_cmd(config),
        Command::OracleCheck { config } => commands::oracle_check(config),
        Command::BvpCompare { config } => commands::bvp_compare(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
