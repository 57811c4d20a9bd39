//! `afmdw`: runs, sweeps, differential-inclusion simulations, hypothesis
//! diagnostics and the acceptance checks.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 violated hypothesis or
//! failed check, 4 I/O error.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "afmdw",
    version,
    about = "Runs, sweeps, simulations and checks for adaptive-moment optimizers with weight decay"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// INI configuration; defaults are used for anything it omits.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Override `section.key=value`; repeatable, applied in order.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Overwrite existing outputs and run despite violated hypotheses.
    #[arg(long)]
    pub force: bool,
    /// Override `optimizer.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// One run: trace.csv, summary.txt, residual.svg, objective.svg.
    Run(Common),
    /// A grid of runs, one subdirectory per cell, plus slopes.csv and residuals.svg.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Grid axis `section.key=v1,v2,...`; repeatable, cells are the product.
        #[arg(long, value_name = "KEY=V1,V2,...")]
        grid: Vec<String>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Euler integration of the limiting inclusion from the configured start.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Final time.
        #[arg(long, default_value_t = 2.0)]
        horizon: f64,
    },
    /// Hypothesis report and, for small piecewise problems, the exact stationary set.
    Diagnose(Common),
    /// Runs every acceptance check and prints one line per check.
    Accept,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(c) => commands::run(&c),
        Command::Sweep { common, grid, jobs } => commands::sweep(&common, &grid, jobs),
        Command::Simulate { common, dt, horizon } => commands::simulate(&common, dt, horizon),
        Command::Diagnose(c) => commands::diagnose(&c),
        Command::Accept => commands::accept(),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
