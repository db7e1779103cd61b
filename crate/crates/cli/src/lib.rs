//! Command-line driver for `diffcoarsen`.
//!
//! Every subcommand writes its files into the output directory and returns a
//! JSON status object, which the binary prints as one line on stdout.

pub mod commands;
pub mod config;
pub mod error;
pub mod gradcheck;
pub mod output;
pub mod plot;

use clap::{Parser, Subcommand};
use diffcoarsen::fvm::Equation;
use serde_json::{json, Value};

pub use config::{RunArgs, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "diffcoarsen",
    version,
    about = "Differentiable coarsening of Voronoi finite-volume grids"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write pressure series, mesh and summary.
    Simulate(RunArgs),
    /// Pool and optimize a coarse grid against the fine grid's measurements.
    Coarsen(RunArgs),
    /// Time simulations of the sinusoidal scenario at several sizes.
    Benchmark {
        #[command(flatten)]
        args: RunArgs,
        /// Approximate point counts, comma separated.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Compare adjoint gradients against finite differences.
    Gradcheck {
        #[command(flatten)]
        args: RunArgs,
        #[arg(long, value_parser = parse_equation)]
        equation: Option<Equation>,
    },
}

fn parse_equation(s: &str) -> Result<Equation, String> {
    match s {
        "parabolic" => Ok(Equation::Parabolic),
        "wave" => Ok(Equation::Wave),
        other => Err(format!("unknown equation {other:?} (expected parabolic or wave)")),
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Coarsen(_) => "coarsen",
            Command::Benchmark { .. } => "benchmark",
            Command::Gradcheck { .. } => "gradcheck",
        }
    }

    pub fn run(&self) -> Result<Value, CliError> {
        match self {
            Command::Simulate(args) => commands::simulate(&RunConfig::from_args(args)?),
            Command::Coarsen(args) => commands::coarsen(&RunConfig::from_args(args)?),
            Command::Benchmark { args, sizes } => {
                let mut config = RunConfig::from_args(args)?;
                if sizes.is_some() {
                    config.sizes = sizes.clone();
                }
                commands::benchmark(&config)
            }
            Command::Gradcheck { args, equation } => {
                let mut config = RunConfig::from_args(args)?;
                if equation.is_some() {
                    config.equation = *equation;
                }
                commands::gradcheck(&config)
            }
        }
    }
}

/// Runs the command and builds the status line and exit code.
pub fn execute(cli: &Cli) -> (Value, i32) {
    let command = cli.command.name();
    match cli.command.run() {
        Ok(details) => (json!({ "command": command, "status": "ok", "details": details }), 0),
        Err(e) => {
            let code = e.exit_code();
            (
                json!({ "command": command, "status": "error", "exit_code": code, "message": e.to_string() }),
                code,
            )
        }
    }
}
