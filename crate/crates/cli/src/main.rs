//! `equiproj <command> --config <path> [--flag value ...]`
//!
//! Flags mirror the JSON config keys (kebab-case on the command line,
//! snake_case in the file) and take precedence over the file.
//! Exit codes: 0 ok, 1 bound violation, 2 input error, 3 numerical error,
//! 4 training divergence.

mod bounds;
mod config;
mod error;
mod groups;
mod ops;
mod svg;
mod train;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliResult;

#[derive(Parser)]
#[command(name = "equiproj", version, about = "Equivariant projections, defects and toy training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Project a matrix onto the equivariant subspace.
    Project(ops::ProjectArgs),
    /// Project a C4 steerable kernel.
    KernelProject(ops::KernelArgs),
    /// Worst-case defect report for a matrix.
    Defect(ops::DefectArgs),
    /// Randomized checks of the defect bounds.
    VerifyBounds(bounds::BoundsArgs),
    /// Train the toy SO(2) model.
    Train(train::TrainArgs),
    /// Train over a grid of penalties, data amplitudes and seeds.
    Sweep(train::SweepArgs),
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Project(a) => ops::run_project(a),
        Command::KernelProject(a) => ops::run_kernel_project(a),
        Command::Defect(a) => ops::run_defect(a),
        Command::VerifyBounds(a) => bounds::run_verify_bounds(a),
        Command::Train(a) => train::run_train(a),
        Command::Sweep(a) => train::run_sweep(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("equiproj: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
