mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use openext::extension::{DEFAULT_DISSIPATION_SEED, DEFAULT_DISSIPATION_TRIALS};

use crate::io::ToleranceOverrides;

#[derive(Parser, Debug)]
#[command(name = "openext", version, about = "Open systems with memory and their conservative extensions")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct GlobalArgs {
    /// Write the primary output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tolerance JSON; overrides $OPENEXT_TOLERANCES.
    #[arg(long, global = true, value_name = "FILE")]
    tolerances: Option<PathBuf>,
    #[arg(long = "tol-herm", global = true, value_name = "X")]
    tol_herm: Option<f64>,
    #[arg(long = "tol-orth", global = true, value_name = "X")]
    tol_orth: Option<f64>,
    #[arg(long = "tol-rank", global = true, value_name = "X")]
    tol_rank: Option<f64>,
    #[arg(long = "tol-eig-cluster", global = true, value_name = "X")]
    tol_eig_cluster: Option<f64>,
    #[arg(long = "tol-residual", global = true, value_name = "X")]
    tol_residual: Option<f64>,
}

impl GlobalArgs {
    fn overrides(&self) -> ToleranceOverrides {
        ToleranceOverrides {
            file: self.tolerances.clone(),
            herm: self.tol_herm,
            orth: self.tol_orth,
            rank: self.tol_rank,
            eig_cluster: self.tol_eig_cluster,
            residual: self.tol_residual,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a system, measure or open-system document.
    Validate { input: PathBuf },
    /// Minimal conservative extension of a measure or open system.
    Extend { input: PathBuf },
    /// Sample the friction kernel on a uniform grid (CSV).
    Kernel {
        input: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        t0: f64,
        #[arg(long)]
        t1: f64,
        /// Number of intervals; the grid has steps + 1 points.
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
    /// Coupled parts, strings and multiplicity bounds.
    Decompose { input: PathBuf },
    /// Coupling channels and the coupling matrix of the eigenspace blocks.
    Channels { input: PathBuf },
    /// Canonical S-invariant decomposition.
    Canonical { input: PathBuf },
    /// Dissipation and reconstructibility verdicts.
    Check {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DISSIPATION_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_DISSIPATION_SEED)]
        seed: u64,
    },
    /// Propagate under a forcing profile (trajectory CSV).
    Simulate(commands::SimulateArgs),
    /// Frozen subspace of a harmonic lattice, or a multiplicity scan (CSV).
    Lattice(commands::LatticeArgs),
    /// Fit a point measure to kernel samples in CSV form.
    Fit {
        input: PathBuf,
        #[arg(long = "max-atoms", default_value_t = 8)]
        max_atoms: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command, &cli.global) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("openext: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}
