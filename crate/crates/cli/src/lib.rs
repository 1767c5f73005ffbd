//! Command-line front end for `sensopt-core`: sweeps, optimization,
//! tradeoff analysis, learning runs, slot simulation and self-validation.

pub mod checks;
pub mod commands;
pub mod config;
pub mod error;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{ConfigFile, PowerModel};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "sensopt",
    version,
    about = "Throughput-optimal spectrum sensing time"
)]
pub struct Cli {
    /// JSON configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate, handover cap and NCE over a sensing-time grid (CSV).
    Sweep {
        #[arg(long)]
        tau_start: Option<f64>,
        #[arg(long)]
        tau_end: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        /// Comma-separated channel counts to overlay.
        #[arg(long, value_delimiter = ',')]
        np_list: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimal sensing time and saturated maximum throughput (JSON).
    Optimize,
    /// Energy-aware design for a tradeoff factor (JSON).
    Tradeoff {
        #[arg(long)]
        tf: f64,
    },
    /// Closed learning loop (trace CSV + JSON summary).
    Learn {
        #[arg(long)]
        cycles: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the final network snapshot here.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Slot-level simulation (trace CSV + JSON summary).
    Simulate {
        /// Sensing time in seconds; defaults to the optimum.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        slots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo and derivative self-checks; exit status 3 on failure.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Executes a parsed command line, writing results to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = ConfigFile::load_or_default(cli.config.as_deref())?;
    match cli.command {
        Command::Sweep {
            tau_start,
            tau_end,
            points,
            np_list,
            out,
        } => commands::sweep(
            &cfg,
            &commands::SweepArgs {
                tau_start,
                tau_end,
                points,
                np_list,
                out,
            },
            stdout,
        ),
        Command::Optimize => commands::optimize(&cfg, stdout),
        Command::Tradeoff { tf } => commands::tradeoff(&cfg, tf, stdout),
        Command::Learn {
            cycles,
            seed,
            out,
            snapshot,
        } => commands::learn(
            &cfg,
            &commands::LearnArgs {
                cycles,
                seed,
                out,
                snapshot,
            },
            stdout,
        ),
        Command::Simulate {
            tau,
            slots,
            seed,
            out,
        } => commands::simulate(
            &cfg,
            &commands::SimulateArgs {
                tau,
                slots,
                seed,
                out,
            },
            stdout,
        ),
        Command::Validate { seed } => commands::validate(&cfg, seed, stdout),
    }
}
