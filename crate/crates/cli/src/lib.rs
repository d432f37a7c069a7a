//! `cmed`: simulate studies, estimate effects on CSV data, compute truths.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{EstimateArgs, SimulateArgs, TruthArgs};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "cmed", version, about = "Causal difference in medians under confounding")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation study and write replicates, metrics, plot data and a manifest.
    Simulate {
        /// Study plan (TOML) or a previous run's manifest.json.
        #[arg(long)]
        plan: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Estimate the effect on a CSV dataset with bootstrap inference.
    Estimate {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Analysis config (TOML) or a previous run's manifest.
        #[arg(long)]
        config: PathBuf,
        /// Bootstrap replicates.
        #[arg(long)]
        boot: Option<usize>,
        /// Confidence level.
        #[arg(long)]
        level: Option<f64>,
        /// JSON report; the manifest goes next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute the true effect of a scenario by simulation.
    Truth {
        /// Scenario (TOML) or a previous run's manifest.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        oracle_n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            plan,
            out,
            seed,
            workers,
        } => {
            let workers = workers.unwrap_or_else(|| {
                std::thread::available_parallelism().map_or(1, |n| n.get())
            });
            commands::simulate(&SimulateArgs {
                plan,
                out,
                seed,
                workers,
            })
        }
        Command::Estimate {
            data,
            config,
            boot,
            level,
            out,
            seed,
        } => {
            let report = commands::estimate(&EstimateArgs {
                data,
                config,
                boot,
                level,
                out,
                seed,
            })?;
            for r in &report.results {
                match (r.delta, r.ci_lower, r.ci_upper) {
                    (Some(d), Some(lo), Some(hi)) => {
                        println!("{:<13} {d:>10.4}  [{lo:.4}, {hi:.4}]", r.method.label())
                    }
                    _ => println!(
                        "{:<13} failed: {}",
                        r.method.label(),
                        r.error.as_deref().unwrap_or("")
                    ),
                }
            }
            let failed = report.results.iter().filter(|r| !r.ok).count();
            if failed > 0 {
                return Err(CliError::Numerical(format!("{failed} method(s) failed")));
            }
            Ok(())
        }
        Command::Truth {
            scenario,
            oracle_n,
            seed,
            out,
        } => {
            let t = commands::truth(&TruthArgs {
                scenario,
                oracle_n,
                seed,
                out,
            })?;
            println!(
                "delta_true {} (m0 {}, m1 {}, mc_se {})",
                t.delta_true, t.m0_true, t.m1_true, t.mc_se
            );
            Ok(())
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
