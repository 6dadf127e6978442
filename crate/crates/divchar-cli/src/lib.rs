//! Command-line driver: reproducible curve/point ensembles, the verification
//! suites, sum and bound-ratio scans, and CSV/JSON reporting.

pub mod config;
pub mod ensemble;
pub mod commands;
pub mod report;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "divchar",
    version,
    about = "Exact character sums of division-polynomial sequences: experiments, audits, reports"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML config; omitted fields take defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the config's RNG seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the config's worker count.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output path (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format for row-oriented commands.
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    pub format: Option<String>,
    /// Permit N beyond the period R (bound hypotheses assume N <= R).
    #[arg(long, global = true)]
    pub override_range: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every exact-identity suite; exit 0 iff all pass.
    Verify,
    /// Emit one row per (curve, point, character, twist, N).
    Sum,
    /// Emit bound-ratio rows for the selected bound families.
    Scan,
    /// Print the aggregate ratio table (max/median per family).
    Table,
}

/// Runs a parsed command line, returning the process exit code.
pub fn run(cli: Cli) -> i32 {
    match commands::dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            2
        }
    }
}
