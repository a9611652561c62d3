//! `rightsize`: command-line driver for resource allocation search.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod failure;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "rightsize", version, about = "Find CPU, memory and instance family allocations for serverless functions")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "RIGHTSIZE_OUT", default_value = "out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a price sheet CSV for per-vCPU and per-GB hourly rates.
    SolvePricing {
        /// CSV with columns family,alpha,beta,price_per_hour,cpu_group,mem_group[,spot_multiplier].
        prices: PathBuf,
    },
    /// Write a recorded-style grid CSV from synthetic functions.
    GenGrid {
        #[command(flatten)]
        source: SourceArgs,
        /// Repetitions per config and input.
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Optimize one or more functions and write one trace per seed.
    Optimize {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        run: RunArgs,
        /// time, cost, weighted:W or hier:THETA[:time|cost].
        #[arg(long, default_value = "time")]
        objective: String,
    },
    /// Predicted Pareto front of time and cost, compared with the actual front.
    Pareto {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Recommendations for time weights 0, 0.25, 0.5, 0.75 and 1.
    Weighted {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Minimize one objective while the other stays within THETA of its best.
    Hierarchical {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0.2)]
        theta: f64,
        #[arg(long, default_value = "time")]
        primary: String,
    },
    /// Alternate-family counts and spot-discounted substitution.
    ProviderSim {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Idle instance families that get the spot discount.
        #[arg(long, value_delimiter = ',')]
        idle: Vec<String>,
        /// Price multiplier of idle families.
        #[arg(long, default_value_t = 0.2)]
        spot: f64,
        /// Allowed relative slowdown of a substitute.
        #[arg(long, default_value_t = 0.10)]
        cap: f64,
        /// Thresholds of the alternate-family table.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.05, 0.10, 0.20])]
        thetas: Vec<f64>,
        /// Use ground truth instead of a learned model.
        #[arg(long)]
        oracle: bool,
    },
    /// Run every method over every seed and write metric tables.
    Evaluate {
        #[command(flatten)]
        source: SourceArgs,
        /// Report directory; overrides --out.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Comma-separated methods: gp, rf, et, gbrt, random, lhs.
        #[arg(long, value_delimiter = ',', default_value = "gp,rf,et,gbrt,random,lhs")]
        methods: Vec<String>,
        #[arg(long, default_value_t = 20)]
        budget: usize,
        #[arg(long = "n-init", default_value_t = 3)]
        n_init: usize,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long = "seed-base", default_value_t = 0)]
        seed_base: u64,
        #[arg(long, default_value = "time")]
        metric: String,
        #[arg(long, default_value_t = 1000)]
        resamples: usize,
    },
}

/// Where functions come from and which space and prices apply.
#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Synthetic preset names or JSON spec paths; all presets when no source is given.
    #[arg(long, value_delimiter = ',')]
    pub synthetic: Vec<String>,
    /// Recorded grid CSV.
    #[arg(long, conflicts_with = "synthetic")]
    pub grid: Option<PathBuf>,
    /// Function of the grid; every function when omitted.
    #[arg(long, requires = "grid")]
    pub function: Option<String>,
    #[arg(long, default_value = "default")]
    pub input: String,
    /// Space descriptor JSON.
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// decoupled, single:FAMILY, prop:FAMILY or fixed:FAMILY.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Price sheet CSV; built-in sheet when omitted.
    #[arg(long)]
    pub pricing: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// gp, rf, et, gbrt, random or lhs.
    #[arg(long, default_value = "gp")]
    pub surrogate: String,
    #[arg(long, default_value_t = 20)]
    pub budget: usize,
    #[arg(long = "n-init", default_value_t = 3)]
    pub n_init: usize,
    /// Number of seeds, counted up from --seed-base.
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    #[arg(long = "seed-base", default_value_t = 0)]
    pub seed_base: u64,
}

impl RunArgs {
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.seed_base + i).collect()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.to_json());
            ExitCode::from(failure.code)
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;
