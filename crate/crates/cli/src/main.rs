//! `citerank`: citation metrics, fits, synthetic populations and rankings.
//!
//! Exit codes: 0 success, 1 internal error, 2 input error, 3 statistical
//! precondition failure, 4 partial network failure.

mod commands;
mod manifest;
mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// `.json` files as JSON, everything else as CSV
    #[default]
    Auto,
    Csv,
    Json,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0:#}")]
    Input(anyhow::Error),
    #[error("{0:#}")]
    Statistics(anyhow::Error),
    #[error("{failed} of {total} authors failed")]
    PartialNetwork { failed: usize, total: usize },
    #[error("{0:#}")]
    Internal(#[from] anyhow::Error),
}

impl CliError {
    pub fn input(msg: impl std::fmt::Display) -> Self {
        CliError::Input(anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Input(_) => 2,
            CliError::Statistics(_) => 3,
            CliError::PartialNetwork { .. } => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "citerank", version, about = "Citation metrics, h/o-index rankings and fits")]
pub struct Cli {
    /// Output format for tables printed to standard output.
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Ignore researchers with fewer total citations when fitting.
    #[arg(long = "min-C", alias = "min-c", global = true, value_name = "INT")]
    pub min_c: Option<u64>,
    /// TOML file with defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct InputArgs {
    /// Citation files (CSV `id,citations` or JSON).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub input_format: Option<InputFormat>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-researcher N, C, m, <c>, h, o and h/sqrt(C).
    Metrics {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Least-squares fit of h/sqrt(C) on sqrt(C) and sqrt(<c>).
    Fit {
        #[command(flatten)]
        input: InputArgs,
        /// Also fit o ~ k C^(1/2) <c>^(1/4).
        #[arg(long)]
        scaling: bool,
        /// Fit k as the geometric rather than arithmetic mean of ratios.
        #[arg(long)]
        log_space: bool,
        /// Write h/sqrt(C) vs sqrt(C) plot data here.
        #[arg(long)]
        fig1: Option<PathBuf>,
    },
    /// Generate a synthetic population as CSV.
    Simulate {
        #[arg(long)]
        n_researchers: Option<usize>,
        /// fixed:N | uniform:MIN:MAX | log-uniform:MIN:MAX
        #[arg(long)]
        papers: Option<String>,
        /// lognormal:MU:SIGMA | power-law:ALPHA[:CAP] | geometric:P
        #[arg(long)]
        citations: Option<String>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Rank researchers by one metric, optionally comparing two rankings.
    Rank {
        #[command(flatten)]
        input: InputArgs,
        /// h | o | C | m | mean_c
        #[arg(long)]
        metric: Option<String>,
        /// Two metrics to compare, e.g. `h,o`.
        #[arg(long)]
        compare: Option<String>,
        /// How many of the largest rank shifts to list.
        #[arg(long)]
        top: Option<usize>,
        /// Write o vs h plot data here.
        #[arg(long)]
        fig2: Option<PathBuf>,
    },
    /// Fetch authors' works from the API into the cache.
    Fetch {
        #[arg(required = true)]
        authors: Vec<String>,
        #[arg(long)]
        base_url: Option<String>,
        /// Requests per second.
        #[arg(long)]
        rate_limit: Option<f64>,
        #[arg(long)]
        max_retries: Option<u32>,
        /// Seconds per request.
        #[arg(long)]
        timeout: Option<f64>,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        contact_email: Option<String>,
        /// Dotted path of the citation count inside each work.
        #[arg(long)]
        count_field: Option<String>,
        #[arg(long)]
        per_page: Option<u32>,
        /// First retry delay in seconds.
        #[arg(long)]
        backoff_base: Option<f64>,
    },
    /// Rewrite the cache keeping only the latest line per author.
    CacheCompact {
        #[arg(long)]
        cache: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    match commands::run(cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("citerank: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
