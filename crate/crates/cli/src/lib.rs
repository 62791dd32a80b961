//! `safr`: the scenario pipeline as subcommands.
//!
//! Exit codes: 0 success, 1 user error (bad arguments, inputs or config),
//! 2 internal error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;

pub use config::Config;

#[derive(Debug, Parser)]
#[command(name = "safr", version, about = "Scenario extraction, variation and safety analysis from driving recordings")]
pub struct Cli {
    /// Config file (default: ./safr.toml when present).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse recordings into the canonical store.
    Ingest {
        /// Recording files; default: every *.jsonl in paths.data_dir.
        files: Vec<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Detect events and ODD attributes on ingested recordings.
    Tag,
    /// Build the search index from tags and ODD records.
    Index,
    /// Query the index.
    Search {
        query: String,
        /// Co-occurrence slack in seconds (default: query.slack).
        #[arg(long)]
        slack: Option<f64>,
    },
    /// Write OpenSCENARIO files for segments of the last search.
    Export {
        /// Segment ids printed by `search`.
        ids: Vec<String>,
        /// Export every segment of the last search.
        #[arg(long)]
        all: bool,
    },
    /// Fit parameter distributions to the tagged turns.
    Fit {
        /// Comma-separated subset of turning_speed, turning_angle, turning_radius.
        #[arg(long, value_delimiter = ',', default_value = "turning_speed,turning_radius")]
        params: Vec<String>,
        /// Fit one joint distribution instead of independent marginals.
        #[arg(long)]
        joint: bool,
    },
    /// Turn a concrete scenario into a logical one using the fitted distributions.
    Logical {
        template: PathBuf,
        /// Distribution file written by `fit`.
        #[arg(long)]
        dist: Option<PathBuf>,
    },
    /// Sample concrete variations of the logical scenario.
    Sample {
        #[arg(short = 'n', long, default_value_t = 10)]
        n: usize,
        /// random or stratified (default: sampling.mode).
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Distribution file (`*.dist.xosc`); default: the one under output_dir/logical.
        #[arg(long)]
        logical: Option<PathBuf>,
    },
    /// Fraction of distribution mass covered by executed parameter points.
    Coverage {
        /// distributions.json or a *.dist.xosc file.
        dist: PathBuf,
        /// CSV with a header naming the parameters.
        points: PathBuf,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Time-to-collision safety analysis of scenarios or recordings.
    Analyze {
        /// *.xosc scenarios or *.jsonl recordings.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Throughput and latency measurements as CSV.
    Bench {
        #[command(subcommand)]
        what: BenchCommand,
    },
    /// Write synthetic inputs.
    Gen {
        #[command(subcommand)]
        what: GenCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Ingest throughput per corpus size (bytes).
    Ingest {
        #[arg(long, value_delimiter = ',', default_value = "1000000,10000000")]
        sizes: Vec<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Query latency per index size (records).
    Search {
        #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// Scripted drives with a shared map (the end-to-end fixture).
    Corpus,
    /// Random recordings totalling about `bytes`.
    Bulk {
        #[arg(long, default_value_t = 10_000_000)]
        bytes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug)]
pub enum CliError {
    User(String),
    Internal(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::User(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

pub fn user(msg: impl Into<String>) -> CliError {
    CliError::User(msg.into())
}

pub fn internal(msg: impl Into<String>) -> CliError {
    CliError::Internal(msg.into())
}

/// Runs one command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let vars: Vec<(String, String)> = std::env::vars().collect();
    let file = cli.config.clone().or_else(|| {
        let p = PathBuf::from(config::DEFAULT_FILE);
        p.exists().then_some(p)
    });
    let cfg = match Config::load(file.as_deref(), &vars) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match commands::dispatch(&cli, &cfg) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}
