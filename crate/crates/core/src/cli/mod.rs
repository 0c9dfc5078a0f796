//! The `policy-tree` command-line tool.
//!
//! Every command reads its settings from flags plus an optional TOML
//! document (`--config`) whose keys mirror the long flag names. Top-level keys
//! apply to every command and `[command]` tables to one command. Flags given
//! on the command line win over the document.

mod commands;
mod render;
mod table;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};

pub use commands::{materialize_seed, parse_dose_spec};
pub use render::{explain, render};
pub use table::{encode_labels, Table};

#[derive(Debug, Parser)]
#[command(name = "policy-tree", version, about = "Learn tree-structured prescription policies")]
pub struct Cli {
    /// TOML document with default values for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the n × T reward table from observational data.
    EstimateRewards(EstimateArgs),
    /// Fit a policy tree to a reward table.
    Train(TrainArgs),
    /// Apply a stored tree to new rows.
    Prescribe(PrescribeArgs),
    /// Print a stored tree.
    Show(ShowArgs),
    /// Run a synthetic regret experiment.
    Benchmark(BenchmarkArgs),
    /// Write a synthetic training set.
    Generate(GenerateArgs),
}

pub const COMMANDS: [&str; 6] = ["estimate-rewards", "train", "prescribe", "show", "benchmark", "generate"];

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub features: Vec<String>,
    /// Discrete treatment column (class column in weighted-loss mode).
    #[arg(long)]
    pub treatment: Option<String>,
    /// Declared treatment labels, in column order of the output.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    /// Continuous treatment as `column:lo:hi:grid_size`; repeat per treatment.
    #[arg(long = "doses")]
    pub doses: Vec<String>,
    #[arg(long)]
    pub outcome: Option<String>,
    /// Weighted-loss mode: square penalty table whose header names the classes.
    #[arg(long)]
    pub penalty: Option<PathBuf>,
    /// Outcomes are 0/1 events; rewards are predicted event probabilities.
    #[arg(long)]
    pub binary: bool,
    /// Larger outcomes are better.
    #[arg(long)]
    pub maximize: bool,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Lower propensity clip.
    #[arg(long, default_value_t = 0.01)]
    pub clip: f64,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, default_value_t = 5)]
    pub forest_min_leaf: usize,
    #[arg(long, default_value_t = 50)]
    pub propensity_min_leaf: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Line-delimited JSON report (stdout when absent).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub features: Vec<String>,
    #[arg(long)]
    pub rewards: PathBuf,
    /// greedy, optimal or exhaustive.
    #[arg(long, default_value = "optimal")]
    pub method: String,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1)]
    pub min_leaf: usize,
    #[arg(long, default_value_t = 100)]
    pub restarts: usize,
    /// Choose depth and alpha on a validation split instead of using
    /// `--depth` and `--alpha`.
    #[arg(long)]
    pub tune: bool,
    #[arg(long, value_delimiter = ',')]
    pub depths: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PrescribeArgs {
    #[arg(long)]
    pub tree: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Add the root-to-leaf path of every row.
    #[arg(long)]
    pub explain: bool,
    /// Output table (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ShowArgs {
    #[arg(long)]
    pub tree: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub design: String,
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    pub n_test: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, value_delimiter = ',')]
    pub depths: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-repetition table.
    #[arg(long)]
    pub out: PathBuf,
    /// Mean and standard error per (method, n).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub design: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise_sd: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs the tool on `args` (including the program name) and returns the
/// process exit code: 0 on success, 2 for input errors, 3 for configuration
/// errors, 4 for internal failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<String> = args
        .into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect();
    match parse(&args).and_then(execute) {
        Ok(()) => 0,
        Err(Outcome::Clap(e)) => {
            let _ = e.print();
            if e.use_stderr() {
                Error::Config(String::new()).exit_code()
            } else {
                0
            }
        }
        Err(Outcome::Failed(e)) => {
            eprintln!("policy-tree: {e}");
            e.exit_code()
        }
    }
}

enum Outcome {
    Clap(clap::Error),
    Failed(Error),
}

impl From<Error> for Outcome {
    fn from(e: Error) -> Self {
        Outcome::Failed(e)
    }
}

fn parse(args: &[String]) -> std::result::Result<Cli, Outcome> {
    let merged = merge_config(args)?;
    Cli::try_parse_from(merged).map_err(Outcome::Clap)
}

fn execute(cli: Cli) -> std::result::Result<(), Outcome> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::config("--jobs must be at least 1").into());
        }
        pool = pool.num_threads(j);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Internal(format!("cannot start worker pool: {e}")))?;
    pool.install(|| commands::dispatch(cli.command)).map_err(Outcome::Failed)
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

fn flag_given(args: &[String], flag: &str) -> bool {
    args.iter()
        .any(|a| a == flag || a.strip_prefix(flag).is_some_and(|rest| rest.starts_with('=')))
}

fn value_tokens(flag: &str, v: &toml::Value, out: &mut Vec<String>) -> Result<()> {
    match v {
        toml::Value::Boolean(true) => out.push(flag.to_string()),
        toml::Value::Boolean(false) => {}
        toml::Value::String(s) => out.extend([flag.to_string(), s.clone()]),
        toml::Value::Integer(i) => out.extend([flag.to_string(), i.to_string()]),
        toml::Value::Float(x) => out.extend([flag.to_string(), x.to_string()]),
        toml::Value::Array(items) => {
            for item in items {
                value_tokens(flag, item, out)?;
            }
        }
        other => {
            return Err(Error::config(format!(
                "configuration key {flag} has unsupported value {other}"
            )))
        }
    }
    Ok(())
}

/// Inserts configuration-document values as flags right after the command
/// name, skipping any flag the command line already sets.
fn merge_config(args: &[String]) -> Result<Vec<String>> {
    let Some(path) = config_path(args) else {
        return Ok(args.to_vec());
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::config(format!("cannot read configuration {path}: {e}")))?;
    let doc: toml::Table = text
        .parse()
        .map_err(|e| Error::config(format!("configuration {path}: {e}")))?;
    let Some(pos) = args.iter().position(|a| COMMANDS.contains(&a.as_str())) else {
        return Ok(args.to_vec());
    };
    let command = args[pos].as_str();
    let mut tokens = Vec::new();
    let mut add = |key: &str, v: &toml::Value| -> Result<()> {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" || flag_given(args, &flag) {
            return Ok(());
        }
        value_tokens(&flag, v, &mut tokens)
    };
    for (key, v) in &doc {
        match v {
            toml::Value::Table(t) if key == command => {
                for (k, v) in t {
                    add(k, v)?;
                }
            }
            toml::Value::Table(_) if COMMANDS.contains(&key.as_str()) => {}
            toml::Value::Table(_) => {
                return Err(Error::config(format!("configuration table [{key}] is not a command")))
            }
            _ => add(key, v)?,
        }
    }
    let mut merged = args[..=pos].to_vec();
    merged.extend(tokens);
    merged.extend_from_slice(&args[pos + 1..]);
    Ok(merged)
}
