//! Command-line interface definition.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Cascade fine-tuning experiment runner for learning-to-rank scorers.
#[derive(Debug, Parser)]
#[command(name = "sir", version, about, max_term_width = 100)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a scorer cascade and evaluate the final classifier.
    ///
    /// Writes manifest.json, loss.csv, one checkpoint per trained level,
    /// metrics.csv, and run.trec into the output directory.
    Train(CommonArgs),

    /// Evaluate an existing checkpoint on the configured evaluation split.
    ///
    /// Writes manifest.json, metrics.csv, and run.trec.
    Eval(EvalArgs),

    /// Train several strategy variants on identical data and summarize them.
    ///
    /// All configs must be identical except for `strategy` and the
    /// schedule's `selection_mode` / `k_per_level`. Writes one loss CSV per
    /// variant plus a cross-strategy compare.csv.
    Compare(CompareArgs),

    /// Generate a synthetic dataset and write it as TSV/qrels files.
    GenSynthetic(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Path to a run config (JSON), or a manifest.json from a previous run.
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,

    /// Override a config field: dotted path = JSON value
    /// (e.g. --set schedule.k_per_level=[8,4] --set strategy=V4).
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub set: Vec<String>,

    /// Output directory (created if absent).
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// Master seed; derives the scorer, selection, and data seeds.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Checkpoint to evaluate (.sirc).
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Config files, one per variant (repeat the flag; at least two).
    #[arg(long = "config", value_name = "FILE", required = true)]
    pub configs: Vec<PathBuf>,

    /// Override a config field in every variant: dotted path = JSON value.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub set: Vec<String>,

    /// Output directory (created if absent).
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// Master seed applied to every variant.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
}
