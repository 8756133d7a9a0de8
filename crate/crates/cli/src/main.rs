//! `mers` — exemplar selection over multiple embedding spaces, scale
//! analysis, synthetic benchmarking, theory verification, and
//! continual-learning metrics.
//!
//! Exit codes: 0 on success, 1 for internal errors or failed verification
//! checks, 2 for usage and input errors.

// `!(x > 0.0)` also rejects NaN, unlike `x <= 0.0`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mers_core::embedding::{FileFormat, Metric};
use mers_core::error::{Error, Result};
use mers_core::pipeline::{KMode, ParamMode, SigmaScope, WeightsMode};
use mers_core::select::Method;

mod cmd_analyze;
mod cmd_bench;
mod cmd_metrics;
mod cmd_select;
mod cmd_theory;
mod io;
mod report;

#[derive(Parser)]
#[command(
    name = "mers",
    version,
    about = "Replay-exemplar selection via weighted coverage over multiple embedding spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select exemplars per class and write a JSON report
    Select(SelectArgs),
    /// Compute scale profiles (sigma, delta, alpha, k) and beta ratios
    Analyze(AnalyzeArgs),
    /// Compare all selection methods on synthetic two-view Gaussian data
    Bench(cmd_bench::BenchArgs),
    /// Verify the Gaussian KL/risk-gap theory numerically
    Theory(cmd_theory::TheoryArgs),
    /// Continual-learning metrics from a task-accuracy CSV
    Metrics(MetricsArgs),
}

/// Flags shared by `select` and `analyze`.
#[derive(Args)]
struct InputArgs {
    /// Embedding matrix, `PATH[:NAME]`; repeat for multiple embeddings
    #[arg(long = "embedding", value_name = "PATH[:NAME]", required = true)]
    embeddings: Vec<String>,

    /// Labels file: one integer per line, aligned with embedding rows
    #[arg(long, value_name = "PATH")]
    labels: PathBuf,

    /// Embedding file format: auto (by extension), csv, or bin
    #[arg(long, default_value = "auto")]
    format: String,

    /// Distance metric: cosine or euclidean (rows are l2-normalized first
    /// either way)
    #[arg(long, default_value = "cosine")]
    metric: String,

    /// Bandwidth estimation scope: class or episode
    #[arg(long = "sigma-scope", default_value = "class")]
    sigma_scope: String,

    /// Neighbourhood size: auto (memory-aware ratio) or an integer
    #[arg(long, default_value = "auto")]
    k: String,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,

    /// Selection method: mers-probcover, mers-maxherding, probcover,
    /// maxherding, herding, random
    #[arg(long, default_value = "mers-probcover")]
    method: String,

    /// Total exemplar budget, split evenly across classes
    #[arg(long, conflicts_with = "budget_per_class")]
    budget: Option<usize>,

    /// Per-class exemplar budget
    #[arg(long)]
    budget_per_class: Option<usize>,

    /// Embedding weights: auto (density ratio) or a comma list w1,w2,...
    #[arg(long, default_value = "auto")]
    weights: String,

    /// RBF bandwidth: auto (median heuristic) or a number
    #[arg(long, default_value = "auto")]
    sigma: String,

    /// Ball radius: auto (kNN medians) or a number
    #[arg(long, default_value = "auto")]
    delta: String,

    /// RNG seed; all randomness flows from it
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Report path (JSON)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,

    /// Per-class budget used to derive the memory-aware k when `--k auto`
    #[arg(long)]
    budget_per_class: Option<usize>,

    /// Report path (JSON); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Accuracy matrix CSV: row t holds the accuracies measured after
    /// learning task t (lower-triangular; optional header)
    #[arg(long)]
    input: PathBuf,

    /// Report path (JSON); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_metric(s: &str) -> Result<Metric> {
    s.parse()
}

fn parse_method(s: &str) -> Result<Method> {
    s.parse()
}

fn parse_sigma_scope(s: &str) -> Result<SigmaScope> {
    match s {
        "class" => Ok(SigmaScope::Class),
        "episode" => Ok(SigmaScope::Episode),
        other => Err(Error::Domain(format!(
            "unknown sigma scope `{other}` (expected class or episode)"
        ))),
    }
}

fn parse_format(s: &str) -> Result<Option<FileFormat>> {
    match s {
        "auto" => Ok(None),
        "csv" => Ok(Some(FileFormat::Csv)),
        "bin" => Ok(Some(FileFormat::Bin)),
        other => Err(Error::Domain(format!(
            "unknown format `{other}` (expected auto, csv or bin)"
        ))),
    }
}

fn parse_param(s: &str, what: &str) -> Result<ParamMode> {
    if s == "auto" {
        return Ok(ParamMode::Auto);
    }
    let value: f64 = s
        .parse()
        .map_err(|_| Error::Domain(format!("{what} must be `auto` or a number, got `{s}`")))?;
    if !(value > 0.0) {
        return Err(Error::Domain(format!("{what} must be > 0, got {value}")));
    }
    Ok(ParamMode::Fixed(value))
}

fn parse_k(s: &str) -> Result<KMode> {
    if s == "auto" {
        return Ok(KMode::Auto);
    }
    let value: usize = s
        .parse()
        .map_err(|_| Error::Domain(format!("k must be `auto` or a positive integer, got `{s}`")))?;
    if value == 0 {
        return Err(Error::Domain("k must be >= 1".into()));
    }
    Ok(KMode::Fixed(value))
}

fn parse_weights(s: &str) -> Result<WeightsMode> {
    if s == "auto" {
        return Ok(WeightsMode::Auto);
    }
    let values = s
        .split(',')
        .map(|field| {
            field.trim().parse::<f64>().map_err(|_| {
                Error::Domain(format!("weights must be `auto` or w1,w2,..., got `{s}`"))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(WeightsMode::Explicit(values))
}

fn print_warnings(warnings: &[String]) {
    for warning in warnings {
        eprintln!("warning: {warning}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(value) = std::env::var("MERS_THREADS") {
        match value.parse::<usize>() {
            Ok(n) => mers_core::pipeline::configure_thread_cap(Some(n)),
            Err(_) => eprintln!("warning: ignoring non-numeric MERS_THREADS=`{value}`"),
        }
    }
    let outcome = match cli.command {
        Command::Select(args) => cmd_select::run(args),
        Command::Analyze(args) => cmd_analyze::run(args),
        Command::Bench(args) => cmd_bench::run(args),
        Command::Theory(args) => cmd_theory::run(args),
        Command::Metrics(args) => cmd_metrics::run(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
