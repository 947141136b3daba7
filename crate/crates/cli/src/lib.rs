//! The `raggednn` command-line tool: training, evaluation, gradient
//! checks, dataset conversion reports and kernel benchmarks.
//!
//! Every command writes machine-readable results to `out` and progress or
//! error prose to `err`; [`run`] returns the process exit code (0 ok,
//! 1 runtime failure, 2 usage or configuration error).

pub mod bench;
pub mod commands;
pub mod config;
pub mod gradcheck;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use raggednn::Error;

pub const SEED_ENV: &str = "RAGGEDNN_SEED";

#[derive(Debug, Parser)]
#[command(name = "raggednn", version, about = "Graph neural networks over ragged mini-batches")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model from a JSON run config; writes metrics.jsonl and final.ckpt.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset; prints a JSON object of metrics.
    Eval(EvalArgs),
    /// Finite-difference gradient check of a layer or model.
    Gradcheck(GradcheckArgs),
    /// Validate a JSONL dataset and report ragged vs padded batch sizes.
    Convert(ConvertArgs),
    /// Time segment kernels against a naive loop; prints CSV.
    Bench(BenchArgs),
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Seed for splitting and shuffling; falls back to the config, then RAGGEDNN_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    All,
    Train,
    Val,
    Test,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// JSONL dataset.
    #[arg(long, required_unless_present = "nodes", conflicts_with_all = ["nodes", "edges"])]
    pub data: Option<PathBuf>,
    /// Citation node table (with --edges).
    #[arg(long, requires = "edges")]
    pub nodes: Option<PathBuf>,
    #[arg(long, requires = "nodes")]
    pub edges: Option<PathBuf>,
    /// Part of the data to score; train/val/test rebuild the training run's split.
    #[arg(long, value_enum, default_value = "all")]
    pub split: SplitArg,
}

#[derive(Debug, clap::Args)]
pub struct GradcheckArgs {
    /// One of gcn, mpn, interaction, schnet, megnet, unet, set2set, topk, or all.
    #[arg(long)]
    pub layer: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = gradcheck::DEFAULT_EPS)]
    pub eps: f64,
}

#[derive(Debug, clap::Args)]
pub struct ConvertArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Print per-batch representation statistics as CSV.
    #[arg(long)]
    pub report: bool,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Write the validated (and optionally featurized) dataset as JSONL.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Build radius-graph edges with Gaussian distance features from positions.
    #[arg(long)]
    pub expand_distances: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Kernel {
    SegmentSum,
    SegmentMean,
    SegmentMax,
    Gather,
}

#[derive(Debug, clap::Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub kernel: Kernel,
    /// Row counts to time.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "1000,10000,100000")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 16)]
    pub width: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Exit code for an error: 2 for bad input or configuration, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Validation(_) | Error::Parse(_) | Error::Checkpoint(_) => 2,
        _ => 1,
    }
}

/// Seed from the flag, else the config, else `RAGGEDNN_SEED`, else 0.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> raggednn::Result<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

/// Runs a parsed command and returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Train(a) => commands::train(&a, err).map(|_| ()),
        Command::Eval(a) => commands::eval(&a, out),
        Command::Gradcheck(a) => commands::gradcheck(&a, out, err),
        Command::Convert(a) => commands::convert(&a, out, err),
        Command::Bench(a) => bench::bench(&a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Parses `args` (including the program name) and runs the command. Usage
/// errors print to `err` and return 2.
pub fn run_args<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, out, err),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            code
        }
    }
}
