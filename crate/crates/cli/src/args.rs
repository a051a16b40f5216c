//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cilp", version, about = "Learn LP cost maps from observed decisions")]
pub struct Cli {
    /// File of `key = value` lines supplying defaults for unset flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate train/val/test datasets for a synthetic problem family.
    Generate(GenerateArgs),
    /// Train a linear cost model and write the model, metrics and a report.
    Train(TrainArgs),
    /// Evaluate a model on a dataset and print the metrics as JSON.
    Eval(EvalArgs),
    /// Project one cost vector onto the feasible cost set of a decision.
    Project(ProjectArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProblemKind {
    SpGrid,
    Knapsack,
    Portfolio,
    PerfectMatching,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Pocs,
    Gd,
    Sgd,
    PrecondGd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub problem: Option<ProblemKind>,
    /// Samples per split (default 100, or 200 for the portfolio).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for train.json, val.json and test.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Context dimension (family default when unset).
    #[arg(long)]
    pub features: Option<usize>,
    /// Polynomial degree of the cost map.
    #[arg(long)]
    pub degree: Option<u32>,
    /// Noise level of the cost map.
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory holding train.json and optionally val.json and test.json.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Training set, overriding `<data>/train.json`.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Output directory for model.json, metrics.csv and report.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// `constant:ETA`, `armijo` or `inverse-t:MU` (default `armijo` for gd,
    /// `constant:1` otherwise).
    #[arg(long)]
    pub step: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Margin of the feasible sets (default 1 for LPs, 0 for the portfolio).
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// SGD draws samples with replacement instead of shuffling each epoch.
    #[arg(long)]
    pub no_shuffle: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub margin: Option<f64>,
    /// Split label recorded in the output.
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Problem JSON (`{"kind": ...}`) or a dataset file whose problem is used.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Observed decision, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub x_star: Option<String>,
    /// Cost to project (minimization form), comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<String>,
    #[arg(long)]
    pub margin: Option<f64>,
}
