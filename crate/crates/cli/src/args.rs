use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use esv_core::analysis::RemovalOrder;
use esv_core::model::ModelKind;
use serde::{Deserialize, Serialize};

/// Element Shapley Value attribution for sequence models.
#[derive(Debug, Parser)]
#[command(name = "esv", version)]
pub struct Cli {
    /// Suppress the summary printed on success.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Print summaries and errors as single-line JSON.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Attribute class scores to sequence elements.
    Attribute(AttributeArgs),
    /// Class-contrastive attribution: phi[gt] - phi[pt] per element.
    Contrast(ContrastArgs),
    /// Score the model while removing elements one at a time.
    Ablate(AblateArgs),
    /// Compare sampled against exact attributions over a directory of inputs.
    EvalApprox(EvalApproxArgs),
    /// Write a randomly initialised model document.
    GenModel(GenModelArgs),
    /// Write a random feature sequence.
    GenFeatures(GenFeaturesArgs),
    /// Repeat the run recorded in a manifest after checking input digests.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Exact,
    Approx,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InputArgs {
    /// Feature file (text or ESVF binary).
    #[arg(long)]
    pub features: PathBuf,
    /// Model document (esv-model/1 JSON).
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EngineArgs {
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: ModeArg,
    /// Per-scale sample cap (approx mode).
    #[arg(long)]
    pub m: Option<usize>,
    /// Sampling iterations (approx mode).
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Generator seed; required in approx mode.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use only scales 1..=NMAX of a per-scale model.
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Apply the (s-1)/s factor to parent means above the largest scale.
    #[arg(long)]
    pub strict_alg1: bool,
    /// Longest sequence attributed exactly.
    #[arg(long, default_value_t = 16)]
    pub exhaustive_limit: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AttributeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Comma-separated class indices, or `all`.
    #[arg(long)]
    pub classes: String,
    /// Result file (esv-result/1 JSON).
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ContrastArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long)]
    pub gt: usize,
    #[arg(long)]
    pub pt: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AblateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// esv-descending, esv-ascending, center-out, edges-in, uniform or random.
    #[arg(long)]
    pub order: RemovalOrder,
    /// Class whose score is tracked.
    #[arg(long)]
    pub class: usize,
    /// Ground-truth class for the correctness column.
    #[arg(long)]
    pub label: usize,
    /// Curve table (CSV); printed to stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalApproxArgs {
    /// Directory of feature files (`*.csv`, `*.esvf`).
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Class to explain; defaults to each input's predicted class.
    #[arg(long)]
    pub class: Option<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub m_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub iterations_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<u64>,
    /// Drop inputs whose evidential score is below this value.
    #[arg(long)]
    pub min_evidential: Option<f64>,
    #[arg(long)]
    pub nmax: Option<usize>,
    #[arg(long)]
    pub strict_alg1: bool,
    #[arg(long, default_value_t = 16)]
    pub exhaustive_limit: usize,
    /// Grid table (CSV); printed to stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenModelArgs {
    #[arg(long)]
    pub kind: ModelKind,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 4)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 8)]
    pub hidden: usize,
    /// Largest scale of a per-scale model.
    #[arg(long, default_value_t = 4)]
    pub nmax: usize,
    /// Softmax leaf outputs; the empty prior becomes uniform.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, default_value_t = 1.0)]
    pub weight_scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GenFeaturesArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Add timestamps spaced by this many seconds.
    #[arg(long)]
    pub timestep: Option<f64>,
    /// Write the ESVF binary layout instead of text.
    #[arg(long)]
    pub binary: bool,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    /// Manifest written beside an earlier output.
    pub manifest: PathBuf,
    /// Write here instead of the recorded output path.
    #[arg(long)]
    pub output: Option<PathBuf>,
}
