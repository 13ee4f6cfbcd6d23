use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use rsvdlab::apps::{Clusterer, CompletionMode};

#[derive(Parser, Debug)]
#[command(name = "rsvdlab", version, about = "Repeated-sampling randomized SVD and its applications")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Approximate leading singular vectors of a matrix.
    Svd(SvdArgs),
    /// Spectral clustering of a graph adjacency matrix.
    Cluster(ClusterArgs),
    /// Low-rank completion with entrywise confidence intervals.
    Complete(CompleteArgs),
    /// Principal components from data with missing entries.
    Pca(PcaArgs),
    /// Run a Monte-Carlo experiment plan.
    Experiment(ExperimentArgs),
}

/// Sketch settings shared by the decomposition commands. Absent sizes get
/// defaults from the matrix dimension.
#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SketchArgs {
    /// Columns per sketch [default: k + 5, at most n].
    #[arg(long)]
    pub ktilde: Option<usize>,
    /// Number of independent sketches [default: ceil(ln n), shrunk to fit n].
    #[arg(long)]
    pub an: Option<usize>,
    /// Power iterations.
    #[arg(long, default_value_t = 2)]
    pub g: usize,
    /// Master seed; the RSVDLAB_SEED environment variable takes precedence.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Where the input matrix comes from: a Matrix Market file or a generator
/// spec such as `sbm:n=1000,rho=1`.
#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct InputArgs {
    /// Matrix Market input file.
    #[arg(required_unless_present = "gen", conflicts_with = "gen")]
    pub input: Option<PathBuf>,
    /// Generator spec `kind:key=value,...` (kinds: sbm, completion, edm, pca).
    #[arg(long)]
    pub gen: Option<String>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CommonArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// JSON object whose keys override the corresponding flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SvdArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Target rank.
    #[arg(long)]
    pub k: usize,
    /// Treat the input as symmetric (the default).
    #[arg(long, conflicts_with = "asym")]
    pub sym: bool,
    /// Treat the input as a general rectangular matrix.
    #[arg(long)]
    pub asym: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub sketch: SketchArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClustererArg {
    KMeans,
    KMedians,
}

impl From<ClustererArg> for Clusterer {
    fn from(c: ClustererArg) -> Self {
        match c {
            ClustererArg::KMeans => Clusterer::KMeans,
            ClustererArg::KMedians => Clusterer::KMedians,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ClusterArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Number of communities.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub blocks: usize,
    /// Embedding dimension [default: K].
    #[arg(long)]
    pub d: Option<usize>,
    /// True labels, one per line (a `node,label` CSV is also accepted).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Independent repetitions; each redraws the sketch and any generated graph.
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, value_enum, default_value_t = ClustererArg::KMedians)]
    pub clusterer: ClustererArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub sketch: SketchArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    OneSided,
    Symmetrized,
}

impl From<ModeArg> for CompletionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::OneSided => CompletionMode::OneSided,
            ModeArg::Symmetrized => CompletionMode::Symmetrized,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CompleteArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Sampling probability, or `auto` for the observed fraction.
    #[arg(long, default_value = "auto")]
    pub p: String,
    /// Observation mask (nonzero = observed); otherwise zeros count as missing.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Rank [default: the generator's rank].
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum, default_value_t = ModeArg::OneSided)]
    pub mode: ModeArg,
    /// Entry interval request `i,j,alpha` with zero-based indices; repeatable.
    #[arg(long)]
    pub ci: Vec<String>,
    /// Use the exact eigendecomposition instead of the sketch.
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub sketch: SketchArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PcaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Sampling probability, or `auto` for the fraction of nonzero entries.
    #[arg(long, default_value = "auto")]
    pub p: String,
    /// Number of components [default: the generator's rank].
    #[arg(long)]
    pub k: Option<usize>,
    /// Use the exact eigendecomposition of the Gram matrix.
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub sketch: SketchArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentArgs {
    /// Plan file (JSON).
    #[arg(long)]
    pub plan: PathBuf,
    /// Worker threads; overrides the plan's `parallelism`.
    #[arg(long)]
    pub parallel: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}
