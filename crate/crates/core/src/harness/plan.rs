use serde::{Deserialize, Serialize};

use crate::apps::{Clusterer, CompletionMode};
use crate::error::{LabError, Result};
use crate::matrix::DenseMatrix;
use crate::sketch::SketchConfig;

/// A sketch size that is either fixed or a multiple of `⌈ln n⌉`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SizeRule {
    Fixed(usize),
    Log { log: usize },
}

impl SizeRule {
    pub fn resolve(&self, n: usize) -> usize {
        match *self {
            SizeRule::Fixed(v) => v,
            SizeRule::Log { log } => log * SketchConfig::log_repeats(n),
        }
    }
}

fn log_rule() -> SizeRule {
    SizeRule::Log { log: 1 }
}

/// `ρₙ = c·n^{−γ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sparsity {
    pub c: f64,
    #[serde(default)]
    pub gamma: f64,
}

impl Sparsity {
    pub const DENSE: Sparsity = Sparsity { c: 1.0, gamma: 0.0 };

    pub fn at(&self, n: usize) -> f64 {
        self.c * (n as f64).powf(-self.gamma)
    }
}

fn default_b() -> Vec<Vec<f64>> {
    vec![vec![0.8, 0.3], vec![0.3, 0.8]]
}

fn default_alpha() -> f64 {
    0.05
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbmParams {
    #[serde(default = "default_b")]
    pub b: Vec<Vec<f64>>,
    /// Block proportions; balanced when absent.
    #[serde(default)]
    pub pi: Option<Vec<f64>>,
    pub rho: Sparsity,
    #[serde(default = "log_rule")]
    pub a_n: SizeRule,
    pub k_tilde: SizeRule,
    /// Embedding dimension; the number of blocks when absent.
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default = "default_clusterer")]
    pub clusterer: Clusterer,
    #[serde(default)]
    pub hollow: bool,
    /// Exact block sizes `n·πₖ` rather than iid labels.
    #[serde(default = "yes")]
    pub equal_sizes: bool,
    /// Divide `d₂→∞` by `√ln n` before recording it.
    #[serde(default = "yes")]
    pub log_adjust_d2inf: bool,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_clusterer() -> Clusterer {
    Clusterer::KMedians
}

impl SbmParams {
    pub fn b_matrix(&self) -> Result<DenseMatrix> {
        DenseMatrix::from_rows(&self.b)
    }

    pub fn blocks(&self) -> usize {
        self.b.len()
    }

    pub fn proportions(&self) -> Vec<f64> {
        self.pi
            .clone()
            .unwrap_or_else(|| vec![1.0 / self.blocks() as f64; self.blocks()])
    }

    pub fn dim(&self) -> usize {
        self.d.unwrap_or(self.blocks())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CiParams {
    pub k: usize,
    #[serde(default = "one")]
    pub signal_scale: f64,
    pub p: f64,
    /// Noise level relative to `‖T‖_max`.
    pub sigma_rel: f64,
    #[serde(default = "log_rule")]
    pub a_n: SizeRule,
    pub k_tilde: SizeRule,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub entry_sample: usize,
    #[serde(default = "one_sided")]
    pub mode: CompletionMode,
}

fn one() -> f64 {
    1.0
}

fn one_sided() -> CompletionMode {
    CompletionMode::OneSided
}

/// `n_grid` holds the dimension `d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcaParams {
    /// Sample size.
    pub m: usize,
    pub k: usize,
    pub p: f64,
    pub sigma: f64,
    #[serde(default = "log_rule")]
    pub a_n: SizeRule,
    pub k_tilde: SizeRule,
    #[serde(default = "yes")]
    pub exact_baseline: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdmParams {
    #[serde(default = "two")]
    pub dim: usize,
    #[serde(default = "one")]
    pub box_size: f64,
    pub p: f64,
    /// Rank used for completion; `dim + 2` when absent.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "log_rule")]
    pub a_n: SizeRule,
    pub k_tilde: SizeRule,
    #[serde(default = "yes")]
    pub exact_baseline: bool,
}

fn two() -> usize {
    2
}

impl EdmParams {
    pub fn rank(&self) -> usize {
        self.k.unwrap_or(self.dim + 2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model_params", rename_all = "snake_case")]
pub enum PlanKind {
    RateRegression(SbmParams),
    RecoveryTable(SbmParams),
    CltCoverage(SbmParams),
    CiCoverage(CiParams),
    PcaSweep(PcaParams),
    EdmCompletion(EdmParams),
}

impl PlanKind {
    pub fn name(&self) -> &'static str {
        match self {
            PlanKind::RateRegression(_) => "rate_regression",
            PlanKind::RecoveryTable(_) => "recovery_table",
            PlanKind::CltCoverage(_) => "clt_coverage",
            PlanKind::CiCoverage(_) => "ci_coverage",
            PlanKind::PcaSweep(_) => "pca_sweep",
            PlanKind::EdmCompletion(_) => "edm_completion",
        }
    }
}

fn default_parallelism() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    #[serde(flatten)]
    pub kind: PlanKind,
    pub n_grid: Vec<usize>,
    pub g_list: Vec<usize>,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plans serialize")
    }

    /// An empty `n_grid` or `g_list` is accepted and yields no records.
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(LabError::invalid("replicates must be at least 1"));
        }
        if self.parallelism == 0 {
            return Err(LabError::invalid("parallelism must be at least 1"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LabError::invalid("n_grid must be strictly increasing"));
        }
        if self.g_list.windows(2).any(|w| w[0] >= w[1]) || self.g_list.first() == Some(&0) {
            return Err(LabError::invalid("g_list must be strictly increasing and start at 1 or above"));
        }
        let alpha_ok = |a: f64| a > 0.0 && a <= 1.0;
        match &self.kind {
            PlanKind::RateRegression(s) | PlanKind::RecoveryTable(s) | PlanKind::CltCoverage(s) => {
                s.b_matrix()?;
                if s.blocks() == 0 || s.proportions().len() != s.blocks() {
                    return Err(LabError::invalid("pi must have one entry per block"));
                }
                if !alpha_ok(s.alpha) {
                    return Err(LabError::invalid("alpha must be in (0, 1]"));
                }
            }
            PlanKind::CiCoverage(c) => {
                if c.entry_sample == 0 || !(c.alpha > 0.0 && c.alpha < 1.0) {
                    return Err(LabError::invalid("need entry_sample >= 1 and alpha in (0, 1)"));
                }
            }
            PlanKind::PcaSweep(_) | PlanKind::EdmCompletion(_) => {}
        }
        Ok(())
    }
}
