//! `--gen kind:key=value,...` specs for running commands without input files.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use rsvdlab::models::{
    bernoulli_mask, gen_completion, gen_edm, gen_missing_pca, gen_sbm_with, CompletionInstance, MissingPcaInstance,
    SbmInstance, SbmOptions,
};
use rsvdlab::{DenseMatrix, RngStream};

use crate::error::{CliError, CliResult};

/// Two-block SBM by default, with `B = [[p_in, p_out], [p_out, p_in]]` and
/// `ρ = rho·n^(−gamma)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbmGen {
    pub n: usize,
    #[serde(rename = "K", default = "two")]
    pub blocks: usize,
    #[serde(default = "p_in")]
    pub p_in: f64,
    #[serde(default = "p_out")]
    pub p_out: f64,
    #[serde(default = "one")]
    pub rho: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub hollow: bool,
    /// Exact block sizes instead of iid labels.
    #[serde(default = "yes")]
    pub equal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletionGen {
    pub n: usize,
    #[serde(default = "three")]
    pub k: usize,
    #[serde(default = "one")]
    pub p: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "yes")]
    pub homogeneous: bool,
}

/// Squared distances of uniform points in a box, observed under a
/// symmetric Bernoulli(p) mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdmGen {
    pub n: usize,
    #[serde(default = "two")]
    pub dim: usize,
    #[serde(rename = "box", default = "one")]
    pub box_size: f64,
    #[serde(default = "one")]
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcaGen {
    pub d: usize,
    pub m: usize,
    #[serde(default = "two")]
    pub k: usize,
    #[serde(default = "one")]
    pub p: f64,
    #[serde(default)]
    pub sigma: f64,
}

fn two() -> usize {
    2
}

fn three() -> usize {
    3
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn p_in() -> f64 {
    0.8
}

fn p_out() -> f64 {
    0.3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenSpec {
    Sbm(SbmGen),
    Completion(CompletionGen),
    Edm(EdmGen),
    Pca(PcaGen),
}

/// A drawn instance together with what the commands need from it.
pub enum Generated {
    Sbm(SbmInstance),
    Completion(CompletionInstance),
    Edm { dist: DenseMatrix, mask: DenseMatrix, observed: DenseMatrix, rank: usize },
    Pca(MissingPcaInstance),
}

impl Generated {
    /// The matrix a command operates on.
    pub fn observed(&self) -> &DenseMatrix {
        match self {
            Generated::Sbm(i) => &i.a,
            Generated::Completion(i) => &i.t_hat,
            Generated::Edm { observed, .. } => observed,
            Generated::Pca(i) => &i.x_obs,
        }
    }
}

fn scalar(raw: &str) -> Value {
    if let Ok(b) = raw.parse::<bool>() {
        return Value::Bool(b);
    }
    if let Ok(u) = raw.parse::<u64>() {
        return Value::from(u);
    }
    match raw.parse::<f64>() {
        Ok(x) if x.is_finite() => Value::from(x),
        _ => Value::String(raw.to_string()),
    }
}

fn fields<T: DeserializeOwned>(kind: &str, map: Map<String, Value>) -> CliResult<T> {
    serde_json::from_value(Value::Object(map)).map_err(|e| CliError::usage(format!("bad `{kind}` generator: {e}")))
}

impl GenSpec {
    pub fn parse(spec: &str) -> CliResult<Self> {
        let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let mut map = Map::new();
        for pair in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("generator field `{pair}` is not key=value")))?;
            if map.insert(k.trim().to_string(), scalar(v.trim())).is_some() {
                return Err(CliError::usage(format!("generator field `{k}` given twice")));
            }
        }
        match kind {
            "sbm" => Ok(GenSpec::Sbm(fields(kind, map)?)),
            "completion" => Ok(GenSpec::Completion(fields(kind, map)?)),
            "edm" => Ok(GenSpec::Edm(fields(kind, map)?)),
            "pca" => Ok(GenSpec::Pca(fields(kind, map)?)),
            other => Err(CliError::usage(format!(
                "unknown generator `{other}` (expected sbm, completion, edm or pca)"
            ))),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            GenSpec::Sbm(_) => "sbm",
            GenSpec::Completion(_) => "completion",
            GenSpec::Edm(_) => "edm",
            GenSpec::Pca(_) => "pca",
        }
    }

    pub fn draw(&self, stream: RngStream) -> CliResult<Generated> {
        Ok(match self {
            GenSpec::Sbm(s) => {
                let k = s.blocks;
                if k == 0 {
                    return Err(CliError::usage("sbm generator needs K >= 1"));
                }
                let b = DenseMatrix::from_fn(k, k, |i, j| if i == j { s.p_in } else { s.p_out });
                let pi = vec![1.0 / k as f64; k];
                let rho = s.rho * (s.n as f64).powf(-s.gamma);
                let opts = SbmOptions { hollow: s.hollow, equal_sizes: s.equal };
                Generated::Sbm(gen_sbm_with(s.n, &b, &pi, rho, k, stream, opts)?)
            }
            GenSpec::Completion(c) => {
                Generated::Completion(gen_completion(c.n, c.k, c.scale, c.p, c.sigma, c.homogeneous, stream)?)
            }
            GenSpec::Edm(e) => {
                let (dist, _) = gen_edm(e.n, e.dim, e.box_size, stream.derive_labeled("points", &[]))?;
                let mask = bernoulli_mask(e.n, e.p, stream.derive_labeled("mask", &[]))?;
                let observed = dist.hadamard(&mask)?;
                Generated::Edm { dist, mask, observed, rank: e.dim + 2 }
            }
            GenSpec::Pca(p) => Generated::Pca(gen_missing_pca(p.d, p.m, p.k, p.p, p.sigma, stream)?),
        })
    }
}
