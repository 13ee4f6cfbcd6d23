//! Matrix completion from a partially observed noisy symmetric matrix, with
//! entrywise normal confidence intervals.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::eig::sym_eig_top;
use crate::matrix::{dot, gemm, DenseMatrix, OrthonormalBasis};
use crate::sketch::{rs_rsvd_sym, rs_rsvd_sym_path, LowRankMode, RsvdOutput, SketchConfig};
use crate::stats::z_two_sided;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionMode {
    /// `p⁻¹ÛÛᵀT̂`
    OneSided,
    /// `(2p)⁻¹(ÛÛᵀT̂ + T̂ÛÛᵀ)`
    Symmetrized,
}

impl From<CompletionMode> for LowRankMode {
    fn from(m: CompletionMode) -> Self {
        match m {
            CompletionMode::OneSided => LowRankMode::OneSided,
            CompletionMode::Symmetrized => LowRankMode::Symmetrized,
        }
    }
}

/// Sampling probability: known, or estimated from the observation pattern.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingRate {
    Known(f64),
    /// Fraction of observed entries; an explicit mask wins, otherwise exact
    /// zeros count as missing.
    Auto,
}

#[derive(Clone, Debug)]
pub struct CompletionResult {
    pub t_hat_g: DenseMatrix,
    pub u_hat_g: OrthonormalBasis,
    pub mode: CompletionMode,
    pub p_used: f64,
    pub g: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryCI {
    pub i: usize,
    pub j: usize,
    pub estimate: f64,
    pub v_hat: f64,
    pub lo: f64,
    pub hi: f64,
    pub alpha: f64,
}

impl EntryCI {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Observed fraction of the `n²` entries.
pub fn estimate_p(t_hat: &DenseMatrix, mask: Option<&DenseMatrix>) -> Result<f64> {
    let total = t_hat.as_slice().len() as f64;
    let observed = match mask {
        Some(m) => {
            if m.shape() != t_hat.shape() {
                return Err(LabError::invalid("mask shape differs from the observed matrix"));
            }
            m.as_slice().iter().filter(|&&v| v != 0.0).count()
        }
        None => t_hat.as_slice().iter().filter(|&&v| v != 0.0).count(),
    };
    let p = observed as f64 / total;
    if p == 0.0 {
        return Err(LabError::invalid("no observed entries, cannot estimate p"));
    }
    Ok(p)
}

fn resolve_p(t_hat: &DenseMatrix, p: SamplingRate, mask: Option<&DenseMatrix>) -> Result<f64> {
    match p {
        SamplingRate::Known(p) if p > 0.0 && p <= 1.0 => Ok(p),
        SamplingRate::Known(p) => Err(LabError::invalid(format!("p = {p} not in (0, 1]"))),
        SamplingRate::Auto => estimate_p(t_hat, mask),
    }
}

fn into_result(out: RsvdOutput, mode: CompletionMode, p: f64) -> CompletionResult {
    CompletionResult {
        t_hat_g: out.low_rank.expect("low-rank output requested"),
        u_hat_g: out.u_hat_g,
        mode,
        p_used: p,
        g: out.g,
    }
}

/// Completes `t_hat` with the rank-`k` rs-RSVD of `p⁻¹T̂`.
pub fn rsvd_complete(
    t_hat: &DenseMatrix,
    p: SamplingRate,
    mask: Option<&DenseMatrix>,
    k: usize,
    cfg: &SketchConfig,
    mode: CompletionMode,
) -> Result<CompletionResult> {
    let p = resolve_p(t_hat, p, mask)?;
    let cfg = SketchConfig { k, ..*cfg };
    let out = rs_rsvd_sym(&t_hat.scaled(1.0 / p), &cfg, mode.into())?;
    Ok(into_result(out, mode, p))
}

/// [`rsvd_complete`] for every `g` in `1..=cfg.g` with one test matrix.
pub fn rsvd_complete_path(
    t_hat: &DenseMatrix,
    p: SamplingRate,
    mask: Option<&DenseMatrix>,
    k: usize,
    cfg: &SketchConfig,
    mode: CompletionMode,
) -> Result<Vec<CompletionResult>> {
    let p = resolve_p(t_hat, p, mask)?;
    let cfg = SketchConfig { k, ..*cfg };
    let outs = rs_rsvd_sym_path(&t_hat.scaled(1.0 / p), &cfg, mode.into())?;
    Ok(outs.into_iter().map(|o| into_result(o, mode, p)).collect())
}

/// Baseline for [`rsvd_complete`] with the exact top-`k` eigenvectors of
/// `p⁻¹T̂` in place of the sketch. The result carries `g = 0`.
pub fn exact_complete(
    t_hat: &DenseMatrix,
    p: SamplingRate,
    mask: Option<&DenseMatrix>,
    k: usize,
    mode: CompletionMode,
) -> Result<CompletionResult> {
    let p = resolve_p(t_hat, p, mask)?;
    let scaled = t_hat.scaled(1.0 / p);
    let u = sym_eig_top(&scaled, k)?.vectors;
    let ut_m = gemm(u.matrix(), true, &scaled, false);
    let mut t_hat_g = gemm(u.matrix(), false, &ut_m, false);
    if mode == CompletionMode::Symmetrized {
        t_hat_g.symmetrize();
    }
    Ok(CompletionResult { t_hat_g, u_hat_g: u, mode, p_used: p, g: 0 })
}

/// Plug-in variance
/// `v̂ᵢⱼ = Σ_{ℓ≠j}Ê²ᵢℓζ̂²ℓⱼ + Σ_{ℓ≠i}Ê²ℓⱼζ̂²ᵢℓ + Ê²ᵢⱼ(ζ̂ᵢᵢ + ζ̂ⱼⱼ)²`
/// with `Ê = T̂_g − p⁻¹T̂` and `ζ̂ = ÛÛᵀ`, and the interval
/// `[T̂_g]ᵢⱼ ± z_{α/2}√v̂ᵢⱼ`.
pub fn entry_ci(result: &CompletionResult, t_hat: &DenseMatrix, p: f64, i: usize, j: usize, alpha: f64) -> Result<EntryCI> {
    let n = t_hat.rows();
    if result.t_hat_g.shape() != t_hat.shape() || !t_hat.is_square() {
        return Err(LabError::invalid("completion result and observation differ in shape"));
    }
    if i >= n || j >= n {
        return Err(LabError::invalid(format!("entry ({i}, {j}) outside a {n}x{n} matrix")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(LabError::invalid(format!("p = {p} not in (0, 1]")));
    }
    let z = z_two_sided(alpha)?;
    let tg = &result.t_hat_g;
    let u = result.u_hat_g.matrix();
    let e = |a: usize, b: usize| tg[(a, b)] - t_hat[(a, b)] / p;
    let ui = u.row(i);
    let uj = u.row(j);
    let mut v = 0.0;
    let mut ul = vec![0.0; u.cols()];
    for l in 0..n {
        for (c, x) in ul.iter_mut().enumerate() {
            *x = u[(l, c)];
        }
        if l != j {
            let zeta = dot(&ul, &uj);
            v += e(i, l).powi(2) * zeta * zeta;
        }
        if l != i {
            let zeta = dot(&ui, &ul);
            v += e(l, j).powi(2) * zeta * zeta;
        }
    }
    v += e(i, j).powi(2) * (dot(&ui, &ui) + dot(&uj, &uj)).powi(2);
    let estimate = tg[(i, j)];
    let half = z * v.sqrt();
    Ok(EntryCI { i, j, estimate, v_hat: v, lo: estimate - half, hi: estimate + half, alpha })
}
