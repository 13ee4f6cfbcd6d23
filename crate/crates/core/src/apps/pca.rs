//! Principal components from data with entries missing at random.

use crate::error::{LabError, Result};
use crate::eig::sym_eig_top;
use crate::matrix::{gemm, DenseMatrix, OrthonormalBasis};
use crate::sketch::{rs_rsvd_sym, rs_rsvd_sym_path, LowRankMode, SketchConfig};

/// `Q = p⁻²·X_obs·X_obsᵀ` with its diagonal set to zero.
pub fn missing_pca_gram(x_obs: &DenseMatrix, p: f64) -> Result<DenseMatrix> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(LabError::invalid(format!("p = {p} not in (0, 1]")));
    }
    let mut q = gemm(x_obs, false, x_obs, true);
    q.symmetrize();
    q.scale_in_place(1.0 / (p * p));
    for i in 0..q.rows() {
        q[(i, i)] = 0.0;
    }
    Ok(q)
}

/// Leading `k` principal directions: rs-RSVD of the off-diagonal Gram matrix.
pub fn rsvd_missing_pca(x_obs: &DenseMatrix, p: f64, k: usize, cfg: &SketchConfig) -> Result<OrthonormalBasis> {
    let q = missing_pca_gram(x_obs, p)?;
    let cfg = SketchConfig { k, ..*cfg };
    Ok(rs_rsvd_sym(&q, &cfg, LowRankMode::None)?.u_hat_g)
}

/// Baseline: the exact top-`k` eigenvectors of the off-diagonal Gram matrix.
pub fn exact_missing_pca(x_obs: &DenseMatrix, p: f64, k: usize) -> Result<OrthonormalBasis> {
    Ok(sym_eig_top(&missing_pca_gram(x_obs, p)?, k)?.vectors)
}

/// [`rsvd_missing_pca`] for every `g` in `1..=cfg.g` with one test matrix.
pub fn rsvd_missing_pca_path(x_obs: &DenseMatrix, p: f64, k: usize, cfg: &SketchConfig) -> Result<Vec<OrthonormalBasis>> {
    let q = missing_pca_gram(x_obs, p)?;
    let cfg = SketchConfig { k, ..*cfg };
    Ok(rs_rsvd_sym_path(&q, &cfg, LowRankMode::None)?
        .into_iter()
        .map(|o| o.u_hat_g)
        .collect())
}
