//! Subspace distances.
//!
//! `d2` and `d2_inf` are the spectral and `2→∞` norms of `U₁ − U₂W` with `W`
//! the Frobenius-norm Procrustes minimizer. This is an upper bound on the
//! infimum over all orthogonal `W` and never exceeds `√2·‖sin Θ‖`.

use crate::decomp::svd_thin;
use crate::error::{LabError, Result};
use crate::matrix::{gemm, DenseMatrix, OrthonormalBasis};
use crate::norms::{spectral_norm, two_to_inf_norm};

#[derive(Clone, Debug)]
pub struct AlignmentResult {
    /// Orthogonal `k × k` aligner applied to the second basis.
    pub w: DenseMatrix,
    pub residual_spectral: f64,
    pub residual_two_inf: f64,
}

fn check_shapes(u1: &OrthonormalBasis, u2: &OrthonormalBasis) -> Result<()> {
    if u1.matrix().shape() != u2.matrix().shape() {
        return Err(LabError::invalid(format!(
            "basis shapes differ: {:?} vs {:?}",
            u1.matrix().shape(),
            u2.matrix().shape()
        )));
    }
    Ok(())
}

/// `argmin_W ‖U₁ − U₂W‖_F` over orthogonal `W`.
pub fn procrustes_rotation(u1: &OrthonormalBasis, u2: &OrthonormalBasis) -> Result<DenseMatrix> {
    check_shapes(u1, u2)?;
    let c = gemm(u2.matrix(), true, u1.matrix(), false);
    let (p, _, q) = svd_thin(&c)?;
    Ok(gemm(p.matrix(), false, q.matrix(), true))
}

/// `U₁ − U₂W` at the Procrustes minimizer, with `W`.
pub fn aligned_residual(u1: &OrthonormalBasis, u2: &OrthonormalBasis) -> Result<(DenseMatrix, DenseMatrix)> {
    let w = procrustes_rotation(u1, u2)?;
    let residual = u1.matrix().sub(&gemm(u2.matrix(), false, &w, false))?;
    Ok((residual, w))
}

pub fn procrustes_align(u1: &OrthonormalBasis, u2: &OrthonormalBasis) -> Result<AlignmentResult> {
    let (r, w) = aligned_residual(u1, u2)?;
    Ok(AlignmentResult {
        w,
        residual_spectral: spectral_norm(&r),
        residual_two_inf: two_to_inf_norm(&r),
    })
}

pub fn d2(u1: &OrthonormalBasis, u2: &OrthonormalBasis) -> Result<f64> {
    let (r, _) = aligned_residual(u1, u2)?;
    Ok(spectral_norm(&r))
}

pub fn d2_inf(u1: &OrthonormalBasis, u2: &OrthonormalBasis) -> Result<f64> {
    let (r, _) = aligned_residual(u1, u2)?;
    Ok(two_to_inf_norm(&r))
}

/// Sine of the largest principal angle, `‖(I − U₂U₂ᵀ)U₁‖`. This equals
/// `√(1 − σ_min(U₁ᵀU₂)²)` but keeps full relative accuracy at small angles,
/// where the cosine form loses half the digits.
pub fn sin_theta_norm(u1: &OrthonormalBasis, u2: &OrthonormalBasis) -> Result<f64> {
    check_shapes(u1, u2)?;
    let c = gemm(u2.matrix(), true, u1.matrix(), false);
    let r = u1.matrix().sub(&gemm(u2.matrix(), false, &c, false))?;
    let (_, s, _) = svd_thin(&r)?;
    Ok(s.first().copied().unwrap_or(0.0).min(1.0))
}

/// Principal angles in radians, ascending.
pub fn principal_angles(u1: &OrthonormalBasis, u2: &OrthonormalBasis) -> Result<Vec<f64>> {
    check_shapes(u1, u2)?;
    let c = gemm(u1.matrix(), true, u2.matrix(), false);
    let (_, s, _) = svd_thin(&c)?;
    Ok(s.into_iter().map(|v| v.clamp(0.0, 1.0).acos()).collect())
}
