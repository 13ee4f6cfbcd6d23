//! Closed-form quantities used to validate the main code paths: the
//! power-difference expansion, the phase-transition rate model, the row
//! covariance `Γᵢ` of the SBM eigenvector CLT and the oracle entry variance
//! `v*ᵢⱼ` of matrix completion.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::matrix::{dot, gemm, DenseMatrix, OrthonormalBasis};

/// `M̂^g − M^g` written as
/// `E^g + Σ_{ξ=0}^{g-2} Σ_{ℓ=0}^{g-2-ξ} M̂^ℓ E M^{g-1-ξ-ℓ} E^ξ + Σ_{ξ=0}^{g-2} M^{g-1-ξ} E^{ξ+1}`
/// with `E = M̂ − M`, evaluated term by term.
pub fn power_diff_expansion(m_hat: &DenseMatrix, m: &DenseMatrix, g: usize) -> Result<DenseMatrix> {
    if !m_hat.is_square() || m_hat.shape() != m.shape() {
        return Err(LabError::invalid(format!(
            "expansion needs equal square shapes, got {:?} and {:?}",
            m_hat.shape(),
            m.shape()
        )));
    }
    if g < 2 {
        return Err(LabError::invalid("expansion needs g >= 2"));
    }
    let n = m.rows();
    let e = m_hat.sub(m)?;
    let powers = |a: &DenseMatrix| {
        let mut out = vec![DenseMatrix::identity(n)];
        for p in 1..=g {
            let next = gemm(&out[p - 1], false, a, false);
            out.push(next);
        }
        out
    };
    let (mh_pow, m_pow, e_pow) = (powers(m_hat), powers(m), powers(&e));

    let mut total = e_pow[g].clone();
    for xi in 0..=g - 2 {
        for l in 0..=g - 2 - xi {
            let left = gemm(&mh_pow[l], false, &e, false);
            let mid = gemm(&left, false, &m_pow[g - 1 - xi - l], false);
            total = total.add(&gemm(&mid, false, &e_pow[xi], false))?;
        }
        total = total.add(&gemm(&m_pow[g - 1 - xi], false, &e_pow[xi + 1], false))?;
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMetric {
    D2,
    D2Inf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Optimal,
    Slow,
    None,
}

/// Signal strength `β` (with `‖M‖/‖E‖ ≍ n^{β/2}`), power count and metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    pub beta: f64,
    pub g: usize,
    pub metric: RateMetric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateVerdict {
    pub regime: Regime,
    /// Predicted exponent `e` in `error ≍ n^e`, up to logarithmic factors.
    pub exponent: f64,
}

const BOUNDARY_TOL: f64 = 1e-12;

impl RateModel {
    pub fn new(beta: f64, g: usize, metric: RateMetric) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(LabError::invalid(format!("beta = {beta} not in (0, 1]")));
        }
        if g == 0 {
            return Err(LabError::invalid("g must be at least 1"));
        }
        Ok(Self { beta, g, metric })
    }

    pub fn regime(&self) -> Regime {
        let g = self.g as f64;
        if g * self.beta <= 1.0 + BOUNDARY_TOL {
            Regime::None
        } else if (g - 1.0) * self.beta >= 1.0 - BOUNDARY_TOL {
            Regime::Optimal
        } else {
            Regime::Slow
        }
    }
}

/// Regime and error exponent: `d2` goes as `n^{-β/2}`, `n^{-(gβ-1)/2}` or
/// `1`; `d2inf` as `n^{-(β+1)/2}`, `n^{-gβ/2}` or `n^{-1/2}`.
pub fn rate_exponent(model: &RateModel) -> RateVerdict {
    let (b, g) = (model.beta, model.g as f64);
    let regime = model.regime();
    let exponent = match (model.metric, regime) {
        (RateMetric::D2, Regime::Optimal) => -b / 2.0,
        (RateMetric::D2, Regime::Slow) => -(g * b - 1.0) / 2.0,
        (RateMetric::D2, Regime::None) => 0.0,
        (RateMetric::D2Inf, Regime::Optimal) => -(b + 1.0) / 2.0,
        (RateMetric::D2Inf, Regime::Slow) => -g * b / 2.0,
        (RateMetric::D2Inf, Regime::None) => -0.5,
    };
    RateVerdict { regime, exponent }
}

/// `Λ⁻¹ {Σⱼ mᵢⱼ(1 − mᵢⱼ) uⱼuⱼᵀ} Λ⁻¹`, the row-`i` covariance without the
/// `n^{1+β}` normalization.
pub fn clt_row_covariance(p_mat: &DenseMatrix, u: &OrthonormalBasis, lambda: &[f64], i: usize) -> Result<DenseMatrix> {
    let n = p_mat.rows();
    let k = u.cols();
    if !p_mat.is_square() || u.rows() != n || lambda.len() != k || i >= n {
        return Err(LabError::invalid("clt covariance: inconsistent shapes or row index"));
    }
    if lambda.iter().any(|&l| l == 0.0 || !l.is_finite()) {
        return Err(LabError::invalid("clt covariance needs nonzero eigenvalues"));
    }
    let um = u.matrix();
    let mut s = DenseMatrix::zeros(k, k);
    for j in 0..n {
        let mij = p_mat[(i, j)];
        let w = mij * (1.0 - mij);
        if w == 0.0 {
            continue;
        }
        for b in 0..k {
            let ub = um[(j, b)] * w;
            for a in 0..k {
                s[(a, b)] += ub * um[(j, a)];
            }
        }
    }
    Ok(DenseMatrix::from_fn(k, k, |a, b| s[(a, b)] / (lambda[a] * lambda[b])))
}

/// `Γᵢ = n^{1+β} Λ⁻¹ {Σⱼ mᵢⱼ(1 − mᵢⱼ) uⱼuⱼᵀ} Λ⁻¹`.
pub fn clt_gamma_sbm(p_mat: &DenseMatrix, u: &OrthonormalBasis, lambda: &[f64], beta: f64, i: usize) -> Result<DenseMatrix> {
    let scale = (p_mat.rows() as f64).powf(1.0 + beta);
    Ok(clt_row_covariance(p_mat, u, lambda, i)?.scaled(scale))
}

/// Oracle variance of the first-order term `[UUᵀE]ᵢⱼ + [EUUᵀ]ᵢⱼ` for
/// `E = p⁻¹Ω∘(T + N) − T`:
/// `v*ᵢⱼ = p⁻¹Σ_{ℓ≠j}{(1−p)T²ᵢℓ + σ²}ζ²ℓⱼ + p⁻¹Σ_{ℓ≠i}{(1−p)T²ℓⱼ + σ²}ζ²ᵢℓ
///        + p⁻¹{(1−p)T²ᵢⱼ + σ²}(ζᵢᵢ + ζⱼⱼ)²` with `ζ = UUᵀ`.
pub fn vstar_oracle(t: &DenseMatrix, u: &OrthonormalBasis, p: f64, sigma: f64, i: usize, j: usize) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(LabError::invalid(format!("p = {p} not in (0, 1]")));
    }
    let n = t.rows();
    if !t.is_square() || u.rows() != n || i >= n || j >= n {
        return Err(LabError::invalid("vstar: inconsistent shapes or indices"));
    }
    let um = u.matrix();
    let ui = um.row(i);
    let uj = um.row(j);
    let var = |x: f64| ((1.0 - p) * x * x + sigma * sigma) / p;
    let mut total = 0.0;
    for l in 0..n {
        let ul = um.row(l);
        if l != j {
            let z = dot(&ul, &uj);
            total += var(t[(i, l)]) * z * z;
        }
        if l != i {
            let z = dot(&ui, &ul);
            total += var(t[(l, j)]) * z * z;
        }
    }
    let zii = dot(&ui, &ui);
    let zjj = dot(&uj, &uj);
    total += var(t[(i, j)]) * (zii + zjj).powi(2);
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, RngStream};

    fn rel(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        a.sub(b).unwrap().frobenius() / b.frobenius().max(1e-300)
    }

    fn direct_diff(m_hat: &DenseMatrix, m: &DenseMatrix, g: usize) -> DenseMatrix {
        let mut a = m_hat.clone();
        let mut b = m.clone();
        for _ in 1..g {
            a = a.matmul(m_hat).unwrap();
            b = b.matmul(m).unwrap();
        }
        a.sub(&b).unwrap()
    }

    #[test]
    fn g2_by_hand() {
        let m = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let e = DenseMatrix::from_rows(&[[0.0, 1.0], [-1.0, 2.0]]).unwrap();
        let m_hat = m.add(&e).unwrap();
        let expected = e
            .matmul(&e)
            .unwrap()
            .add(&e.matmul(&m).unwrap())
            .unwrap()
            .add(&m.matmul(&e).unwrap())
            .unwrap();
        assert_eq!(power_diff_expansion(&m_hat, &m, 2).unwrap(), expected);
    }

    #[test]
    fn zero_perturbation() {
        let m = gaussian_matrix(4, 4, RngStream::new(1, 0)).unwrap();
        assert_eq!(power_diff_expansion(&m, &m, 3).unwrap().max_abs(), 0.0);
        assert!(power_diff_expansion(&m, &m, 1).is_err());
    }

    #[test]
    fn random_expansion_matches_direct() {
        let m = gaussian_matrix(5, 5, RngStream::new(2, 0)).unwrap();
        let m_hat = gaussian_matrix(5, 5, RngStream::new(2, 1)).unwrap();
        let got = power_diff_expansion(&m_hat, &m, 4).unwrap();
        assert!(rel(&got, &direct_diff(&m_hat, &m, 4)) <= 1e-10);
    }

    #[test]
    fn documented_rate_examples() {
        let v = rate_exponent(&RateModel::new(1.0, 2, RateMetric::D2).unwrap());
        assert_eq!(v.regime, Regime::Optimal);
        assert!((v.exponent + 0.5).abs() < 1e-15);
        let v = rate_exponent(&RateModel::new(2.0 / 3.0, 2, RateMetric::D2).unwrap());
        assert_eq!(v.regime, Regime::Slow);
        assert!((v.exponent + 1.0 / 6.0).abs() < 1e-12);
        let v = rate_exponent(&RateModel::new(0.5, 2, RateMetric::D2).unwrap());
        assert_eq!((v.regime, v.exponent), (Regime::None, 0.0));
    }

    #[test]
    fn boundaries() {
        // g = 1 + 1/β is optimal, g = 1/β is none
        assert_eq!(RateModel::new(0.5, 3, RateMetric::D2).unwrap().regime(), Regime::Optimal);
        assert_eq!(RateModel::new(0.5, 2, RateMetric::D2Inf).unwrap().regime(), Regime::None);
        assert_eq!(RateModel::new(1.0 / 3.0, 4, RateMetric::D2).unwrap().regime(), Regime::Optimal);
        assert_eq!(RateModel::new(1.0 / 3.0, 3, RateMetric::D2).unwrap().regime(), Regime::None);
        assert_eq!(RateModel::new(0.4, 3, RateMetric::D2).unwrap().regime(), Regime::Slow);
        let v = rate_exponent(&RateModel::new(1.0, 1, RateMetric::D2Inf).unwrap());
        assert_eq!((v.regime, v.exponent), (Regime::None, -0.5));
        assert!(RateModel::new(0.0, 2, RateMetric::D2).is_err());
        assert!(RateModel::new(1.5, 2, RateMetric::D2).is_err());
        assert!(RateModel::new(0.5, 0, RateMetric::D2).is_err());
    }

    #[test]
    fn vstar_noiseless_full() {
        let t = DenseMatrix::from_fn(6, 6, |i, j| (i + j) as f64);
        let u = crate::decomp::qr_thin(&gaussian_matrix(6, 2, RngStream::new(3, 0)).unwrap()).unwrap().0;
        assert_eq!(vstar_oracle(&t, &u, 1.0, 0.0, 1, 2).unwrap(), 0.0);
        assert!(vstar_oracle(&t, &u, 0.0, 0.0, 1, 2).is_err());
        let a = vstar_oracle(&t, &u, 0.4, 0.3, 1, 4).unwrap();
        let b = vstar_oracle(&t, &u, 0.4, 0.3, 4, 1).unwrap();
        assert!((a - b).abs() <= 1e-12 * a);
    }
}
