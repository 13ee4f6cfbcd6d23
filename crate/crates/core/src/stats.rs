//! Quantiles and small summary statistics.

use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{LabError, Result};

/// Inverse standard normal CDF (Acklam's rational approximation followed by
/// one Halley refinement step; absolute error below 1e-12 on (0, 1)).
#[allow(clippy::excessive_precision)]
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(LabError::invalid(format!("normal quantile needs p in (0, 1), got {p}")));
    }
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    const P_LOW: f64 = 0.02425;
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// `z_{α/2}`, the upper `α/2` quantile of the standard normal.
pub fn z_two_sided(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LabError::invalid(format!("alpha must be in (0, 1), got {alpha}")));
    }
    normal_quantile(1.0 - alpha / 2.0)
}

pub fn chi2_cdf(x: f64, k: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    gamma_lr(k as f64 / 2.0, x / 2.0)
}

/// Quantile of the χ² distribution with `k` degrees of freedom: the
/// Wilson–Hilferty approximation refined by Newton steps on the regularized
/// lower incomplete gamma function.
pub fn chi2_quantile(prob: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(LabError::invalid("chi-square needs k >= 1"));
    }
    if prob == 0.0 {
        return Ok(0.0);
    }
    if !(prob > 0.0 && prob < 1.0) {
        return Err(LabError::invalid(format!("chi-square quantile needs p in [0, 1), got {prob}")));
    }
    let kf = k as f64;
    let z = normal_quantile(prob)?;
    let h = 2.0 / (9.0 * kf);
    let mut x = (kf * (1.0 - h + z * h.sqrt()).powi(3)).max(1e-8);
    let half = kf / 2.0;
    let log_norm = ln_gamma(half) + half * std::f64::consts::LN_2;
    for _ in 0..50 {
        let f = chi2_cdf(x, k) - prob;
        let log_pdf = (half - 1.0) * x.ln() - x / 2.0 - log_norm;
        let pdf = log_pdf.exp();
        if pdf <= 0.0 || !pdf.is_finite() {
            break;
        }
        let step = f / pdf;
        let next = if x - step <= 0.0 { x / 2.0 } else { x - step };
        let done = (next - x).abs() <= 1e-14 * x.max(1.0);
        x = next;
        if done {
            break;
        }
    }
    Ok(x)
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn median(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
