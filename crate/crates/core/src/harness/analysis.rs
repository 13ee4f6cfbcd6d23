use std::collections::BTreeMap;

use serde::Serialize;

use crate::apps::{entry_ci, CompletionResult};
use crate::error::{LabError, Result};
use crate::matrix::{DenseMatrix, OrthonormalBasis};
use crate::metrics::procrustes_rotation;
use crate::matrix::gemm;
use crate::models::{CompletionInstance, SbmInstance};
use crate::oracles::clt_row_covariance;
use crate::stats::{chi2_quantile, mean, median};

use super::ReplicateRecord;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoverageSummary {
    pub coverage: f64,
    pub covered: usize,
    /// Rows or entries that entered the fraction.
    pub total: usize,
    /// Rows dropped because their covariance was not positive definite.
    pub skipped: usize,
}

/// `rᵀC⁻¹r` through a Cholesky factorization; `None` when `C` is not
/// positive definite.
pub fn mahalanobis_sq(c: &DenseMatrix, r: &[f64]) -> Option<f64> {
    let k = c.rows();
    let mut l = vec![0.0; k * k];
    for j in 0..k {
        let mut d = c[(j, j)];
        for m in 0..j {
            d -= l[j * k + m] * l[j * k + m];
        }
        if !(d > 1e-300) {
            return None;
        }
        let djj = d.sqrt();
        l[j * k + j] = djj;
        for i in j + 1..k {
            let mut s = c[(i, j)];
            for m in 0..j {
                s -= l[i * k + m] * l[j * k + m];
            }
            l[i * k + j] = s / djj;
        }
    }
    // forward solve L y = r; the answer is ‖y‖²
    let mut y = vec![0.0; k];
    for i in 0..k {
        let mut s = r[i];
        for m in 0..i {
            s -= l[i * k + m] * y[m];
        }
        y[i] = s / l[i * k + i];
    }
    Some(y.iter().map(|v| v * v).sum())
}

/// Fraction of rows of `residuals` inside the `1 − α` ellipse of their own
/// covariance, `rᵢᵀCᵢ⁻¹rᵢ ≤ χ²_k(1 − α)`.
pub fn ellipse_coverage(residuals: &DenseMatrix, covs: &[DenseMatrix], alpha: f64) -> Result<CoverageSummary> {
    if covs.len() != residuals.rows() || covs.iter().any(|c| c.shape() != (residuals.cols(), residuals.cols())) {
        return Err(LabError::shape("one k x k covariance per residual row is required"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(LabError::invalid(format!("alpha must be in (0, 1], got {alpha}")));
    }
    let q = chi2_quantile(1.0 - alpha, residuals.cols())?;
    let mut covered = 0;
    let mut skipped = 0;
    for (i, c) in covs.iter().enumerate() {
        match mahalanobis_sq(c, &residuals.row(i)) {
            Some(d) if d <= q => covered += 1,
            Some(_) => {}
            None => skipped += 1,
        }
    }
    let total = covs.len() - skipped;
    let coverage = if total == 0 { f64::NAN } else { covered as f64 / total as f64 };
    Ok(CoverageSummary { coverage, covered, total, skipped })
}

/// Row-wise CLT check for an SBM embedding: rows of `Û_gW − U`, with `W`
/// the Procrustes rotation, against the covariance
/// `Λ⁻¹{Σⱼ Pᵢⱼ(1 − Pᵢⱼ)uⱼuⱼᵀ}Λ⁻¹`. The `n^{1+β}` scalings of the
/// standardized statistic cancel, so none is applied.
pub fn clt_coverage(inst: &SbmInstance, u_hat: &OrthonormalBasis, alpha: f64) -> Result<CoverageSummary> {
    if u_hat.cols() != inst.u.cols() || u_hat.rows() != inst.u.rows() {
        return Err(LabError::shape("estimate and truth differ in shape"));
    }
    let w = procrustes_rotation(&inst.u, u_hat)?;
    let residuals = gemm(u_hat.matrix(), false, &w, false).sub(inst.u.matrix())?;
    let covs = (0..inst.u.rows())
        .map(|i| clt_row_covariance(&inst.p_mat, &inst.u, &inst.lambda, i))
        .collect::<Result<Vec<_>>>()?;
    ellipse_coverage(&residuals, &covs, alpha)
}

/// Fraction of `entries` whose interval contains the true entry. A slack of
/// `1e−10·‖T‖_max` absorbs rounding when the interval has zero width.
pub fn ci_coverage(
    inst: &CompletionInstance,
    result: &CompletionResult,
    entries: &[(usize, usize)],
    alpha: f64,
) -> Result<CoverageSummary> {
    let slack = 1e-10 * inst.t.max_abs();
    let mut covered = 0;
    for &(i, j) in entries {
        let ci = entry_ci(result, &inst.t_hat, result.p_used, i, j, alpha)?;
        let t = inst.t[(i, j)];
        if ci.lo - slack <= t && t <= ci.hi + slack {
            covered += 1;
        }
    }
    let total = entries.len();
    let coverage = if total == 0 { f64::NAN } else { covered as f64 / total as f64 };
    Ok(CoverageSummary { coverage, covered, total, skipped: 0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    /// Slope of `−ln(metric)` on `ln n`.
    pub beta_hat: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub used: usize,
    /// Records without the metric or with a nonpositive value.
    pub dropped: usize,
}

/// Ordinary least squares of `−ln(metric)` on `ln n` over `records`.
pub fn rate_regression(records: &[ReplicateRecord], metric: &str) -> Result<RateFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut dropped = 0;
    for r in records {
        match r.metrics.get(metric) {
            Some(&v) if v > 0.0 && v.is_finite() => {
                xs.push((r.n as f64).ln());
                ys.push(-v.ln());
            }
            _ => dropped += 1,
        }
    }
    let mut distinct: Vec<f64> = xs.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(LabError::invalid(format!(
            "rate regression of {metric} needs at least 3 distinct n, got {}",
            distinct.len()
        )));
    }
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let beta_hat = sxy / sxx;
    let intercept = my - beta_hat * mx;
    let m = xs.len();
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - beta_hat * x).powi(2)).sum();
    let stderr = if m > 2 { (sse / (m - 2) as f64 / sxx).sqrt() } else { f64::NAN };
    Ok(RateFit { beta_hat, stderr, intercept, used: m, dropped })
}

/// One slope per replicate for power `g`, fitted across the plan's `n`
/// values.
pub fn slopes_by_replicate(records: &[ReplicateRecord], metric: &str, g: usize) -> Result<Vec<(usize, RateFit)>> {
    let mut groups: BTreeMap<usize, Vec<ReplicateRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.g == g) {
        groups.entry(r.replicate).or_default().push(r.clone());
    }
    groups
        .into_iter()
        .map(|(rep, recs)| Ok((rep, rate_regression(&recs, metric)?)))
        .collect()
}

/// Median of the per-replicate slopes at power `g`.
pub fn median_slope(records: &[ReplicateRecord], metric: &str, g: usize) -> Result<f64> {
    let slopes: Vec<f64> = slopes_by_replicate(records, metric, g)?
        .into_iter()
        .map(|(_, f)| f.beta_hat)
        .collect();
    Ok(median(&slopes))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n: usize,
    pub g: usize,
    pub metric: String,
    pub mean: f64,
    /// Standard error of the mean.
    pub stderr: f64,
    pub count: usize,
}

/// Mean and standard error of every metric per `(n, g)` cell.
pub fn summarize(records: &[ReplicateRecord]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(usize, usize, String), Vec<f64>> = BTreeMap::new();
    for r in records {
        for (name, &v) in &r.metrics {
            cells.entry((r.n, r.g, name.clone())).or_default().push(v);
        }
    }
    cells
        .into_iter()
        .map(|((n, g, metric), vals)| {
            let count = vals.len();
            let stderr = if count > 1 { (crate::stats::variance(&vals) / count as f64).sqrt() } else { 0.0 };
            SummaryRow { n, g, metric, mean: mean(&vals), stderr, count }
        })
        .collect()
}

/// Mean of `metric` over the records at `(n, g)`; `None` if there are none.
pub fn cell_mean(records: &[ReplicateRecord], n: usize, g: usize, metric: &str) -> Option<f64> {
    let vals: Vec<f64> = records
        .iter()
        .filter(|r| r.n == n && r.g == g)
        .filter_map(|r| r.metrics.get(metric).copied())
        .collect();
    (!vals.is_empty()).then(|| mean(&vals))
}

/// Share of replicates at `(n, g)` with `metric == 1`, counting failed
/// replicates as misses.
pub fn proportion(records: &[ReplicateRecord], n: usize, g: usize, metric: &str) -> Option<f64> {
    let cell: Vec<&ReplicateRecord> = records.iter().filter(|r| r.n == n && r.g == g).collect();
    if cell.is_empty() {
        return None;
    }
    let hits = cell.iter().filter(|r| r.metrics.get(metric) == Some(&1.0)).count();
    Some(hits as f64 / cell.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apps::{rsvd_complete, CompletionMode, SamplingRate};
    use crate::models::gen_completion;
    use crate::rng::{gaussian_matrix, RngStream};
    use crate::sketch::SketchConfig;

    /// Rows `L z` with `z` standard normal have covariance `LLᵀ`.
    fn gaussian_rows(n: usize, seed: u64) -> (DenseMatrix, Vec<DenseMatrix>) {
        let z = gaussian_matrix(n, 2, RngStream::new(seed, 0)).unwrap();
        let mut rows = DenseMatrix::zeros(n, 2);
        let mut covs = Vec::with_capacity(n);
        for i in 0..n {
            let s = 0.5 + (i % 7) as f64;
            let (l11, l21, l22) = (s, 0.3 * s, 0.2 + 0.1 * (i % 3) as f64);
            rows[(i, 0)] = l11 * z[(i, 0)];
            rows[(i, 1)] = l21 * z[(i, 0)] + l22 * z[(i, 1)];
            covs.push(DenseMatrix::from_rows(&[[l11 * l11, l11 * l21], [l11 * l21, l21 * l21 + l22 * l22]]).unwrap());
        }
        (rows, covs)
    }

    #[test]
    fn mahalanobis_matches_explicit_inverse() {
        let c = DenseMatrix::from_rows(&[[4.0, 1.0], [1.0, 3.0]]).unwrap();
        let r = [1.0, -2.0];
        // C⁻¹ = [[3, −1], [−1, 4]] / 11
        let want = (3.0 * 1.0 + 2.0 * 2.0 + 4.0 * 4.0) / 11.0;
        assert!((mahalanobis_sq(&c, &r).unwrap() - want).abs() < 1e-14);
        let singular = DenseMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(mahalanobis_sq(&singular, &r).is_none());
    }

    #[test]
    fn exact_gaussian_rows_have_nominal_coverage() {
        let (rows, covs) = gaussian_rows(4000, 11);
        let c = ellipse_coverage(&rows, &covs, 0.05).unwrap();
        assert!((0.93..=0.97).contains(&c.coverage), "{}", c.coverage);
        assert_eq!(c.skipped, 0);
        assert_eq!(ellipse_coverage(&rows, &covs, 1.0).unwrap().coverage, 0.0);
    }

    #[test]
    fn singular_covariances_are_skipped() {
        let (rows, mut covs) = gaussian_rows(10, 3);
        covs[4] = DenseMatrix::zeros(2, 2);
        let c = ellipse_coverage(&rows, &covs, 0.05).unwrap();
        assert_eq!((c.skipped, c.total), (1, 9));
    }

    #[test]
    fn degenerate_ci_covers_everything() {
        let inst = gen_completion(60, 3, 1.0, 1.0, 0.0, true, RngStream::new(8, 0)).unwrap();
        let cfg = SketchConfig::new(3, 6, 2, 4, RngStream::new(8, 1));
        let res = rsvd_complete(&inst.t_hat, SamplingRate::Known(1.0), None, 3, &cfg, CompletionMode::OneSided).unwrap();
        let entries: Vec<_> = (0..60).flat_map(|i| (0..60).map(move |j| (i, j))).collect();
        assert_eq!(ci_coverage(&inst, &res, &entries, 0.05).unwrap().coverage, 1.0);
    }

    #[test]
    fn ci_coverage_decreases_in_alpha() {
        let inst = gen_completion(200, 3, 1.0, 0.5, 1.0, true, RngStream::new(9, 0)).unwrap();
        let cfg = SketchConfig::new(3, 8, 3, 4, RngStream::new(9, 1));
        let res = rsvd_complete(&inst.t_hat, SamplingRate::Known(0.5), None, 3, &cfg, CompletionMode::OneSided).unwrap();
        let entries: Vec<_> = (0..200).map(|i| (i, (7 * i + 3) % 200)).collect();
        let cov = |a| ci_coverage(&inst, &res, &entries, a).unwrap().coverage;
        let (c05, c50) = (cov(0.05), cov(0.5));
        assert!(c50 <= c05, "{c50} > {c05}");
        assert!(c50 < 0.8 && c05 > 0.8, "{c50} {c05}");
    }
}
