//! Spectral clustering on the rows of `Û_g`.

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::matrix::{DenseMatrix, OrthonormalBasis};
use crate::rng::RngStream;
use crate::sketch::{rs_rsvd_sym, LowRankMode, SketchConfig};

/// Extra attempts with fresh seeding streams after a degenerate clustering.
pub const CLUSTER_RETRIES: usize = 5;
const LLOYD_MAX_ITERS: usize = 300;
const MEDIAN_MAX_ROUNDS: usize = 100;
const WEISZFELD_TOL: f64 = 1e-9;
const WEISZFELD_MAX_ITERS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clusterer {
    KMeans,
    KMedians,
}

#[derive(Clone, Debug)]
pub struct ClusteringResult {
    pub tau_hat: Vec<usize>,
    pub u_hat_g: OrthonormalBasis,
    /// Set by [`ClusteringResult::score`].
    pub exact_recovery: Option<bool>,
}

impl ClusteringResult {
    /// Compares against true labels, records exact recovery and returns the
    /// misclassification rate.
    pub fn score(&mut self, tau: &[usize]) -> Result<f64> {
        let m = match_labels(&self.tau_hat, tau)?;
        self.exact_recovery = Some(m.exact);
        Ok(m.error_rate)
    }
}

/// Row-major copy of the rows of `u`.
struct Points {
    data: Vec<f64>,
    dim: usize,
}

impl Points {
    fn from_rows(u: &DenseMatrix) -> Self {
        let (n, d) = u.shape();
        let mut data = vec![0.0; n * d];
        for j in 0..d {
            for (i, &v) in u.col(j).iter().enumerate() {
                data[i * d + j] = v;
            }
        }
        Self { data, dim: d }
    }

    fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(p, center);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn kmeans_pp(points: &Points, k: usize, stream: RngStream) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut rng = stream.rng();
    let first = rng.random_range(0..n);
    let mut centers = vec![points.get(first).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.get(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points.get(idx).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.get(i), &c));
        }
        centers.push(c);
    }
    centers
}

fn assign(points: &Points, centers: &[Vec<f64>]) -> Vec<usize> {
    (0..points.len()).map(|i| nearest(points.get(i), centers)).collect()
}

fn check_nonempty(labels: &[usize], k: usize) -> Result<()> {
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    if let Some(c) = counts.iter().position(|&c| c == 0) {
        return Err(LabError::DegenerateClustering(format!("cluster {c} is empty")));
    }
    Ok(())
}

fn kmeans_once(points: &Points, k: usize, stream: RngStream) -> Result<Vec<usize>> {
    let mut centers = kmeans_pp(points, k, stream);
    let mut labels = assign(points, &centers);
    for _ in 0..LLOYD_MAX_ITERS {
        let mut sums = vec![vec![0.0; points.dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            sums[l].iter_mut().zip(points.get(i)).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next = assign(points, &centers);
        if next == labels {
            break;
        }
        labels = next;
    }
    check_nonempty(&labels, k)?;
    Ok(labels)
}

/// Weiszfeld iteration for the geometric median of `members`.
fn geometric_median(points: &Points, members: &[usize], start: &[f64]) -> Vec<f64> {
    let mut y = start.to_vec();
    for _ in 0..WEISZFELD_MAX_ITERS {
        let mut num = vec![0.0; points.dim];
        let mut den = 0.0;
        for &i in members {
            let p = points.get(i);
            let d = sq_dist(p, &y).sqrt();
            if d < 1e-15 {
                continue;
            }
            num.iter_mut().zip(p).for_each(|(a, v)| *a += v / d);
            den += 1.0 / d;
        }
        if den == 0.0 {
            break;
        }
        let next: Vec<f64> = num.iter().map(|v| v / den).collect();
        let moved = sq_dist(&next, &y).sqrt();
        y = next;
        if moved <= WEISZFELD_TOL {
            break;
        }
    }
    y
}

fn kmedians_once(points: &Points, k: usize, stream: RngStream) -> Result<Vec<usize>> {
    let mut centers = kmeans_pp(points, k, stream);
    let mut labels = assign(points, &centers);
    for _ in 0..MEDIAN_MAX_ROUNDS {
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            if !members.is_empty() {
                *center = geometric_median(points, &members, center);
            }
        }
        let next = assign(points, &centers);
        if next == labels {
            break;
        }
        labels = next;
    }
    check_nonempty(&labels, k)?;
    Ok(labels)
}

/// Clusters the rows of `u` into `k` groups, retrying with fresh seeding
/// streams when a cluster ends up empty.
pub fn cluster_rows(u: &DenseMatrix, k: usize, clusterer: Clusterer, stream: RngStream) -> Result<Vec<usize>> {
    if k == 0 || k > u.rows() {
        return Err(LabError::invalid(format!("cannot form {k} clusters from {} rows", u.rows())));
    }
    let points = Points::from_rows(u);
    let mut last = None;
    for attempt in 0..=CLUSTER_RETRIES {
        let s = stream.derive_labeled("cluster", &[attempt as u64]);
        let run = match clusterer {
            Clusterer::KMeans => kmeans_once(&points, k, s),
            Clusterer::KMedians => kmedians_once(&points, k, s),
        };
        match run {
            Ok(labels) => return Ok(labels),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| LabError::DegenerateClustering("no attempt ran".into())))
}

/// rs-RSVD embedding with `k = d`, then clustering of its rows.
pub fn rsvd_spectral_cluster(
    a: &DenseMatrix,
    d: usize,
    k: usize,
    cfg: &SketchConfig,
    clusterer: Clusterer,
) -> Result<ClusteringResult> {
    if d > cfg.k_tilde {
        return Err(LabError::invalid(format!("embedding dimension {d} exceeds k_tilde = {}", cfg.k_tilde)));
    }
    let cfg = SketchConfig { k: d, ..*cfg };
    let out = rs_rsvd_sym(a, &cfg, LowRankMode::None)?;
    let tau_hat = cluster_rows(out.u_hat_g.matrix(), k, clusterer, cfg.stream)?;
    Ok(ClusteringResult { tau_hat, u_hat_g: out.u_hat_g, exact_recovery: None })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelMatch {
    /// `tau_hat` relabeled by the best permutation.
    pub permuted: Vec<usize>,
    pub exact: bool,
    pub error_rate: f64,
}

/// Largest label count accepted by [`match_labels`].
pub const MAX_MATCH_LABELS: usize = 8;

/// Best relabeling of `tau_hat` against `tau` by exhaustive search over
/// permutations.
pub fn match_labels(tau_hat: &[usize], tau: &[usize]) -> Result<LabelMatch> {
    if tau_hat.len() != tau.len() {
        return Err(LabError::invalid("label vectors differ in length"));
    }
    if tau.is_empty() {
        return Ok(LabelMatch { permuted: Vec::new(), exact: true, error_rate: 0.0 });
    }
    let k = tau_hat.iter().chain(tau).max().copied().unwrap_or(0) + 1;
    if k > MAX_MATCH_LABELS {
        return Err(LabError::Unsupported(format!(
            "label matching is exhaustive and limited to {MAX_MATCH_LABELS} labels, got {k}"
        )));
    }
    let mut confusion = vec![vec![0usize; k]; k];
    for (&a, &b) in tau_hat.iter().zip(tau) {
        confusion[a][b] += 1;
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let score = |p: &[usize]| (0..k).map(|a| confusion[a][p[a]]).sum::<usize>();
    let mut best = perm.clone();
    let mut best_score = score(&perm);
    // Heap's algorithm, iterative
    let mut c = vec![0usize; k];
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let s = score(&perm);
            if s > best_score {
                best_score = s;
                best = perm.clone();
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    let permuted: Vec<usize> = tau_hat.iter().map(|&a| best[a]).collect();
    let mismatches = tau.len() - best_score;
    Ok(LabelMatch {
        permuted,
        exact: mismatches == 0,
        error_rate: mismatches as f64 / tau.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> (DenseMatrix, Vec<usize>) {
        let centers = [[0.0, 0.0], [5.0, 5.0], [-5.0, 5.0]];
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for t in 0..10 {
                let dx = (t as f64 * 0.37).sin() * 0.3;
                let dy = (t as f64 * 0.71).cos() * 0.3;
                rows.push([center[0] + dx, center[1] + dy]);
                truth.push(c);
            }
        }
        (DenseMatrix::from_rows(&rows).unwrap(), truth)
    }

    #[test]
    fn kmeans_and_kmedians_separate_blobs() {
        let (x, truth) = blobs();
        for clusterer in [Clusterer::KMeans, Clusterer::KMedians] {
            let labels = cluster_rows(&x, 3, clusterer, RngStream::new(1, 0)).unwrap();
            assert!(match_labels(&labels, &truth).unwrap().exact, "{clusterer:?}");
        }
    }

    #[test]
    fn clustering_is_deterministic() {
        let (x, _) = blobs();
        let s = RngStream::new(9, 2);
        assert_eq!(
            cluster_rows(&x, 3, Clusterer::KMeans, s).unwrap(),
            cluster_rows(&x, 3, Clusterer::KMeans, s).unwrap()
        );
    }

    #[test]
    fn identical_points_are_degenerate() {
        let x = DenseMatrix::from_fn(6, 2, |_, _| 1.0);
        assert!(matches!(
            cluster_rows(&x, 2, Clusterer::KMeans, RngStream::new(0, 0)),
            Err(LabError::DegenerateClustering(_))
        ));
    }

    #[test]
    fn geometric_median_of_collinear_points() {
        let x = DenseMatrix::from_rows(&[[0.0], [1.0], [10.0]]).unwrap();
        let pts = Points::from_rows(&x);
        let m = geometric_median(&pts, &[0, 1, 2], &[3.0]);
        assert!((m[0] - 1.0).abs() < 1e-6, "{m:?}");
    }

    #[test]
    fn match_labels_cases() {
        let tau: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let m = match_labels(&tau, &tau).unwrap();
        assert!(m.exact && m.error_rate == 0.0);
        let swapped: Vec<usize> = tau.iter().map(|&t| 1 - t).collect();
        let m = match_labels(&swapped, &tau).unwrap();
        assert!(m.exact);
        assert_eq!(m.permuted, tau);
        let mut one_off = tau.clone();
        one_off[17] = 1 - one_off[17];
        let m = match_labels(&one_off, &tau).unwrap();
        assert!(!m.exact);
        assert!((m.error_rate - 0.01).abs() < 1e-15);
        let big: Vec<usize> = (0..20).map(|i| i % 9).collect();
        assert!(matches!(match_labels(&big, &big), Err(LabError::Unsupported(_))));
    }

    #[test]
    fn two_cliques_recovered() {
        let n = 100;
        let truth: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
        let a = DenseMatrix::from_fn(n, n, |i, j| if truth[i] == truth[j] { 1.0 } else { 0.0 });
        let cfg = SketchConfig::new(2, 4, 3, 2, RngStream::new(5, 0));
        let mut res = rsvd_spectral_cluster(&a, 2, 2, &cfg, Clusterer::KMeans).unwrap();
        assert_eq!(res.score(&truth).unwrap(), 0.0);
        assert_eq!(res.exact_recovery, Some(true));
    }
}
