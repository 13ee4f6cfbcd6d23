//! Seeded generators for the signal-plus-noise models, each returning the
//! observation together with its ground truth.
//!
//! Block-structured signals (`ρZBZᵀ` for the SBM, `ZCZᵀ` for homogeneous
//! completion) get their eigenpairs from the small `K × K` problem
//! `D B D` with `D = diag(√block sizes)`, which is exact and avoids an
//! `n × n` eigendecomposition.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::RngExt;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::decomp::{qr_thin, svd_thin};
use crate::eig::sym_eig;
use crate::error::{LabError, Result};
use crate::io::write_matrix_market;
use crate::matrix::{gemm, DenseMatrix, OrthonormalBasis};
use crate::rng::{gaussian_matrix, RngStream};

#[derive(Clone, Debug)]
pub struct SbmInstance {
    pub a: DenseMatrix,
    pub p_mat: DenseMatrix,
    pub tau: Vec<usize>,
    pub u: OrthonormalBasis,
    pub lambda: Vec<f64>,
    pub rho: f64,
    pub stream: RngStream,
}

#[derive(Clone, Debug)]
pub struct CompletionInstance {
    pub t: DenseMatrix,
    pub t_hat: DenseMatrix,
    pub omega: DenseMatrix,
    pub p: f64,
    pub sigma: f64,
    pub u: OrthonormalBasis,
    pub lambda: Vec<f64>,
    pub stream: RngStream,
}

#[derive(Clone, Debug)]
pub struct MissingPcaInstance {
    pub x_obs: DenseMatrix,
    pub b: DenseMatrix,
    pub f: DenseMatrix,
    pub p: f64,
    pub sigma: f64,
    pub u: OrthonormalBasis,
    pub lambda: Vec<f64>,
    pub stream: RngStream,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    Gaussian,
    /// Symmetric ±σ signs.
    Bounded,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SbmOptions {
    /// Zero the adjacency diagonal (no self-loops).
    pub hollow: bool,
    /// Blocks of exactly `n·πₖ` nodes (largest remainders round up) in a
    /// random order, instead of iid labels.
    pub equal_sizes: bool,
}

/// Block sizes `⌊n·πₖ⌋`, with the leftover nodes given to the largest
/// fractional parts (lowest index first on ties).
fn apportion(n: usize, pi: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = pi.iter().map(|&w| w * n as f64).collect();
    let mut sizes: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut order: Vec<usize> = (0..pi.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let short = n.saturating_sub(sizes.iter().sum());
    for &c in order.iter().cycle().take(short) {
        sizes[c] += 1;
    }
    sizes
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(LabError::invalid(format!("{what} = {p} is not in [0, 1]")));
    }
    Ok(())
}

/// Eigenpairs of `Z C Zᵀ` for block labels `tau` and a symmetric core `C`,
/// keeping the `d` of largest magnitude.
fn block_eigenpairs(tau: &[usize], core: &DenseMatrix, d: usize) -> Result<(OrthonormalBasis, Vec<f64>)> {
    let k = core.rows();
    let mut counts = vec![0usize; k];
    for &t in tau {
        counts[t] += 1;
    }
    let present: Vec<usize> = (0..k).filter(|&b| counts[b] > 0).collect();
    if d > present.len() {
        return Err(LabError::invalid(format!(
            "requested {d} eigenpairs but only {} blocks are nonempty",
            present.len()
        )));
    }
    let root: Vec<f64> = present.iter().map(|&b| (counts[b] as f64).sqrt()).collect();
    let mut reduced = DenseMatrix::from_fn(present.len(), present.len(), |i, j| {
        root[i] * core[(present[i], present[j])] * root[j]
    });
    reduced.symmetrize();
    let sp = sym_eig(&reduced)?;
    let mut slot = vec![usize::MAX; k];
    for (pos, &b) in present.iter().enumerate() {
        slot[b] = pos;
    }
    let v = sp.vectors.matrix();
    let u = DenseMatrix::from_fn(tau.len(), d, |i, j| {
        let pos = slot[tau[i]];
        v[(pos, j)] / root[pos]
    });
    Ok((OrthonormalBasis::from_trusted(u), sp.values[..d].to_vec()))
}

/// Symmetric Bernoulli matrix with `P(A_ij = 1) = prob(i, j)` drawn on the
/// upper triangle including the diagonal, column by column.
fn symmetric_bernoulli(n: usize, stream: RngStream, prob: impl Fn(usize, usize) -> f64) -> DenseMatrix {
    let mut rng = stream.rng();
    let mut a = DenseMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let u: f64 = rng.random();
            if u < prob(i, j) {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    a
}

/// Symmetric Bernoulli(`p`) observation mask.
pub fn bernoulli_mask(n: usize, p: f64, stream: RngStream) -> Result<DenseMatrix> {
    check_probability(p, "sampling probability")?;
    Ok(symmetric_bernoulli(n, stream, |_, _| p))
}

pub fn gen_sbm(n: usize, b: &DenseMatrix, pi: &[f64], rho: f64, d: usize, stream: RngStream) -> Result<SbmInstance> {
    gen_sbm_with(n, b, pi, rho, d, stream, SbmOptions::default())
}

pub fn gen_sbm_with(
    n: usize,
    b: &DenseMatrix,
    pi: &[f64],
    rho: f64,
    d: usize,
    stream: RngStream,
    opts: SbmOptions,
) -> Result<SbmInstance> {
    let k = b.rows();
    if n == 0 || d == 0 {
        return Err(LabError::invalid("n and d must be positive"));
    }
    if !b.is_square() || b.asymmetry() > 0.0 {
        return Err(LabError::invalid("block matrix must be square and symmetric"));
    }
    if pi.len() != k {
        return Err(LabError::invalid(format!("pi has {} entries for {k} blocks", pi.len())));
    }
    if pi.iter().any(|&x| !(x >= 0.0)) || (pi.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(LabError::invalid("pi must be a probability vector"));
    }
    check_probability(rho, "rho")?;
    for &v in b.as_slice() {
        check_probability(v, "block probability")?;
        check_probability(rho * v, "rho * B")?;
    }

    let mut rng = stream.derive_labeled("labels", &[]).rng();
    let tau: Vec<usize> = if opts.equal_sizes {
        let mut tau: Vec<usize> = apportion(n, pi)
            .into_iter()
            .enumerate()
            .flat_map(|(c, size)| std::iter::repeat_n(c, size))
            .collect();
        tau.shuffle(&mut rng);
        tau
    } else {
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (c, &w) in pi.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        return c;
                    }
                }
                pi.iter().rposition(|&w| w > 0.0).unwrap_or(0)
            })
            .collect()
    };

    let p_mat = DenseMatrix::from_fn(n, n, |i, j| rho * b[(tau[i], tau[j])]);
    let mut a = symmetric_bernoulli(n, stream.derive_labeled("edges", &[]), |i, j| p_mat[(i, j)]);
    if opts.hollow {
        for i in 0..n {
            a[(i, i)] = 0.0;
        }
    }
    let (u, lambda) = block_eigenpairs(&tau, &b.scaled(rho), d)?;
    Ok(SbmInstance { a, p_mat, tau, u, lambda, rho, stream })
}

/// Balanced two-block model with `B₀ = [[0.8, 0.3], [0.3, 0.8]]`.
pub fn b0() -> DenseMatrix {
    DenseMatrix::from_rows(&[[0.8, 0.3], [0.3, 0.8]]).expect("static")
}

/// Homogeneous core: diagonal `s`, off-diagonal `-h s` with `h = 1`
/// (`h = ½` when `k = 2`, where `h = 1` would be singular).
fn homogeneous_core(k: usize, s: f64) -> DenseMatrix {
    let h = if k == 2 { 0.5 } else { 1.0 };
    DenseMatrix::from_fn(k, k, |i, j| if i == j { s } else { -h * s })
}

/// Rank-`k` symmetric `T` observed through a symmetric Bernoulli(`p`) mask
/// with symmetric Gaussian noise.
///
/// Homogeneous mode uses balanced random blocks and the core of
/// [`homogeneous_core`], so every `|T_ij|` lies in `[s/2, s]`. Otherwise
/// `T = U diag(λ) Uᵀ` for a Haar-like `U` and `λ_ℓ = s·n·(k − ℓ)/k`.
pub fn gen_completion(
    n: usize,
    k: usize,
    signal_scale: f64,
    p: f64,
    sigma: f64,
    homogeneous: bool,
    stream: RngStream,
) -> Result<CompletionInstance> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(LabError::invalid(format!("sampling probability {p} not in (0, 1]")));
    }
    if !(sigma >= 0.0) || !signal_scale.is_finite() {
        return Err(LabError::invalid("sigma must be nonnegative and the scale finite"));
    }
    if k == 0 || k > n {
        return Err(LabError::invalid(format!("rank {k} invalid for n = {n}")));
    }

    let (u, lambda) = if homogeneous {
        let mut tau: Vec<usize> = (0..n).map(|i| i % k).collect();
        tau.shuffle(&mut stream.derive_labeled("labels", &[]).rng());
        block_eigenpairs(&tau, &homogeneous_core(k, signal_scale), k)?
    } else {
        let g = gaussian_matrix(n, k, stream.derive_labeled("factors", &[]))?;
        let (q, _) = qr_thin(&g)?;
        let lambda = (0..k).map(|l| signal_scale * n as f64 * (k - l) as f64 / k as f64).collect();
        (q, lambda)
    };
    let mut scaled = u.matrix().clone();
    for (j, &l) in lambda.iter().enumerate() {
        scaled.col_mut(j).iter_mut().for_each(|x| *x *= l);
    }
    let mut t = gemm(&scaled, false, u.matrix(), true);
    t.symmetrize();

    let omega = symmetric_bernoulli(n, stream.derive_labeled("mask", &[]), |_, _| p);
    let mut rng = stream.derive_labeled("noise", &[]).rng();
    let mut t_hat = DenseMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let z: f64 = rng.sample(StandardNormal);
            if omega[(i, j)] != 0.0 {
                let v = t[(i, j)] + sigma * z;
                t_hat[(i, j)] = v;
                t_hat[(j, i)] = v;
            }
        }
    }
    Ok(CompletionInstance { t, t_hat, omega, p, sigma, u, lambda, stream })
}

pub fn gen_missing_pca(d: usize, m: usize, k: usize, p: f64, sigma: f64, stream: RngStream) -> Result<MissingPcaInstance> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(LabError::invalid(format!("sampling probability {p} not in (0, 1]")));
    }
    if k == 0 || k > d.min(m) {
        return Err(LabError::invalid(format!("rank {k} invalid for {d} x {m} data")));
    }
    if !(sigma >= 0.0) {
        return Err(LabError::invalid("sigma must be nonnegative"));
    }
    let b = gaussian_matrix(d, k, stream.derive_labeled("loadings", &[]))?;
    let f = gaussian_matrix(k, m, stream.derive_labeled("factors", &[]))?;
    let mut x = gemm(&b, false, &f, false);
    let mut noise = stream.derive_labeled("noise", &[]).rng();
    let mut mask = stream.derive_labeled("mask", &[]).rng();
    for v in x.as_mut_slice() {
        let z: f64 = noise.sample(StandardNormal);
        let keep: f64 = mask.random();
        *v = if keep < p { *v + sigma * z } else { 0.0 };
    }
    // left singular vectors of B are the eigenvectors of BBᵀ
    let (ub, s, _) = svd_thin(&b)?;
    let lambda = s.iter().map(|v| v * v).collect();
    Ok(MissingPcaInstance { x_obs: x, b, f, p, sigma, u: ub, lambda, stream })
}

/// Squared Euclidean distance matrix of `n` points uniform in `[0, box]^dim`.
/// Returns `(D, points)`.
pub fn gen_edm(n: usize, dim: usize, box_size: f64, stream: RngStream) -> Result<(DenseMatrix, DenseMatrix)> {
    if !(2..=3).contains(&dim) {
        return Err(LabError::invalid(format!("dimension {dim} must be 2 or 3")));
    }
    if n == 0 || !(box_size > 0.0) {
        return Err(LabError::invalid("need n >= 1 and a positive box"));
    }
    let mut rng = stream.rng();
    let points = DenseMatrix::from_fn(n, dim, |_, _| box_size * rng.random::<f64>());
    Ok((edm_from_points(&points), points))
}

pub fn edm_from_points(points: &DenseMatrix) -> DenseMatrix {
    let n = points.rows();
    let mut d = DenseMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            let s: f64 = (0..points.cols()).map(|c| (points[(i, c)] - points[(j, c)]).powi(2)).sum();
            d[(i, j)] = s;
            d[(j, i)] = s;
        }
    }
    d
}

/// Symmetric noise matrix with independent mean-zero upper triangle of
/// standard deviation `sigma_n`.
pub fn gen_wigner(n: usize, sigma_n: f64, kind: NoiseKind, stream: RngStream) -> Result<DenseMatrix> {
    if !(sigma_n > 0.0) || n == 0 {
        return Err(LabError::invalid("need n >= 1 and sigma_n > 0"));
    }
    let mut rng = stream.rng();
    let mut e = DenseMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = match kind {
                NoiseKind::Gaussian => sigma_n * rng.sample::<f64, _>(StandardNormal),
                NoiseKind::Bounded => {
                    if rng.random::<bool>() {
                        sigma_n
                    } else {
                        -sigma_n
                    }
                }
            };
            e[(i, j)] = v;
            e[(j, i)] = v;
        }
    }
    Ok(e)
}

/// Random symmetric rank-`k` matrix `U diag(λ) Uᵀ` with `λ_ℓ` of random sign
/// and magnitude in `[1, 2]·scale`.
pub fn gen_low_rank_symmetric(n: usize, k: usize, scale: f64, stream: RngStream) -> Result<(DenseMatrix, OrthonormalBasis, Vec<f64>)> {
    if k == 0 || k > n {
        return Err(LabError::invalid(format!("rank {k} invalid for n = {n}")));
    }
    let (u, _) = qr_thin(&gaussian_matrix(n, k, stream.derive_labeled("basis", &[]))?)?;
    let mut rng = stream.derive_labeled("values", &[]).rng();
    let mut lambda: Vec<f64> = (0..k)
        .map(|_| {
            let mag = scale * (1.0 + rng.random::<f64>());
            if rng.random::<bool>() { mag } else { -mag }
        })
        .collect();
    lambda.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let mut scaled = u.matrix().clone();
    for (j, &l) in lambda.iter().enumerate() {
        scaled.col_mut(j).iter_mut().for_each(|x| *x *= l);
    }
    let mut m = gemm(&scaled, false, u.matrix(), true);
    m.symmetrize();
    Ok((m, u, lambda))
}

#[derive(Serialize)]
struct Sidecar<'a> {
    model: &'a str,
    stream: RngStream,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<&'a [usize]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    lambda: &'a [f64],
}

fn write_sidecar(dir: &Path, sidecar: &Sidecar<'_>) -> Result<()> {
    fs::write(dir.join("instance.json"), serde_json::to_string_pretty(sidecar)?)?;
    Ok(())
}

impl SbmInstance {
    /// Writes `A.mm` and `instance.json` into `dir`.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        write_matrix_market(dir.join("A.mm"), &self.a)?;
        write_sidecar(
            dir,
            &Sidecar {
                model: "sbm",
                stream: self.stream,
                tau: Some(&self.tau),
                rho: Some(self.rho),
                p: None,
                sigma: None,
                lambda: &self.lambda,
            },
        )
    }
}

impl CompletionInstance {
    /// Writes `T_hat.mm`, `T.mm` and `instance.json` into `dir`.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        write_matrix_market(dir.join("T_hat.mm"), &self.t_hat)?;
        write_matrix_market(dir.join("T.mm"), &self.t)?;
        write_sidecar(
            dir,
            &Sidecar {
                model: "completion",
                stream: self.stream,
                tau: None,
                rho: None,
                p: Some(self.p),
                sigma: Some(self.sigma),
                lambda: &self.lambda,
            },
        )
    }
}

impl MissingPcaInstance {
    /// Writes `X_obs.mm` and `instance.json` into `dir`.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        write_matrix_market(dir.join("X_obs.mm"), &self.x_obs)?;
        write_sidecar(
            dir,
            &Sidecar {
                model: "missing_pca",
                stream: self.stream,
                tau: None,
                rho: None,
                p: Some(self.p),
                sigma: Some(self.sigma),
                lambda: &self.lambda,
            },
        )
    }
}
