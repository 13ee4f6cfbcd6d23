//! Repeated-sampling randomized SVD.
//!
//! One combined Gaussian test matrix with `a_n · k̃` columns is drawn and split
//! into `a_n` blocks. Every block is pushed through `g` power iterations with
//! a QR factorization after each multiply, and the block whose sketch has the
//! largest `k`-th singular value wins. The singular values of a sketch are read
//! off the accumulated product of the triangular factors, which stays well
//! scaled for any `g`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomp::{apply_sign_convention, householder_qr, svd_thin};
use crate::error::{LabError, Result};
use crate::matrix::{gemm, DenseMatrix, OrthonormalBasis};
use crate::rng::{gaussian_matrix, RngStream};

/// Relative threshold for the strict rank check of [`power_sketch`].
pub const POWER_RANK_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SketchConfig {
    /// Target rank.
    pub k: usize,
    /// Columns per sketch.
    pub k_tilde: usize,
    /// Number of independent sketches.
    pub a_n: usize,
    /// Power iterations.
    pub g: usize,
    pub stream: RngStream,
}

impl SketchConfig {
    pub fn new(k: usize, k_tilde: usize, a_n: usize, g: usize, stream: RngStream) -> Self {
        Self { k, k_tilde, a_n, g, stream }
    }

    /// `⌈ln n⌉`, at least 1.
    pub fn log_repeats(n: usize) -> usize {
        ((n as f64).ln().ceil() as usize).max(1)
    }

    pub fn with_g(self, g: usize) -> Self {
        Self { g, ..self }
    }

    /// Checks the configuration against a matrix whose sketch has `n` rows
    /// (the column count of the data matrix).
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(LabError::invalid("k must be at least 1"));
        }
        if self.k_tilde < self.k {
            return Err(LabError::invalid(format!("k_tilde = {} < k = {}", self.k_tilde, self.k)));
        }
        if self.a_n == 0 {
            return Err(LabError::invalid("a_n must be at least 1"));
        }
        if self.k_tilde > n {
            return Err(LabError::invalid(format!("k_tilde = {} exceeds n = {n}", self.k_tilde)));
        }
        if self.a_n * self.k_tilde > n {
            return Err(LabError::invalid(format!(
                "combined sketch of {} x {} columns does not fit n = {n}",
                self.a_n, self.k_tilde
            )));
        }
        Ok(())
    }
}

/// How [`rs_rsvd_sym`] forms the low-rank approximation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowRankMode {
    None,
    /// `ÛÛᵀM̂`
    OneSided,
    /// `½(ÛÛᵀM̂ + M̂ÛÛᵀ)`
    Symmetrized,
}

#[derive(Clone, Debug)]
pub struct RsvdOutput {
    pub u_hat_g: OrthonormalBasis,
    /// Singular values of `Û_gᵀM̂`, descending.
    pub sigma_tilde: Vec<f64>,
    /// `σ_k` of the winning sketch.
    pub sigma_k_sketch: f64,
    pub chosen_sketch: usize,
    /// `σ_k` of every sketch, in block order. Saturates to infinity for
    /// large `g`; selection uses `log_sigma_k_all`.
    pub sigma_k_all: Vec<f64>,
    pub log_sigma_k_all: Vec<f64>,
    pub g: usize,
    pub low_rank: Option<DenseMatrix>,
}

/// The `n × (a_n k̃)` Gaussian test matrix drawn from `cfg.stream`.
pub fn combined_sketch(n: usize, cfg: &SketchConfig) -> Result<DenseMatrix> {
    gaussian_matrix(n, cfg.a_n * cfg.k_tilde, cfg.stream)
}

fn check_symmetric(m: &DenseMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(LabError::invalid(format!("expected a square matrix, got {:?}", m.shape())));
    }
    let asym = m.asymmetry();
    if asym > 1e-10 * m.max_abs().max(1.0) {
        return Err(LabError::invalid(format!("matrix is not symmetric (max |M - Mᵀ| = {asym:e})")));
    }
    Ok(())
}

/// Block power iteration `M̂^g G` with re-orthonormalization after every
/// multiply. Returns `(Q, Rprod)` with `Q·Rprod = M̂^g G`. `Rprod` is
/// unscaled, so it overflows once `‖M̂‖^g` leaves the `f64` range.
///
/// Fails when some triangular factor loses rank, reporting the iteration
/// (0 is the factorization of `G` itself).
pub fn power_sketch(m_hat: &DenseMatrix, g_mat: &DenseMatrix, g: usize) -> Result<(OrthonormalBasis, DenseMatrix)> {
    check_symmetric(m_hat)?;
    if g_mat.rows() != m_hat.rows() {
        return Err(LabError::shape(format!(
            "sketch has {} rows, matrix is {}x{}",
            g_mat.rows(),
            m_hat.rows(),
            m_hat.cols()
        )));
    }
    if g_mat.cols() > g_mat.rows() {
        return Err(LabError::invalid("sketch wider than the matrix dimension"));
    }
    let strict_qr = |y: &DenseMatrix, iteration: usize| -> Result<(DenseMatrix, DenseMatrix)> {
        let (q, r) = householder_qr(y);
        let threshold = POWER_RANK_TOL * y.frobenius();
        match (0..r.cols()).find(|&j| !(r[(j, j)] > threshold)) {
            Some(column) => Err(LabError::RankDeficient { column, iteration: Some(iteration) }),
            None => Ok((q, r)),
        }
    };
    let (mut q, mut rprod) = strict_qr(g_mat, 0)?;
    for it in 1..=g {
        let y = gemm(m_hat, false, &q, false);
        let (qn, r) = strict_qr(&y, it)?;
        rprod = gemm(&r, false, &rprod, false);
        q = qn;
    }
    Ok((OrthonormalBasis::from_trusted(q), rprod))
}

/// Per-block state of the combined power iteration.
/// `rprod` is kept at unit max-entry; the true product is
/// `exp(log_scale)·rprod`.
struct Block {
    q: DenseMatrix,
    rprod: DenseMatrix,
    log_scale: f64,
}

impl Block {
    fn new(q: DenseMatrix, r: DenseMatrix) -> Self {
        let mut b = Block { q, rprod: r, log_scale: 0.0 };
        b.rescale();
        b
    }

    fn rescale(&mut self) {
        let m = self.rprod.max_abs();
        if m > 0.0 && m.is_finite() {
            self.rprod.scale_in_place(1.0 / m);
            self.log_scale += m.ln();
        }
    }
}

fn split_blocks(sketch: &DenseMatrix, k_tilde: usize) -> Vec<Block> {
    (0..sketch.cols() / k_tilde)
        .into_par_iter()
        .map(|a| {
            let (q, r) = householder_qr(&sketch.columns(a * k_tilde, (a + 1) * k_tilde));
            Block::new(q, r)
        })
        .collect()
}

fn concat(blocks: &[Block]) -> DenseMatrix {
    let rows = blocks[0].q.rows();
    let mut data = Vec::with_capacity(rows * blocks.len() * blocks[0].q.cols());
    for b in blocks {
        data.extend_from_slice(b.q.as_slice());
    }
    let cols = data.len() / rows;
    DenseMatrix::from_raw(rows, cols, data)
}

/// One multiply of every block by `op`, followed by a per-block QR. A
/// single product with the concatenated blocks keeps this to one pass.
fn advance(blocks: &mut [Block], op: &DenseMatrix, transpose: bool) {
    let k_tilde = blocks[0].q.cols();
    let y = gemm(op, transpose, &concat(blocks), false);
    blocks.par_iter_mut().enumerate().for_each(|(a, b)| {
        let (q, r) = householder_qr(&y.columns(a * k_tilde, (a + 1) * k_tilde));
        b.rprod = gemm(&r, false, &b.rprod, false);
        b.q = q;
        b.rescale();
    });
}

/// Selects the winning block and assembles `Û_g` and `σ̃`.
fn finish(
    m_hat: &DenseMatrix,
    blocks: &[Block],
    k: usize,
    g: usize,
    symmetric: bool,
    mode: LowRankMode,
) -> Result<RsvdOutput> {
    let svds: Vec<_> = blocks
        .par_iter()
        .map(|b| svd_thin(&b.rprod))
        .collect::<Result<_>>()?;
    let log_sigma_k_all: Vec<f64> = svds
        .iter()
        .zip(blocks)
        .map(|((_, s, _), b)| s[k - 1].ln() + b.log_scale)
        .collect();
    let sigma_k_all: Vec<f64> = log_sigma_k_all.iter().map(|l| l.exp()).collect();
    let mut chosen = 0;
    for (a, &s) in log_sigma_k_all.iter().enumerate() {
        if s > log_sigma_k_all[chosen] {
            chosen = a;
        }
    }
    let (p, s, _) = &svds[chosen];
    let sigma_k_sketch = sigma_k_all[chosen];
    if !(s[k - 1] > POWER_RANK_TOL * s[0]) || s[k - 1] == 0.0 {
        return Err(LabError::RankDeficient { column: k - 1, iteration: Some(g) });
    }

    let mut u = gemm(&blocks[chosen].q, false, &p.matrix().columns(0, k), false);
    apply_sign_convention(&mut u, None);
    // Ûᵀ M̂, k × n
    let ut_m = gemm(&u, true, m_hat, false);
    let (_, sigma_tilde, _) = svd_thin(&ut_m)?;

    let low_rank = match mode {
        LowRankMode::None => None,
        LowRankMode::OneSided => Some(gemm(&u, false, &ut_m, false)),
        LowRankMode::Symmetrized => {
            if !symmetric {
                return Err(LabError::invalid("symmetrized low rank needs a symmetric matrix"));
            }
            let mut l = gemm(&u, false, &ut_m, false);
            l.symmetrize();
            Some(l)
        }
    };
    Ok(RsvdOutput {
        u_hat_g: OrthonormalBasis::from_trusted(u),
        sigma_tilde,
        sigma_k_sketch,
        chosen_sketch: chosen,
        sigma_k_all,
        log_sigma_k_all,
        g,
        low_rank,
    })
}

/// Symmetric rs-RSVD with the test matrix drawn from `cfg.stream`.
pub fn rs_rsvd_sym(m_hat: &DenseMatrix, cfg: &SketchConfig, mode: LowRankMode) -> Result<RsvdOutput> {
    check_symmetric(m_hat)?;
    cfg.validate(m_hat.rows())?;
    let sketch = combined_sketch(m_hat.rows(), cfg)?;
    rs_rsvd_sym_from_sketch(m_hat, cfg, &sketch, mode)
}

/// Symmetric rs-RSVD on a caller-supplied combined test matrix
/// (`n × a_n k̃`); `cfg.stream` is ignored.
pub fn rs_rsvd_sym_from_sketch(
    m_hat: &DenseMatrix,
    cfg: &SketchConfig,
    sketch: &DenseMatrix,
    mode: LowRankMode,
) -> Result<RsvdOutput> {
    let mut path = sym_path(m_hat, cfg, sketch, mode, false)?;
    Ok(path.pop().expect("g >= 1"))
}

/// Outputs for every `g` in `1..=cfg.g`, sharing one test matrix. Entry
/// `g - 1` equals what [`rs_rsvd_sym`] returns with `cfg.with_g(g)`.
pub fn rs_rsvd_sym_path(m_hat: &DenseMatrix, cfg: &SketchConfig, mode: LowRankMode) -> Result<Vec<RsvdOutput>> {
    check_symmetric(m_hat)?;
    cfg.validate(m_hat.rows())?;
    let sketch = combined_sketch(m_hat.rows(), cfg)?;
    sym_path(m_hat, cfg, &sketch, mode, true)
}

fn sym_path(
    m_hat: &DenseMatrix,
    cfg: &SketchConfig,
    sketch: &DenseMatrix,
    mode: LowRankMode,
    keep_all: bool,
) -> Result<Vec<RsvdOutput>> {
    check_symmetric(m_hat)?;
    cfg.validate(m_hat.rows())?;
    if cfg.g == 0 {
        return Err(LabError::invalid("symmetric rs-RSVD needs g >= 1"));
    }
    if sketch.shape() != (m_hat.rows(), cfg.a_n * cfg.k_tilde) {
        return Err(LabError::shape(format!(
            "combined sketch is {:?}, expected {:?}",
            sketch.shape(),
            (m_hat.rows(), cfg.a_n * cfg.k_tilde)
        )));
    }
    let mut blocks = split_blocks(sketch, cfg.k_tilde);
    let mut out = Vec::new();
    for g in 1..=cfg.g {
        advance(&mut blocks, m_hat, false);
        if keep_all || g == cfg.g {
            out.push(finish(m_hat, &blocks, cfg.k, g, true, mode)?);
        }
    }
    Ok(out)
}

/// Asymmetric rs-RSVD: sketches `(M̂M̂ᵀ)^g M̂ G` for an `n₁ × n₂` matrix and
/// returns approximate leading left singular vectors. `g = 0` is accepted
/// and gives the plain randomized range finder.
pub fn rs_rsvd_asym(m_hat: &DenseMatrix, cfg: &SketchConfig) -> Result<RsvdOutput> {
    let (n1, n2) = m_hat.shape();
    cfg.validate(n2)?;
    if cfg.k_tilde > n1 {
        return Err(LabError::invalid(format!("k_tilde = {} exceeds n1 = {n1}", cfg.k_tilde)));
    }
    let sketch = combined_sketch(n2, cfg)?;
    let mut blocks = split_blocks(&sketch, cfg.k_tilde);
    advance(&mut blocks, m_hat, false);
    for _ in 0..cfg.g {
        advance(&mut blocks, m_hat, true);
        advance(&mut blocks, m_hat, false);
    }
    finish(m_hat, &blocks, cfg.k, cfg.g, false, LowRankMode::None)
}
