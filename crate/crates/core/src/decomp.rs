//! Thin QR (Householder) and thin SVD (QR followed by one-sided Jacobi).

use crate::error::{LabError, Result};
use crate::matrix::{dot, DenseMatrix, OrthonormalBasis};

/// Relative threshold on `|R_jj| / ‖A‖_F` below which [`qr_thin`] reports rank deficiency.
pub const QR_RANK_TOL: f64 = 1e-12;

/// Householder QR of a tall matrix without any rank check.
///
/// Returns `(Q, R)` with `Q` m×n orthonormal and `R` n×n upper triangular
/// with a nonnegative diagonal. Zero columns are tolerated; the matching
/// column of `Q` is still a unit vector orthogonal to the others.
pub(crate) fn householder_qr(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (m, n) = a.shape();
    assert!(m >= n, "householder_qr needs rows >= cols");
    let mut work = a.clone();
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut betas = Vec::with_capacity(n);
    let mut r = DenseMatrix::zeros(n, n);

    for j in 0..n {
        let x = &work.col(j)[j..];
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (v, beta, alpha) = if norm == 0.0 {
            (vec![0.0; m - j], 0.0, 0.0)
        } else {
            let alpha = if x[0] >= 0.0 { -norm } else { norm };
            let mut v = x.to_vec();
            v[0] -= alpha;
            let vtv = dot(&v, &v);
            let beta = if vtv > 0.0 { 2.0 / vtv } else { 0.0 };
            (v, beta, alpha)
        };
        r[(j, j)] = alpha;
        for i in 0..j {
            r[(i, j)] = work[(i, j)];
        }
        if beta != 0.0 {
            for c in (j + 1)..n {
                let col = &mut work.col_mut(c)[j..];
                let s = beta * dot(&v, col);
                col.iter_mut().zip(&v).for_each(|(x, vi)| *x -= s * vi);
            }
        }
        vs.push(v);
        betas.push(beta);
    }

    // Q = H_0 ... H_{n-1} [I; 0]
    let mut q = DenseMatrix::zeros(m, n);
    for j in 0..n {
        q[(j, j)] = 1.0;
    }
    for j in (0..n).rev() {
        let beta = betas[j];
        if beta == 0.0 {
            continue;
        }
        let v = &vs[j];
        for c in j..n {
            let col = &mut q.col_mut(c)[j..];
            let s = beta * dot(v, col);
            col.iter_mut().zip(v).for_each(|(x, vi)| *x -= s * vi);
        }
    }

    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for c in j..n {
                r[(j, c)] = -r[(j, c)];
            }
            q.col_mut(j).iter_mut().for_each(|x| *x = -*x);
        }
    }
    (q, r)
}

/// Thin QR factorization `A = QR` of a full-column-rank tall matrix.
///
/// Fails with [`LabError::RankDeficient`] when some `R_jj` falls below
/// `1e-12 · ‖A‖_F`.
pub fn qr_thin(a: &DenseMatrix) -> Result<(OrthonormalBasis, DenseMatrix)> {
    if a.rows() < a.cols() {
        return Err(LabError::invalid(format!(
            "qr_thin needs rows >= cols, got {:?}",
            a.shape()
        )));
    }
    let (q, r) = householder_qr(a);
    let threshold = QR_RANK_TOL * a.frobenius();
    if let Some(column) = (0..r.cols()).find(|&j| !(r[(j, j)] > threshold)) {
        return Err(LabError::RankDeficient { column, iteration: None });
    }
    Ok((OrthonormalBasis::from_trusted(q), r))
}

/// Index of the first entry that is not negligible, used for sign conventions.
fn leading_entry(col: &[f64]) -> Option<usize> {
    let scale = col.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    col.iter().position(|v| v.abs() > 1e-12 * scale.max(1e-300))
}

/// Flips columns so that the first non-negligible entry of each is nonnegative.
/// The same flips are mirrored on `paired` when given.
pub(crate) fn apply_sign_convention(m: &mut DenseMatrix, mut paired: Option<&mut DenseMatrix>) {
    for j in 0..m.cols() {
        let flip = leading_entry(m.col(j)).is_some_and(|i| m[(i, j)] < 0.0);
        if flip {
            m.col_mut(j).iter_mut().for_each(|x| *x = -*x);
            if let Some(p) = paired.as_deref_mut() {
                p.col_mut(j).iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
}

/// Modified Gram–Schmidt pass that replaces any (near-)null column by a
/// canonical vector orthogonal to the preceding ones.
fn complete_orthonormal(m: &mut DenseMatrix, valid: &[bool]) {
    let (rows, cols) = m.shape();
    let mut next_candidate = 0;
    for j in 0..cols {
        if valid[j] {
            continue;
        }
        loop {
            assert!(next_candidate < rows, "cannot complete an orthonormal basis");
            let mut v = vec![0.0; rows];
            v[next_candidate] = 1.0;
            next_candidate += 1;
            for _ in 0..2 {
                for c in 0..cols {
                    if c == j || (!valid[c] && c > j) {
                        continue;
                    }
                    let s = dot(m.col(c), &v);
                    v.iter_mut().zip(m.col(c)).for_each(|(x, q)| *x -= s * q);
                }
            }
            let norm = dot(&v, &v).sqrt();
            if norm > 0.5 {
                m.col_mut(j).iter_mut().zip(&v).for_each(|(x, y)| *x = y / norm);
                break;
            }
        }
    }
}

/// One-sided Jacobi on a square matrix: returns `(W, V)` with `W = AV`
/// having mutually orthogonal columns.
fn one_sided_jacobi(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let n = a.cols();
    let mut w = a.clone();
    let mut v = DenseMatrix::identity(n);
    const MAX_SWEEPS: usize = 80;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(w.col(p), w.col(p));
                let beta = dot(w.col(q), w.col(q));
                let gamma = dot(w.col(p), w.col(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    (w, v)
}

#[inline]
fn rotate_columns(m: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let rows = m.rows();
    let data = m.as_mut_slice();
    let (left, right) = data.split_at_mut(q * rows);
    let cp = &mut left[p * rows..(p + 1) * rows];
    let cq = &mut right[..rows];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Thin singular value decomposition `Y = U diag(S) Vᵀ`.
///
/// `U` is `rows × r`, `V` is `cols × r` with `r = min(rows, cols)`.
/// Singular values are nonnegative and sorted descending; tiny ones are kept.
/// The first non-negligible entry of every left singular vector is nonnegative.
pub fn svd_thin(y: &DenseMatrix) -> Result<(OrthonormalBasis, Vec<f64>, OrthonormalBasis)> {
    if y.rows() == 0 || y.cols() == 0 {
        return Err(LabError::invalid("svd of an empty matrix"));
    }
    let (mut u, s, mut v) = if y.rows() >= y.cols() {
        svd_tall(y)
    } else {
        let (u2, s, v2) = svd_tall(&y.transpose());
        (v2, s, u2)
    };
    apply_sign_convention(&mut u, Some(&mut v));
    Ok((OrthonormalBasis::from_trusted(u), s, OrthonormalBasis::from_trusted(v)))
}

fn svd_tall(y: &DenseMatrix) -> (DenseMatrix, Vec<f64>, DenseMatrix) {
    let n = y.cols();
    let (q, r) = householder_qr(y);
    let (w, v) = one_sided_jacobi(&r);

    let norms: Vec<f64> = (0..n).map(|j| dot(w.col(j), w.col(j)).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));

    let smax = norms[order[0]];
    let mut ur = DenseMatrix::zeros(n, n);
    let mut vs = DenseMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    let mut valid = vec![true; n];
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        values.push(sigma);
        vs.col_mut(dst).copy_from_slice(v.col(src));
        if sigma > 0.0 && sigma > smax * 1e-150 {
            ur.col_mut(dst)
                .iter_mut()
                .zip(w.col(src))
                .for_each(|(x, wv)| *x = wv / sigma);
        } else {
            valid[dst] = false;
        }
    }
    if valid.iter().any(|v| !v) {
        complete_orthonormal(&mut ur, &valid);
    }
    let u = q.matmul(&ur).expect("shapes agree");
    (u, values, vs)
}
