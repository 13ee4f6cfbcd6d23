//! Dense symmetric eigensolver.
//!
//! Householder reduction to tridiagonal form followed by the implicit QL
//! iteration with Wilkinson-style shifts. The plane rotations of the QL phase
//! are logged instead of being accumulated into a full `n × n` matrix, so a
//! handful of eigenvectors of a large matrix can be recovered in `O(n²)`
//! extra work per vector.

use crate::decomp::apply_sign_convention;
use crate::error::{LabError, Result};
use crate::matrix::{dot, DenseMatrix, OrthonormalBasis, SpectrumPair};

/// Largest matrix accepted by the dense eigensolver.
pub const MAX_EIG_DIM: usize = 4096;

struct Tridiagonal {
    diag: Vec<f64>,
    // off[i] = T[i+1, i]; off[n-1] = 0
    off: Vec<f64>,
    reflectors: Vec<(Vec<f64>, f64)>,
}

fn tridiagonalize(s: &DenseMatrix) -> Tridiagonal {
    let n = s.rows();
    let mut a = s.clone();
    let mut off = vec![0.0; n];
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let x = &a.col(k)[k + 1..];
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            off[k] = 0.0;
            reflectors.push((Vec::new(), 0.0));
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let beta = 2.0 / dot(&v, &v);
        off[k] = alpha;

        // p = beta * S v on the trailing block
        let p = &mut p[..len];
        p.iter_mut().for_each(|x| *x = 0.0);
        for (jj, &vj) in v.iter().enumerate() {
            let col = &a.col(k + 1 + jj)[k + 1..];
            let bv = beta * vj;
            p.iter_mut().zip(col).for_each(|(pi, &c)| *pi += c * bv);
        }
        let kappa = 0.5 * beta * dot(p, &v);
        // w = p - kappa v, stored in p
        p.iter_mut().zip(&v).for_each(|(pi, &vi)| *pi -= kappa * vi);
        for jj in 0..len {
            let (vj, wj) = (v[jj], p[jj]);
            let col = &mut a.col_mut(k + 1 + jj)[k + 1..];
            for ((c, &vi), &wi) in col.iter_mut().zip(&v).zip(p.iter()) {
                *c -= vi * wj + wi * vj;
            }
        }
        reflectors.push((v, beta));
    }
    if n >= 2 {
        off[n - 2] = a[(n - 1, n - 2)];
    }
    let diag = (0..n).map(|i| a[(i, i)]).collect();
    Tridiagonal { diag, off, reflectors }
}

struct Rotation {
    index: u32,
    c: f64,
    s: f64,
}

/// Implicit QL on a symmetric tridiagonal matrix. Returns the eigenvalues in
/// the internal (unsorted) order and the log of rotations to apply.
fn tridiagonal_ql(mut d: Vec<f64>, mut e: Vec<f64>) -> Result<(Vec<f64>, Vec<Rotation>)> {
    let n = d.len();
    let mut rotations = Vec::new();
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 100 {
                    return Err(LabError::Unsupported(
                        "tridiagonal QL iteration did not converge".into(),
                    ));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    rotations.push(Rotation { index: i as u32, c, s });
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok((d, rotations))
}

fn check_symmetric(s: &DenseMatrix) -> Result<()> {
    if !s.is_square() {
        return Err(LabError::invalid(format!("sym_eig needs a square matrix, got {:?}", s.shape())));
    }
    if s.rows() == 0 {
        return Err(LabError::invalid("sym_eig of an empty matrix"));
    }
    if s.rows() > MAX_EIG_DIM {
        return Err(LabError::Unsupported(format!(
            "dense eigensolver limited to {MAX_EIG_DIM} rows, got {}",
            s.rows()
        )));
    }
    let tol = 1e-10 * s.max_abs().max(1.0);
    let asym = s.asymmetry();
    if asym > tol {
        return Err(LabError::invalid(format!("matrix is not symmetric (max |S - Sᵀ| = {asym:e})")));
    }
    Ok(())
}

/// Orders eigenvalue indices by descending magnitude, positive first on ties.
/// Magnitudes within `1e-12` of the spectral radius count as tied.
fn magnitude_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    let tol = 1e-12 * values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut start = 0;
    while start < order.len() {
        let lead = values[order[start]].abs();
        let mut end = start + 1;
        while end < order.len() && lead - values[order[end]].abs() <= tol {
            end += 1;
        }
        order[start..end].sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        start = end;
    }
    order
}

fn eigenpairs(s: &DenseMatrix, k: usize) -> Result<SpectrumPair> {
    check_symmetric(s)?;
    let n = s.rows();
    let tri = tridiagonalize(s);
    let (values, rotations) = tridiagonal_ql(tri.diag, tri.off)?;
    let order = magnitude_order(&values);

    let mut vectors = DenseMatrix::zeros(n, k);
    let mut z = vec![0.0; n];
    for (dst, &src) in order.iter().take(k).enumerate() {
        z.iter_mut().for_each(|x| *x = 0.0);
        z[src] = 1.0;
        for rot in rotations.iter().rev() {
            let i = rot.index as usize;
            let (xi, xn) = (z[i], z[i + 1]);
            z[i] = rot.c * xi + rot.s * xn;
            z[i + 1] = -rot.s * xi + rot.c * xn;
        }
        for (kk, (v, beta)) in tri.reflectors.iter().enumerate().rev() {
            if *beta == 0.0 {
                continue;
            }
            let tail = &mut z[kk + 1..];
            let t = beta * dot(v, tail);
            tail.iter_mut().zip(v).for_each(|(x, vi)| *x -= t * vi);
        }
        vectors.col_mut(dst).copy_from_slice(&z);
    }
    apply_sign_convention(&mut vectors, None);
    let values = order.iter().take(k).map(|&i| values[i]).collect();
    SpectrumPair::new(values, OrthonormalBasis::from_trusted(vectors))
}

/// Full eigendecomposition `S = V Λ Vᵀ`, eigenvalues by descending magnitude.
pub fn sym_eig(s: &DenseMatrix) -> Result<SpectrumPair> {
    eigenpairs(s, s.rows())
}

/// The `k` eigenpairs of largest magnitude.
pub fn sym_eig_top(s: &DenseMatrix, k: usize) -> Result<SpectrumPair> {
    if k == 0 || k > s.rows() {
        return Err(LabError::invalid(format!(
            "requested {k} eigenpairs of a {}x{} matrix",
            s.rows(),
            s.cols()
        )));
    }
    eigenpairs(s, k)
}
