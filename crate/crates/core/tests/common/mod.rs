//! Instance builders shared by the property suites.
#![allow(dead_code)]

use rsvdlab::{gaussian_matrix, qr_thin, DenseMatrix, OrthonormalBasis, RngStream};

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    gaussian_matrix(rows, cols, RngStream::new(seed, 0)).unwrap()
}

pub fn orthonormal(rows: usize, cols: usize, seed: u64) -> OrthonormalBasis {
    qr_thin(&gaussian(rows, cols, seed)).unwrap().0
}

pub fn symmetric(n: usize, seed: u64) -> DenseMatrix {
    let mut a = gaussian(n, n, seed);
    a.symmetrize();
    a
}

/// `U diag(values) Uᵀ`.
pub fn with_spectrum(u: &OrthonormalBasis, values: &[f64]) -> DenseMatrix {
    let mut scaled = u.matrix().clone();
    for (j, &v) in values.iter().enumerate() {
        scaled.col_mut(j).iter_mut().for_each(|x| *x *= v);
    }
    let mut m = scaled.matmul_t(u.matrix()).unwrap();
    m.symmetrize();
    m
}

pub fn rel_err(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.sub(b).unwrap().frobenius() / b.frobenius().max(f64::MIN_POSITIVE)
}
