//! Dense column-major matrices and the orthonormal/spectral wrappers built on them.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{LabError, Result};

/// Column-major dense real matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{}", self.rows, self.cols)?;
        let shown_rows = self.rows.min(8);
        let shown_cols = self.cols.min(8);
        for i in 0..shown_rows {
            let row: Vec<String> = (0..shown_cols)
                .map(|j| format!("{:>11.4e}", self[(i, j)]))
                .collect();
            writeln!(f, "  [{}{}]", row.join(" "), if shown_cols < self.cols { " ..." } else { "" })?;
        }
        if shown_rows < self.rows {
            writeln!(f, "  ...")?;
        }
        Ok(())
    }
}

impl DenseMatrix {
    /// Builds a matrix from column-major data, rejecting empty shapes and non-finite entries.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(LabError::invalid(format!("empty matrix shape {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(LabError::shape(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(LabError::invalid(format!(
                "non-finite entry at ({}, {})",
                pos % rows,
                pos / rows
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices. All rows must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != ncols) {
            return Err(LabError::shape("ragged rows"));
        }
        let mut data = vec![0.0; nrows * ncols];
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.as_ref().iter().enumerate() {
                data[j * nrows + i] = v;
            }
        }
        Self::from_col_major(nrows, ncols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Unchecked constructor for kernels that produce finite data by construction.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Column-major backing storage.
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for (i, &v) in self.col(j).iter().enumerate() {
                t.data[i * self.cols + j] = v;
            }
        }
        t
    }

    /// Columns `start..end` as a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.cols, "column range out of bounds");
        Self::from_raw(
            self.rows,
            end - start,
            self.data[start * self.rows..end * self.rows].to_vec(),
        )
    }

    /// Rows `start..end` as a new matrix.
    pub fn row_block(&self, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.rows, "row range out of bounds");
        let mut out = Self::zeros(end - start, self.cols);
        for j in 0..self.cols {
            out.col_mut(j).copy_from_slice(&self.col(j)[start..end]);
        }
        out
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|v| v * s).collect())
    }

    pub fn scale_in_place(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Entrywise (Hadamard) product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(LabError::shape(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Self::from_raw(
            self.rows,
            self.cols,
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `max |A - Aᵀ|` for a square matrix.
    pub fn asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0_f64;
        for j in 0..self.cols {
            for i in (j + 1)..self.rows {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Replaces `A` with `(A + Aᵀ)/2`.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        let n = self.rows;
        for j in 0..n {
            for i in (j + 1)..n {
                let avg = 0.5 * (self.data[j * n + i] + self.data[i * n + j]);
                self.data[j * n + i] = avg;
                self.data[i * n + j] = avg;
            }
        }
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(LabError::shape(format!(
                "matmul {:?} x {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(gemm(self, false, other, false))
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(LabError::shape(format!(
                "t_matmul {:?}ᵀ x {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(gemm(self, true, other, false))
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(LabError::shape(format!(
                "matmul_t {:?} x {:?}ᵀ",
                self.shape(),
                other.shape()
            )));
        }
        Ok(gemm(self, false, other, true))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (yi, &a) in y.iter_mut().zip(self.col(j)) {
                    *yi += a * xj;
                }
            }
        }
        y
    }

    /// `Aᵀx`.
    pub fn t_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        (0..self.cols).map(|j| dot(self.col(j), x)).collect()
    }

    /// Euclidean norm of every row.
    pub fn row_norms(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.rows];
        for j in 0..self.cols {
            for (a, &v) in acc.iter_mut().zip(self.col(j)) {
                *a += v * v;
            }
        }
        acc.into_iter().map(f64::sqrt).collect()
    }

    /// `max |AᵀA - I|`, the orthonormality defect of the columns.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = gemm(self, true, self, false);
        let mut worst = 0.0_f64;
        for j in 0..gram.cols {
            for i in 0..gram.rows {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `op(a) · op(b)` through the blocked kernel of `matrixmultiply`.
pub(crate) fn gemm(a: &DenseMatrix, ta: bool, b: &DenseMatrix, tb: bool) -> DenseMatrix {
    let (m, k) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (kb, n) = if tb { (b.cols, b.rows) } else { (b.rows, b.cols) };
    assert_eq!(k, kb, "inner dimensions differ");
    let mut c = DenseMatrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // column-major: element (i, j) lives at i + j*rows
    let (rsa, csa) = if ta { (a.rows as isize, 1) } else { (1, a.rows as isize) };
    let (rsb, csb) = if tb { (b.rows as isize, 1) } else { (1, b.rows as isize) };
    // SAFETY: the strides describe exactly the allocated buffers of `a`, `b`
    // and `c`, whose extents were checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            0.0,
            c.data.as_mut_ptr(),
            1,
            m as isize,
        );
    }
    c
}

/// A matrix with orthonormal columns: `‖QᵀQ − I‖_max ≤ 1e-10`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthonormalBasis(DenseMatrix);

impl OrthonormalBasis {
    pub const TOLERANCE: f64 = 1e-10;

    pub fn new(matrix: DenseMatrix) -> Result<Self> {
        if matrix.rows() < matrix.cols() {
            return Err(LabError::invalid(format!(
                "orthonormal basis needs rows >= cols, got {:?}",
                matrix.shape()
            )));
        }
        let defect = matrix.orthonormality_defect();
        if !(defect <= Self::TOLERANCE) {
            return Err(LabError::invalid(format!(
                "columns are not orthonormal (defect {defect:e})"
            )));
        }
        Ok(Self(matrix))
    }

    /// For kernels whose output is orthonormal by construction (Householder products).
    pub(crate) fn from_trusted(matrix: DenseMatrix) -> Self {
        debug_assert!(matrix.orthonormality_defect() <= 1e-8);
        Self(matrix)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }

    /// The first `k` columns.
    pub fn leading(&self, k: usize) -> Self {
        Self(self.0.columns(0, k))
    }

    /// Orthogonal projector `QQᵀ`.
    pub fn projector(&self) -> DenseMatrix {
        gemm(&self.0, false, &self.0, true)
    }
}

impl AsRef<DenseMatrix> for OrthonormalBasis {
    fn as_ref(&self) -> &DenseMatrix {
        &self.0
    }
}

/// Eigen- or singular pairs, values ordered by non-increasing magnitude.
#[derive(Clone, Debug)]
pub struct SpectrumPair {
    pub values: Vec<f64>,
    pub vectors: OrthonormalBasis,
}

impl SpectrumPair {
    pub fn new(values: Vec<f64>, vectors: OrthonormalBasis) -> Result<Self> {
        if values.len() != vectors.cols() {
            return Err(LabError::shape(format!(
                "{} values for {} vectors",
                values.len(),
                vectors.cols()
            )));
        }
        let tol = 1e-12 * values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if values.windows(2).any(|w| w[0].abs() + tol < w[1].abs()) {
            return Err(LabError::invalid("values not ordered by magnitude"));
        }
        Ok(Self { values, vectors })
    }

    /// `V diag(values) Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let v = self.vectors.matrix();
        let mut scaled = v.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            scaled.col_mut(j).iter_mut().for_each(|x| *x *= lam);
        }
        gemm(&scaled, false, v, true)
    }

    pub fn truncate(&self, k: usize) -> Self {
        Self {
            values: self.values[..k].to_vec(),
            vectors: self.vectors.leading(k),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_reject_bad_input() {
        assert!(DenseMatrix::from_col_major(0, 2, vec![]).is_err());
        assert!(DenseMatrix::from_col_major(1, 2, vec![1.0]).is_err());
        assert!(DenseMatrix::from_col_major(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn products_agree_with_naive_loops() {
        let a = DenseMatrix::from_fn(5, 3, |i, j| (i as f64) - 2.0 * j as f64 + 0.5);
        let b = DenseMatrix::from_fn(3, 4, |i, j| (i * j) as f64 - 1.0);
        let c = a.matmul(&b).unwrap();
        for i in 0..5 {
            for j in 0..4 {
                let naive: f64 = (0..3).map(|l| a[(i, l)] * b[(l, j)]).sum();
                assert!((c[(i, j)] - naive).abs() < 1e-12);
            }
        }
        let at = a.transpose();
        assert_eq!(at.t_matmul(&b).unwrap(), c);
        let bt = b.transpose();
        assert_eq!(a.matmul_t(&bt).unwrap(), c);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn orthonormal_basis_is_checked() {
        assert!(OrthonormalBasis::new(DenseMatrix::identity(3)).is_ok());
        assert!(OrthonormalBasis::new(DenseMatrix::identity(3).scaled(2.0)).is_err());
        assert!(OrthonormalBasis::new(DenseMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn symmetrize_and_asymmetry() {
        let mut m = DenseMatrix::from_rows(&[[1.0, 2.0], [4.0, 3.0]]).unwrap();
        assert_eq!(m.asymmetry(), 2.0);
        m.symmetrize();
        assert_eq!(m[(0, 1)], 3.0);
        assert_eq!(m.asymmetry(), 0.0);
    }
}
