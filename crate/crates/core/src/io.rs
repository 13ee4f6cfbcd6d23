//! Matrix Market readers/writers and a small CSV writer.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! written file reads back bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{LabError, Result};
use crate::matrix::DenseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

/// Parses a Matrix Market document (`coordinate` or `array`; `real`,
/// `integer` or `pattern`; `general`, `symmetric` or `skew-symmetric`).
pub fn parse_matrix_market(text: &str) -> Result<DenseMatrix> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| LabError::Parse("empty Matrix Market input".into()))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(LabError::Parse(format!("bad Matrix Market banner: {header:?}")));
    }
    let coordinate = match tokens[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(LabError::Parse(format!("unknown format {other:?}"))),
    };
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => return Err(LabError::Parse(format!("unsupported field {other:?}"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(LabError::Parse(format!("unsupported symmetry {other:?}"))),
    };
    if field == Field::Pattern && !coordinate {
        return Err(LabError::Parse("pattern field requires coordinate format".into()));
    }

    let mut body = lines.map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('%'));
    let size_line = body
        .next()
        .ok_or_else(|| LabError::Parse("missing size line".into()))?;
    let sizes: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| LabError::Parse(format!("size line: {e}"))))
        .collect::<Result<_>>()?;
    let parse_f = |t: &str| -> Result<f64> {
        t.parse::<f64>()
            .map_err(|e| LabError::Parse(format!("bad value {t:?}: {e}")))
    };

    if coordinate {
        if sizes.len() != 3 {
            return Err(LabError::Parse("coordinate size line needs rows cols nnz".into()));
        }
        let (rows, cols, nnz) = (sizes[0], sizes[1], sizes[2]);
        let mut m = DenseMatrix::zeros(rows, cols);
        let mut seen = 0;
        for line in body {
            let t: Vec<&str> = line.split_whitespace().collect();
            let need = if field == Field::Pattern { 2 } else { 3 };
            if t.len() < need {
                return Err(LabError::Parse(format!("short entry line {line:?}")));
            }
            let i: usize = t[0].parse().map_err(|e| LabError::Parse(format!("row index: {e}")))?;
            let j: usize = t[1].parse().map_err(|e| LabError::Parse(format!("col index: {e}")))?;
            if i == 0 || j == 0 || i > rows || j > cols {
                return Err(LabError::Parse(format!("index ({i}, {j}) out of range")));
            }
            let v = if field == Field::Pattern { 1.0 } else { parse_f(t[2])? };
            let (i, j) = (i - 1, j - 1);
            m[(i, j)] += v;
            if i != j {
                match symmetry {
                    Symmetry::General => {}
                    Symmetry::Symmetric => m[(j, i)] += v,
                    Symmetry::SkewSymmetric => m[(j, i)] -= v,
                }
            }
            seen += 1;
        }
        if seen != nnz {
            return Err(LabError::Parse(format!("expected {nnz} entries, found {seen}")));
        }
        DenseMatrix::from_col_major(rows, cols, m.into_vec())
    } else {
        if sizes.len() != 2 {
            return Err(LabError::Parse("array size line needs rows cols".into()));
        }
        let (rows, cols) = (sizes[0], sizes[1]);
        let values: Vec<f64> = body
            .flat_map(str::split_whitespace)
            .map(parse_f)
            .collect::<Result<_>>()?;
        let mut m = DenseMatrix::zeros(rows, cols);
        match symmetry {
            Symmetry::General => {
                if values.len() != rows * cols {
                    return Err(LabError::Parse(format!(
                        "expected {} array values, found {}",
                        rows * cols,
                        values.len()
                    )));
                }
                m.as_mut_slice().copy_from_slice(&values);
            }
            Symmetry::Symmetric | Symmetry::SkewSymmetric => {
                if rows != cols {
                    return Err(LabError::Parse("symmetric array must be square".into()));
                }
                let skew = symmetry == Symmetry::SkewSymmetric;
                let mut it = values.into_iter();
                for j in 0..cols {
                    let start = if skew { j + 1 } else { j };
                    for i in start..rows {
                        let v = it
                            .next()
                            .ok_or_else(|| LabError::Parse("too few array values".into()))?;
                        m[(i, j)] = v;
                        m[(j, i)] = if skew { -v } else { v };
                    }
                }
                if it.next().is_some() {
                    return Err(LabError::Parse("too many array values".into()));
                }
            }
        }
        DenseMatrix::from_col_major(rows, cols, m.into_vec())
    }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    parse_matrix_market(&fs::read_to_string(path)?)
}

/// Dense `array real general` encoding.
pub fn matrix_market_array(m: &DenseMatrix) -> String {
    let mut out = String::with_capacity(m.rows() * m.cols() * 20 + 64);
    out.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{} {}", m.rows(), m.cols());
    for v in m.as_slice() {
        let _ = writeln!(out, "{v}");
    }
    out
}

/// Sparse `coordinate real general` encoding of the nonzero entries.
pub fn matrix_market_coordinate(m: &DenseMatrix) -> String {
    let mut entries = String::new();
    let mut nnz = 0;
    for j in 0..m.cols() {
        for (i, &v) in m.col(j).iter().enumerate() {
            if v != 0.0 {
                let _ = writeln!(entries, "{} {} {v}", i + 1, j + 1);
                nnz += 1;
            }
        }
    }
    format!(
        "%%MatrixMarket matrix coordinate real general\n{} {} {nnz}\n{entries}",
        m.rows(),
        m.cols()
    )
}

pub fn write_matrix_market(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    fs::write(path, matrix_market_array(m))?;
    Ok(())
}

pub fn write_matrix_market_coordinate(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    fs::write(path, matrix_market_coordinate(m))?;
    Ok(())
}

/// Row-major CSV of a matrix, no header, `\n` line endings.
pub fn matrix_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| format!("{}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(matrix_csv(m).as_bytes())?;
    Ok(())
}
