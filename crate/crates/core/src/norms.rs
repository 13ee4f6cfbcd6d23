use crate::matrix::{dot, DenseMatrix};
use crate::rng::{gaussian_matrix, RngStream};

/// The four matrix norms used throughout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatrixNorms {
    pub spectral: f64,
    pub frobenius: f64,
    /// Largest row ℓ₂ norm.
    pub two_to_inf: f64,
    /// Largest absolute entry.
    pub max: f64,
}

const SPECTRAL_SEED: RngStream = RngStream { master_seed: 0x005e_ed0f_5eed, stream_id: 0 };

pub fn norms(a: &DenseMatrix) -> MatrixNorms {
    MatrixNorms {
        spectral: spectral_norm(a),
        frobenius: a.frobenius(),
        two_to_inf: two_to_inf_norm(a),
        max: a.max_abs(),
    }
}

pub fn two_to_inf_norm(a: &DenseMatrix) -> f64 {
    a.row_norms().into_iter().fold(0.0, f64::max)
}

/// Largest singular value by power iteration on `AᵀA` from a fixed seeded
/// start, stopped once the Rayleigh quotient changes by less than `1e-10`
/// relative over a step.
pub fn spectral_norm(a: &DenseMatrix) -> f64 {
    if a.rows() == 0 || a.cols() == 0 || a.max_abs() == 0.0 {
        return 0.0;
    }
    let mut x = gaussian_matrix(a.cols(), 1, SPECTRAL_SEED)
        .expect("positive dimensions")
        .into_vec();
    normalize(&mut x);
    let mut estimate = 0.0_f64;
    const MAX_ITERS: usize = 20_000;
    for _ in 0..MAX_ITERS {
        let y = a.matvec(&x);
        let mut z = a.t_matvec(&y);
        // Rayleigh quotient of AᵀA at the unit vector x
        let rq = dot(&x, &z);
        let norm = normalize(&mut z);
        if norm == 0.0 {
            break;
        }
        x = z;
        let converged = (rq - estimate).abs() <= 1e-12 * rq.abs();
        estimate = rq;
        if converged {
            break;
        }
    }
    estimate.max(0.0).sqrt()
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = dot(x, x).sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}
