mod common;

use proptest::prelude::*;
use rsvdlab::sketch::{combined_sketch, rs_rsvd_sym_from_sketch};
use rsvdlab::{rs_rsvd_asym, rs_rsvd_sym, svd_thin, DenseMatrix, LowRankMode, RngStream, SketchConfig};

use common::{gaussian, orthonormal, symmetric, with_spectrum};

/// Rank-`k` signal with eigenvalues spread over `[1, 3]·n` plus a small
/// symmetric perturbation of relative size `eps`.
fn noisy_low_rank(n: usize, k: usize, seed: u64, eps: f64) -> (DenseMatrix, DenseMatrix) {
    let u = orthonormal(n, k, seed);
    let values: Vec<f64> = (0..k).map(|l| n as f64 * (3.0 - 2.0 * l as f64 / k as f64)).collect();
    let m = with_spectrum(&u, &values);
    let e = symmetric(n, seed ^ 0xe);
    let e = e.scaled(eps * rsvdlab::spectral_norm(&m) / rsvdlab::spectral_norm(&e));
    (m.add(&e).unwrap(), e)
}

/// Swaps the column blocks of a combined sketch by `perm`.
fn permute_blocks(sketch: &DenseMatrix, k_tilde: usize, perm: &[usize]) -> DenseMatrix {
    let n = sketch.rows();
    DenseMatrix::from_fn(n, sketch.cols(), |i, j| {
        let (b, c) = (j / k_tilde, j % k_tilde);
        sketch[(i, perm[b] * k_tilde + c)]
    })
}

fn matpow_times(m: &DenseMatrix, g: usize, x: &DenseMatrix) -> DenseMatrix {
    (0..g).fold(x.clone(), |acc, _| m.matmul(&acc).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn basis_is_orthonormal_and_projector_idempotent(
        n in 20usize..=60, k in 1usize..=4, extra in 0usize..=4, a_n in 1usize..=3, g in 1usize..=4, seed: u64,
    ) {
        let (m_hat, _) = noisy_low_rank(n, k, seed, 0.1);
        let cfg = SketchConfig::new(k, k + extra, a_n, g, RngStream::new(seed, 1));
        let out = rs_rsvd_sym(&m_hat, &cfg, LowRankMode::None).unwrap();
        prop_assert!(out.u_hat_g.matrix().orthonormality_defect() <= 1e-10);
        let p = out.u_hat_g.projector();
        let p2 = p.matmul(&p).unwrap();
        prop_assert!(p2.sub(&p).unwrap().max_abs() <= 1e-9);
    }

    #[test]
    fn selection_is_invariant_to_block_order(
        n in 20usize..=50, k in 1usize..=3, a_n in 2usize..=4, g in 1usize..=3, seed: u64, rot in 1usize..4,
    ) {
        let (m_hat, _) = noisy_low_rank(n, k, seed, 0.3);
        let cfg = SketchConfig::new(k, k + 2, a_n, g, RngStream::new(seed, 2));
        let sketch = combined_sketch(n, &cfg).unwrap();
        let perm: Vec<usize> = (0..a_n).map(|b| (b + rot) % a_n).collect();
        let base = rs_rsvd_sym_from_sketch(&m_hat, &cfg, &sketch, LowRankMode::None).unwrap();
        let logs = &base.log_sigma_k_all;
        let best = logs[base.chosen_sketch];
        let unique = logs.iter().enumerate().all(|(b, &l)| b == base.chosen_sketch || l < best - 1e-9 * best.abs());
        prop_assume!(unique);
        let permuted = rs_rsvd_sym_from_sketch(&m_hat, &cfg, &permute_blocks(&sketch, k + 2, &perm), LowRankMode::None).unwrap();
        prop_assert_eq!(perm[permuted.chosen_sketch], base.chosen_sketch);
        let diff = permuted.u_hat_g.projector().sub(&base.u_hat_g.projector()).unwrap().max_abs();
        prop_assert!(diff <= 1e-8, "{diff:e}");
    }

    #[test]
    fn sigma_k_matches_direct_product(
        n in 18usize..=30, k in 1usize..=3, extra in 0usize..=3, a_n in 1usize..=3, g in 1usize..=3, seed: u64,
    ) {
        let (m_hat, _) = noisy_low_rank(n, k, seed, 0.2);
        let kt = k + extra;
        let cfg = SketchConfig::new(k, kt, a_n, g, RngStream::new(seed, 3));
        let sketch = combined_sketch(n, &cfg).unwrap();
        let out = rs_rsvd_sym_from_sketch(&m_hat, &cfg, &sketch, LowRankMode::None).unwrap();
        for b in 0..a_n {
            let y = matpow_times(&m_hat, g, &sketch.columns(b * kt, (b + 1) * kt));
            let direct = svd_thin(&y).unwrap().1[k - 1];
            prop_assert!((out.sigma_k_all[b] - direct).abs() <= 1e-7 * direct, "{} vs {direct}", out.sigma_k_all[b]);
        }
        prop_assert_eq!(out.sigma_k_sketch, out.sigma_k_all[out.chosen_sketch]);
    }

    #[test]
    fn singular_values_are_close_under_small_noise(
        n in 20usize..=60, k in 1usize..=4, g in 2usize..=4, seed: u64, eps in 1e-6f64..1e-3,
    ) {
        let (m_hat, e) = noisy_low_rank(n, k, seed, eps);
        let m = m_hat.sub(&e).unwrap();
        let cfg = SketchConfig::new(k, k + 3, 2, g, RngStream::new(seed, 4));
        let out = rs_rsvd_sym(&m_hat, &cfg, LowRankMode::None).unwrap();
        let truth = svd_thin(&m).unwrap().1;
        let e_norm = rsvdlab::spectral_norm(&e);
        for (got, want) in out.sigma_tilde.iter().zip(&truth).take(k) {
            prop_assert!((got - want).abs() <= 10.0 * e_norm);
        }
    }

    #[test]
    fn asymmetric_basis_spans_rectangular_signal(
        rows in 15usize..=40, cols in 15usize..=40, k in 1usize..=3, g in 0usize..=2, seed: u64,
    ) {
        let left = orthonormal(rows, k, seed);
        let right = gaussian(cols, k, seed ^ 1);
        let m = left.matrix().matmul_t(&right).unwrap();
        let cfg = SketchConfig::new(k, k + 2, 2, g, RngStream::new(seed, 5));
        let out = rs_rsvd_asym(&m, &cfg).unwrap();
        prop_assert!(out.u_hat_g.matrix().orthonormality_defect() <= 1e-10);
        prop_assert!(rsvdlab::d2(&out.u_hat_g, &left).unwrap() <= 1e-8);
    }
}
