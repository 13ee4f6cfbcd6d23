mod common;

use proptest::prelude::*;
use rsvdlab::{gaussian_matrix, norms, qr_thin, svd_thin, sym_eig, DenseMatrix, OrthonormalBasis, RngStream};

use common::{gaussian, rel_err, symmetric};

fn defect(q: &OrthonormalBasis) -> f64 {
    q.matrix().orthonormality_defect()
}

/// Columns scaled over several decades so the factorizations see graded input.
fn graded(rows: usize, cols: usize, seed: u64, decades: i32) -> DenseMatrix {
    let mut a = gaussian(rows, cols, seed);
    for j in 0..cols {
        let s = 10f64.powf(decades as f64 * j as f64 / cols.max(1) as f64);
        a.col_mut(j).iter_mut().for_each(|x| *x *= s);
    }
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn svd_reconstructs_and_is_orthonormal(cols in 1usize..=32, extra in 0usize..=32, seed: u64, decades in -4i32..=4) {
        let rows = cols + extra;
        let a = graded(rows, cols, seed, decades);
        let (u, s, v) = svd_thin(&a).unwrap();
        prop_assert!(defect(&u) <= 1e-10 && defect(&v) <= 1e-10);
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]) && s.iter().all(|&x| x >= 0.0));
        let mut us = u.matrix().clone();
        for (j, &x) in s.iter().enumerate() {
            us.col_mut(j).iter_mut().for_each(|y| *y *= x);
        }
        let back = us.matmul_t(v.matrix()).unwrap();
        prop_assert!(rel_err(&back, &a) <= 1e-9, "{}", rel_err(&back, &a));
    }

    #[test]
    fn sym_eig_reconstructs_and_is_orthonormal(n in 1usize..=40, seed: u64) {
        let s = symmetric(n, seed);
        let e = sym_eig(&s).unwrap();
        prop_assert!(defect(&e.vectors) <= 1e-10);
        prop_assert!(rel_err(&e.reconstruct(), &s) <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn qr_is_orthonormal_and_reconstructs(cols in 1usize..=24, extra in 0usize..=24, seed: u64) {
        let a = gaussian(cols + extra, cols, seed);
        let (q, r) = qr_thin(&a).unwrap();
        prop_assert!(defect(&q) <= 1e-10);
        prop_assert!(rel_err(&q.matrix().matmul(&r).unwrap(), &a) <= 1e-12);
    }

    #[test]
    fn spectral_norm_matches_top_singular_value(cols in 1usize..=20, extra in 0usize..=20, seed: u64) {
        let a = gaussian(cols + extra, cols, seed);
        let s0 = svd_thin(&a).unwrap().1[0];
        let got = norms(&a).spectral;
        prop_assert!((got - s0).abs() <= 1e-8 * s0, "{got} vs {s0}");
    }

    #[test]
    fn gaussian_stream_is_bit_identical_across_threads(rows in 1usize..=50, cols in 1usize..=20, seed: u64, id: u64) {
        let stream = RngStream::new(seed, id);
        let first = gaussian_matrix(rows, cols, stream).unwrap();
        for threads in [1, 4] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let again = pool.install(|| gaussian_matrix(rows, cols, stream).unwrap());
            prop_assert_eq!(first.as_slice(), again.as_slice());
        }
    }
}
