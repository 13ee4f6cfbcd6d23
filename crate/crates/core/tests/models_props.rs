mod common;

use proptest::prelude::*;
use rsvdlab::models::{b0, gen_completion, gen_missing_pca, gen_sbm, gen_sbm_with, SbmOptions};
use rsvdlab::{two_to_inf_norm, RngStream};

use common::{rel_err, with_spectrum};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sbm_truth_reconstructs_probabilities(n in 10usize..=120, rho in 0.05f64..=1.0, seed: u64, equal: bool) {
        let opts = SbmOptions { equal_sizes: equal, ..Default::default() };
        let inst = gen_sbm_with(n, &b0(), &[0.5, 0.5], rho, 2, RngStream::new(seed, 0), opts).unwrap();
        prop_assume!(inst.tau.contains(&0) && inst.tau.contains(&1));
        prop_assert!(rel_err(&with_spectrum(&inst.u, &inst.lambda), &inst.p_mat) <= 1e-9);
    }

    #[test]
    fn completion_truth_reconstructs_signal(n in 8usize..=80, k in 1usize..=4, seed: u64, homogeneous: bool) {
        prop_assume!(k <= n);
        let inst = gen_completion(n, k, 1.0, 0.5, 0.1, homogeneous, RngStream::new(seed, 0)).unwrap();
        prop_assert!(rel_err(&with_spectrum(&inst.u, &inst.lambda), &inst.t) <= 1e-9);
    }

    #[test]
    fn pca_truth_reconstructs_loading_gram(d in 4usize..=40, m in 4usize..=40, k in 1usize..=4, seed: u64) {
        prop_assume!(k <= d.min(m));
        let inst = gen_missing_pca(d, m, k, 0.5, 1.0, RngStream::new(seed, 0)).unwrap();
        let bbt = inst.b.matmul_t(&inst.b).unwrap();
        prop_assert!(rel_err(&with_spectrum(&inst.u, &inst.lambda), &bbt) <= 1e-9);
    }

    #[test]
    fn regeneration_is_bit_exact(n in 5usize..=60, seed: u64, id: u64) {
        let s = RngStream::new(seed, id);
        let (a, b) = (gen_sbm(n, &b0(), &[0.5, 0.5], 0.7, 2, s).unwrap(), gen_sbm(n, &b0(), &[0.5, 0.5], 0.7, 2, s).unwrap());
        prop_assert_eq!(a.a.as_slice(), b.a.as_slice());
        prop_assert_eq!(a.tau, b.tau);
        let (c, d) = (gen_completion(n, 2, 1.0, 0.4, 0.3, true, s).unwrap(), gen_completion(n, 2, 1.0, 0.4, 0.3, true, s).unwrap());
        prop_assert_eq!(c.t_hat.as_slice(), d.t_hat.as_slice());
        let (e, f) = (gen_missing_pca(n, 7, 1, 0.3, 1.0, s).unwrap(), gen_missing_pca(n, 7, 1, 0.3, 1.0, s).unwrap());
        prop_assert_eq!(e.x_obs.as_slice(), f.x_obs.as_slice());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn balanced_two_block_sbm_is_incoherent(n in 500usize..=900, seed: u64) {
        let inst = gen_sbm(n, &b0(), &[0.5, 0.5], 1.0, 2, RngStream::new(seed, 0)).unwrap();
        let coherence = (n as f64).sqrt() * two_to_inf_norm(inst.u.matrix());
        prop_assert!(coherence <= 3.0, "{coherence}");
    }
}

#[test]
fn symmetric_instances_are_symmetric() {
    let inst = gen_sbm(50, &b0(), &[0.5, 0.5], 1.0, 2, RngStream::new(1, 1)).unwrap();
    assert_eq!(inst.a.asymmetry(), 0.0);
    let c = gen_completion(50, 3, 1.0, 0.5, 1.0, false, RngStream::new(1, 2)).unwrap();
    assert_eq!(c.t_hat.asymmetry(), 0.0);
    assert_eq!(c.omega.asymmetry(), 0.0);
}
