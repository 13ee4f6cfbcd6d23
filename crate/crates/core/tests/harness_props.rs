use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsvdlab::harness::{
    median_slope, proportion, rate_regression, records_csv, run_plan, ExperimentPlan, ReplicateRecord,
};

const N_GRID: [usize; 4] = [500, 1000, 2000, 4000];

/// `c·n^(−e)` times independent uniform noise in `[0.95, 1.05]`.
fn noisy_power_law(c: f64, e: f64, replicates: usize, seed: u64) -> Vec<ReplicateRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &n in &N_GRID {
        for r in 0..replicates {
            let noise = rng.random_range(0.95..1.05);
            out.push(ReplicateRecord {
                kind: "rate_regression".into(),
                n,
                g: 1,
                replicate: r,
                metrics: BTreeMap::from([("d2".to_string(), c * (n as f64).powf(-e) * noise)]),
                error: None,
            });
        }
    }
    out
}

fn recovery_plan(seed: u64, n: usize) -> ExperimentPlan {
    ExperimentPlan::from_json(&format!(
        r#"{{"kind": "recovery_table",
            "model_params": {{"rho": {{"c": 1.0}}, "k_tilde": 8, "a_n": 2, "clusterer": "k_means"}},
            "n_grid": [{n}], "g_list": [1, 2, 3], "replicates": 8, "master_seed": {seed}}}"#
    ))
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn regression_recovers_noisy_exponents(c in 0.1f64..10.0, e in 0.0f64..1.5, seed: u64) {
        // 50 replicates per size, as in the slope experiments
        let recs = noisy_power_law(c, e, 50, seed);
        let fit = rate_regression(&recs, "d2").unwrap();
        prop_assert!((fit.beta_hat - e).abs() <= 0.05, "{} vs {e}", fit.beta_hat);
        let med = median_slope(&recs, "d2", 1).unwrap();
        prop_assert!((med - e).abs() <= 0.05, "{med} vs {e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn recovery_is_monotone_in_g(seed: u64, n in 150usize..=300) {
        let plan = recovery_plan(seed, n);
        let recs = run_plan(&plan).unwrap();
        let props: Vec<f64> = [1, 2, 3].iter().map(|&g| proportion(&recs, n, g, "exact_recovery").unwrap()).collect();
        prop_assert!(props.windows(2).all(|w| w[0] <= w[1]), "{props:?}");
    }

    #[test]
    fn csv_is_independent_of_parallelism(seed: u64, threads in 2usize..=6) {
        let mut plan = recovery_plan(seed, 120);
        let serial = records_csv(&run_plan(&plan).unwrap());
        plan.parallelism = threads;
        prop_assert_eq!(records_csv(&run_plan(&plan).unwrap()), serial);
    }
}
