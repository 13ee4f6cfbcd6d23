use std::collections::BTreeMap;

use rand::RngExt;
use rayon::prelude::*;

use crate::apps::{
    cluster_rows, exact_complete, match_labels, missing_pca_gram, rsvd_complete_path, CompletionMode, SamplingRate,
};
use crate::eig::sym_eig_top;
use crate::error::{LabError, Result};
use crate::matrix::DenseMatrix;
use crate::metrics::{d2, d2_inf};
use crate::models::{bernoulli_mask, gen_completion, gen_edm, gen_missing_pca, gen_sbm_with, SbmInstance, SbmOptions};
use crate::rng::{hash_key, RngStream};
use crate::sketch::{rs_rsvd_sym_path, LowRankMode, SketchConfig};

use super::analysis::{ci_coverage, clt_coverage};
use super::plan::{CiParams, EdmParams, ExperimentPlan, PlanKind, PcaParams, SbmParams};
use super::ReplicateRecord;

/// Stream of replicate `r` at size `n`. It does not depend on `g`, so all
/// powers of one replicate share their instance and test matrix.
pub fn replicate_stream(plan: &ExperimentPlan, n: usize, r: usize) -> RngStream {
    RngStream::new(plan.master_seed, hash_key(plan.kind.name(), &[n as u64, r as u64]))
}

type Metrics = BTreeMap<String, f64>;

/// Runs every `(n, g, replicate)` cell of the plan on a pool of
/// `plan.parallelism` threads. Output is sorted by `(n, g, replicate)` and
/// does not depend on the thread count.
pub fn run_plan(plan: &ExperimentPlan) -> Result<Vec<ReplicateRecord>> {
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.parallelism)
        .build()
        .map_err(|e| LabError::Unsupported(format!("thread pool: {e}")))?;
    let tasks: Vec<(usize, usize)> = plan
        .n_grid
        .iter()
        .flat_map(|&n| (0..plan.replicates).map(move |r| (n, r)))
        .collect();
    let mut records: Vec<ReplicateRecord> = pool.install(|| {
        tasks
            .par_iter()
            .flat_map_iter(|&(n, r)| run_replicate(plan, n, r))
            .collect()
    });
    records.sort_by_key(|rec| (rec.n, rec.g, rec.replicate));
    Ok(records)
}

/// All records of one replicate, one per power in `plan.g_list`.
pub fn run_replicate(plan: &ExperimentPlan, n: usize, r: usize) -> Vec<ReplicateRecord> {
    if plan.g_list.is_empty() {
        return Vec::new();
    }
    let stream = replicate_stream(plan, n, r);
    let outcome = match &plan.kind {
        PlanKind::RateRegression(p) => sbm_replicate(p, n, &plan.g_list, stream, SbmMetrics::Rate),
        PlanKind::RecoveryTable(p) => sbm_replicate(p, n, &plan.g_list, stream, SbmMetrics::Recovery),
        PlanKind::CltCoverage(p) => sbm_replicate(p, n, &plan.g_list, stream, SbmMetrics::Clt),
        PlanKind::CiCoverage(p) => ci_replicate(p, n, &plan.g_list, stream),
        PlanKind::PcaSweep(p) => pca_replicate(p, n, &plan.g_list, stream),
        PlanKind::EdmCompletion(p) => edm_replicate(p, n, &plan.g_list, stream),
    };
    let kind = plan.kind.name().to_string();
    let make = |g: usize, metrics: Metrics, error: Option<String>| ReplicateRecord {
        kind: kind.clone(),
        n,
        g,
        replicate: r,
        metrics,
        error,
    };
    match outcome {
        Ok(per_g) => plan
            .g_list
            .iter()
            .zip(per_g)
            .map(|(&g, m)| {
                if m.values().all(|v| v.is_finite()) {
                    make(g, m, None)
                } else {
                    make(g, failed(), Some("non-finite metric".into()))
                }
            })
            .collect(),
        Err(e) => plan.g_list.iter().map(|&g| make(g, failed(), Some(e.to_string()))).collect(),
    }
}

fn failed() -> Metrics {
    BTreeMap::from([("failed".to_string(), 1.0)])
}

fn sketch_config(k: usize, k_tilde: usize, a_n: usize, g: usize, stream: RngStream) -> SketchConfig {
    SketchConfig::new(k, k_tilde, a_n, g, stream.derive_labeled("sketch", &[]))
}

/// Picks the entries of a `1..=g_max` path that `g_list` asks for.
fn pick<T>(path: Vec<T>, g_list: &[usize]) -> Vec<T> {
    let mut path: Vec<Option<T>> = path.into_iter().map(Some).collect();
    g_list.iter().map(|&g| path[g - 1].take().expect("distinct powers")).collect()
}

#[derive(Clone, Copy)]
enum SbmMetrics {
    Rate,
    Recovery,
    Clt,
}

fn sbm_instance(p: &SbmParams, n: usize, stream: RngStream) -> Result<SbmInstance> {
    gen_sbm_with(
        n,
        &p.b_matrix()?,
        &p.proportions(),
        p.rho.at(n),
        p.dim(),
        stream.derive_labeled("instance", &[]),
        SbmOptions { hollow: p.hollow, equal_sizes: p.equal_sizes },
    )
}

fn sbm_replicate(p: &SbmParams, n: usize, g_list: &[usize], stream: RngStream, what: SbmMetrics) -> Result<Vec<Metrics>> {
    let inst = sbm_instance(p, n, stream)?;
    let g_max = *g_list.last().expect("nonempty");
    let cfg = sketch_config(p.dim(), p.k_tilde.resolve(n), p.a_n.resolve(n), g_max, stream);
    let path = pick(rs_rsvd_sym_path(&inst.a, &cfg, LowRankMode::None)?, g_list);
    path.into_iter()
        .map(|out| {
            let u_hat = out.u_hat_g;
            let mut m = Metrics::new();
            match what {
                SbmMetrics::Rate => {
                    let scale = if p.log_adjust_d2inf { (n as f64).ln().sqrt() } else { 1.0 };
                    m.insert("d2".into(), d2(&u_hat, &inst.u)?);
                    m.insert("d2inf".into(), d2_inf(&u_hat, &inst.u)? / scale);
                }
                SbmMetrics::Recovery => {
                    let s = stream.derive_labeled("cluster", &[out.g as u64]);
                    let tau_hat = cluster_rows(u_hat.matrix(), p.blocks(), p.clusterer, s)?;
                    let lm = match_labels(&tau_hat, &inst.tau)?;
                    m.insert("exact_recovery".into(), if lm.exact { 1.0 } else { 0.0 });
                    m.insert("error_rate".into(), lm.error_rate);
                }
                SbmMetrics::Clt => {
                    let c = clt_coverage(&inst, &u_hat, p.alpha)?;
                    m.insert("clt_coverage".into(), c.coverage);
                    m.insert("clt_skipped".into(), c.skipped as f64);
                }
            }
            Ok(m)
        })
        .collect()
}

/// `‖T‖_max` of the homogeneous signal; the signal does not depend on the
/// noise level, so a noiseless draw gives it.
fn homogeneous_tmax(p: &CiParams, n: usize, stream: RngStream) -> Result<f64> {
    Ok(gen_completion(n, p.k, p.signal_scale, 1.0, 0.0, true, stream)?.t.max_abs())
}

fn ci_replicate(p: &CiParams, n: usize, g_list: &[usize], stream: RngStream) -> Result<Vec<Metrics>> {
    let inst_stream = stream.derive_labeled("instance", &[]);
    let sigma = p.sigma_rel * homogeneous_tmax(p, n, inst_stream)?;
    let inst = gen_completion(n, p.k, p.signal_scale, p.p, sigma, true, inst_stream)?;
    let g_max = *g_list.last().expect("nonempty");
    let cfg = sketch_config(p.k, p.k_tilde.resolve(n), p.a_n.resolve(n), g_max, stream);
    let path = pick(
        rsvd_complete_path(&inst.t_hat, SamplingRate::Known(p.p), None, p.k, &cfg, p.mode)?,
        g_list,
    );
    let mut rng = stream.derive_labeled("entries", &[]).rng();
    let entries: Vec<(usize, usize)> = (0..p.entry_sample)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
        .collect();
    path.iter()
        .map(|res| {
            let c = ci_coverage(&inst, res, &entries, p.alpha)?;
            let err = res.t_hat_g.sub(&inst.t)?;
            Ok(Metrics::from([
                ("ci_coverage".into(), c.coverage),
                ("frob_err".into(), err.frobenius() / inst.t.frobenius()),
                ("max_err".into(), err.max_abs() / inst.t.max_abs()),
            ]))
        })
        .collect()
}

fn pca_replicate(p: &PcaParams, d: usize, g_list: &[usize], stream: RngStream) -> Result<Vec<Metrics>> {
    let inst = gen_missing_pca(d, p.m, p.k, p.p, p.sigma, stream.derive_labeled("instance", &[]))?;
    let q = missing_pca_gram(&inst.x_obs, p.p)?;
    let g_max = *g_list.last().expect("nonempty");
    let cfg = sketch_config(p.k, p.k_tilde.resolve(d), p.a_n.resolve(d), g_max, stream);
    let path = pick(rs_rsvd_sym_path(&q, &cfg, LowRankMode::None)?, g_list);
    let exact = if p.exact_baseline {
        Some(d2(&sym_eig_top(&q, p.k)?.vectors, &inst.u)?)
    } else {
        None
    };
    path.into_iter()
        .map(|out| {
            let mut m = Metrics::from([("d2".to_string(), d2(&out.u_hat_g, &inst.u)?)]);
            if let Some(e) = exact {
                m.insert("d2_exact".into(), e);
            }
            Ok(m)
        })
        .collect()
}

fn edm_errors(est: &DenseMatrix, truth: &DenseMatrix, suffix: &str, m: &mut Metrics) -> Result<()> {
    let err = est.sub(truth)?;
    m.insert(format!("frob_err{suffix}"), err.frobenius() / truth.frobenius());
    m.insert(format!("max_err{suffix}"), err.max_abs() / truth.max_abs());
    Ok(())
}

fn edm_replicate(p: &EdmParams, n: usize, g_list: &[usize], stream: RngStream) -> Result<Vec<Metrics>> {
    let (dist, _) = gen_edm(n, p.dim, p.box_size, stream.derive_labeled("instance", &[]))?;
    let mask = bernoulli_mask(n, p.p, stream.derive_labeled("mask", &[]))?;
    let observed = dist.hadamard(&mask)?;
    let k = p.rank();
    let g_max = *g_list.last().expect("nonempty");
    let cfg = sketch_config(k, p.k_tilde.resolve(n), p.a_n.resolve(n), g_max, stream);
    let path = pick(
        rsvd_complete_path(&observed, SamplingRate::Known(p.p), None, k, &cfg, CompletionMode::OneSided)?,
        g_list,
    );
    let mut exact = Metrics::new();
    if p.exact_baseline {
        let base = exact_complete(&observed, SamplingRate::Known(p.p), None, k, CompletionMode::OneSided)?;
        edm_errors(&base.t_hat_g, &dist, "_exact", &mut exact)?;
    }
    path.iter()
        .map(|res| {
            let mut m = exact.clone();
            edm_errors(&res.t_hat_g, &dist, "", &mut m)?;
            Ok(m)
        })
        .collect()
}
