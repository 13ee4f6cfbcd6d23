use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use rsvdlab::apps::{
    entry_ci, estimate_p, exact_complete, exact_missing_pca, rsvd_complete, rsvd_missing_pca, rsvd_spectral_cluster,
    match_labels, SamplingRate,
};
use rsvdlab::harness::{emit_csv, run_plan, summarize, ExperimentPlan};
use rsvdlab::io::{read_matrix_market, write_matrix_market};
use rsvdlab::rng::hash_key;
use rsvdlab::stats::median;
use rsvdlab::{d2, rs_rsvd_asym, rs_rsvd_sym, DenseMatrix, LowRankMode, RngStream, SketchConfig};

use crate::args::{ClusterArgs, CompleteArgs, ExperimentArgs, InputArgs, PcaArgs, SketchArgs, SvdArgs};
use crate::config::{env_seed, overlay};
use crate::error::{CliError, CliResult};
use crate::gen::{GenSpec, Generated};

#[derive(Serialize)]
struct Meta<'a> {
    command: &'a str,
    version: &'a str,
    config: Value,
    seed_source: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    sketch: Option<SketchConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    generator: Option<Value>,
    results: Value,
}

fn write_meta(out: &Path, meta: &Meta<'_>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(meta)?;
    text.push('\n');
    fs::write(out.join("meta.json"), text)?;
    Ok(())
}

fn prepare_out(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| CliError::usage(format!("cannot create {}: {e}", out.display())))
}

/// Applies the env seed on top of flags and config; returns where it came from.
fn resolve_seed(seed: &mut u64, from_config: bool) -> CliResult<&'static str> {
    if let Some(s) = env_seed()? {
        *seed = s;
        return Ok("env");
    }
    Ok(if from_config { "config" } else { "flag" })
}

fn config_sets_seed(config: Option<&Path>) -> bool {
    config
        .and_then(|p| fs::read_to_string(p).ok())
        .and_then(|t| serde_json::from_str::<Value>(&t).ok())
        .is_some_and(|v| v.get("seed").is_some())
}

fn gen_stream(seed: u64, rep: usize) -> RngStream {
    RngStream::new(seed, hash_key("gen", &[rep as u64]))
}

fn sketch_stream(seed: u64, rep: usize) -> RngStream {
    RngStream::new(seed, hash_key("sketch", &[rep as u64]))
}

/// Fills the absent sketch sizes for a sketch of `n` rows.
fn sketch_config(k: usize, n: usize, s: &SketchArgs, stream: RngStream) -> SketchConfig {
    let k_tilde = s.ktilde.unwrap_or((k + 5).min(n).max(k));
    let a_n = s
        .an
        .unwrap_or_else(|| SketchConfig::log_repeats(n).min(n / k_tilde.max(1)).max(1));
    SketchConfig::new(k, k_tilde, a_n, s.g, stream)
}

fn parse_gen(input: &InputArgs) -> CliResult<Option<GenSpec>> {
    input.gen.as_deref().map(GenSpec::parse).transpose()
}

fn generator_meta(spec: &GenSpec, stream: RngStream) -> CliResult<Value> {
    Ok(json!({ "spec": serde_json::to_value(spec)?, "stream": serde_json::to_value(stream)? }))
}

fn read_input(path: &Path) -> CliResult<DenseMatrix> {
    read_matrix_market(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn input_path(input: &InputArgs) -> CliResult<&PathBuf> {
    input.input.as_ref().ok_or_else(|| CliError::usage("an input file or --gen is required"))
}

fn parse_rate(raw: &str) -> CliResult<SamplingRate> {
    if raw == "auto" {
        return Ok(SamplingRate::Auto);
    }
    raw.parse::<f64>()
        .map(SamplingRate::Known)
        .map_err(|_| CliError::usage(format!("--p must be a number or `auto`, got `{raw}`")))
}

fn number_list(values: &[f64]) -> String {
    values.iter().fold(String::new(), |mut s, v| {
        let _ = writeln!(s, "{v}");
        s
    })
}

pub fn svd(args: SvdArgs) -> CliResult<()> {
    let from_config = config_sets_seed(args.common.config.as_deref());
    let mut args = overlay(args.clone(), args.common.config.as_deref())?;
    let seed_source = resolve_seed(&mut args.sketch.seed, from_config)?;
    let seed = args.sketch.seed;
    let spec = parse_gen(&args.input)?;
    let (m, generator) = match &spec {
        Some(spec) => {
            let stream = gen_stream(seed, 0);
            (spec.draw(stream)?.observed().clone(), Some(generator_meta(spec, stream)?))
        }
        None => (read_input(input_path(&args.input)?)?, None),
    };
    prepare_out(&args.common.out)?;

    let cfg = sketch_config(args.k, m.cols(), &args.sketch, sketch_stream(seed, 0));
    let out = if args.asym {
        rs_rsvd_asym(&m, &cfg)?
    } else {
        rs_rsvd_sym(&m, &cfg, LowRankMode::None)?
    };
    write_matrix_market(args.common.out.join("U.mm"), out.u_hat_g.matrix())?;
    fs::write(args.common.out.join("sigma.csv"), format!("sigma\n{}", number_list(&out.sigma_tilde)))?;
    write_meta(
        &args.common.out,
        &Meta {
            command: "svd",
            version: env!("CARGO_PKG_VERSION"),
            config: serde_json::to_value(&args)?,
            seed_source,
            sketch: Some(cfg),
            generator,
            results: json!({
                "rows": m.rows(),
                "cols": m.cols(),
                "symmetric": !args.asym,
                "sigma": out.sigma_tilde,
                "chosen_sketch": out.chosen_sketch,
                "log_sigma_k_all": out.log_sigma_k_all,
            }),
        },
    )
}

/// One label per line; a header line and leading CSV fields are ignored.
fn read_labels(path: &Path) -> CliResult<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut labels = Vec::new();
    for (no, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let field = line.rsplit(',').next().unwrap_or("").trim();
        match field.parse::<usize>() {
            Ok(l) => labels.push(l),
            Err(_) if no == 0 => {}
            Err(_) => return Err(CliError::usage(format!("{}: line {} is not a label", path.display(), no + 1))),
        }
    }
    Ok(labels)
}

pub fn cluster(args: ClusterArgs) -> CliResult<()> {
    let from_config = config_sets_seed(args.common.config.as_deref());
    let mut args = overlay(args.clone(), args.common.config.as_deref())?;
    let seed_source = resolve_seed(&mut args.sketch.seed, from_config)?;
    let seed = args.sketch.seed;
    if args.reps == 0 {
        return Err(CliError::usage("--reps must be at least 1"));
    }
    let spec = parse_gen(&args.input)?;
    if spec.as_ref().is_some_and(|s| s.kind() != "sbm") {
        return Err(CliError::usage("cluster needs an sbm generator"));
    }
    let file = match &spec {
        Some(_) => None,
        None => Some(read_input(input_path(&args.input)?)?),
    };
    let file_truth = args.truth.as_deref().map(read_labels).transpose()?;
    prepare_out(&args.common.out)?;

    let d = args.d.unwrap_or(args.blocks);
    let mut rows = String::from("replicate,exact_recovery,error_rate,failed\n");
    let mut first_labels: Option<Vec<usize>> = None;
    let (mut recovered, mut failed, mut scored) = (0usize, 0usize, 0usize);
    let mut error_rates = Vec::new();
    let mut cfg0 = None;
    for rep in 0..args.reps {
        let drawn = spec.as_ref().map(|s| s.draw(gen_stream(seed, rep))).transpose()?;
        let (a, gen_truth) = match &drawn {
            Some(Generated::Sbm(inst)) => (&inst.a, Some(&inst.tau)),
            Some(_) => unreachable!("kind checked above"),
            None => (file.as_ref().expect("file input"), None),
        };
        let truth = file_truth.as_ref().or(gen_truth);
        if let Some(t) = truth {
            if t.len() != a.rows() {
                return Err(CliError::usage(format!("{} true labels for {} nodes", t.len(), a.rows())));
            }
        }
        let cfg = sketch_config(d, a.rows(), &args.sketch, sketch_stream(seed, rep));
        cfg0.get_or_insert(cfg);
        let res = match rsvd_spectral_cluster(a, d, args.blocks, &cfg, args.clusterer.into()) {
            Ok(r) => r,
            Err(e) if args.reps > 1 && e.is_numerical() => {
                failed += 1;
                if truth.is_some() {
                    let _ = writeln!(rows, "{rep},0,1,1");
                }
                first_labels.get_or_insert_with(Vec::new);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let mut labels = res.tau_hat;
        if let Some(t) = truth {
            let m = match_labels(&labels, t)?;
            scored += 1;
            recovered += usize::from(m.exact);
            error_rates.push(m.error_rate);
            let _ = writeln!(rows, "{rep},{},{},0", u8::from(m.exact), m.error_rate);
            labels = m.permuted;
        }
        first_labels.get_or_insert(labels);
    }

    let mut labels_csv = String::from("node,label\n");
    for (i, l) in first_labels.unwrap_or_default().iter().enumerate() {
        let _ = writeln!(labels_csv, "{i},{l}");
    }
    fs::write(args.common.out.join("labels.csv"), labels_csv)?;
    let has_truth = file_truth.is_some() || spec.is_some();
    let mut results = json!({ "reps": args.reps, "failed": failed });
    if has_truth {
        fs::write(args.common.out.join("recovery.csv"), rows)?;
        let total = (scored + failed) as f64;
        results["recovery_proportion"] = json!(recovered as f64 / total);
        results["mean_error_rate"] = json!(if error_rates.is_empty() { None } else { Some(rsvdlab::stats::mean(&error_rates)) });
    }
    write_meta(
        &args.common.out,
        &Meta {
            command: "cluster",
            version: env!("CARGO_PKG_VERSION"),
            config: serde_json::to_value(&args)?,
            seed_source,
            sketch: cfg0,
            generator: spec.as_ref().map(|s| generator_meta(s, gen_stream(seed, 0))).transpose()?,
            results,
        },
    )
}

fn parse_ci(raw: &str) -> CliResult<(usize, usize, f64)> {
    let bad = || CliError::usage(format!("--ci expects `i,j,alpha`, got `{raw}`"));
    let f: Vec<&str> = raw.split(',').map(str::trim).collect();
    if f.len() != 3 {
        return Err(bad());
    }
    Ok((f[0].parse().map_err(|_| bad())?, f[1].parse().map_err(|_| bad())?, f[2].parse().map_err(|_| bad())?))
}

/// Relative Frobenius and max errors, and the median relative error over
/// the entries where the truth is nonzero.
fn completion_errors(est: &DenseMatrix, truth: &DenseMatrix) -> CliResult<Value> {
    let err = est.sub(truth)?;
    let rel: Vec<f64> = truth
        .as_slice()
        .iter()
        .zip(est.as_slice())
        .filter(|(t, _)| **t != 0.0)
        .map(|(t, e)| ((e - t) / t).abs())
        .collect();
    Ok(json!({
        "frob_err": err.frobenius() / truth.frobenius(),
        "max_err": err.max_abs() / truth.max_abs(),
        "median_rel_err": if rel.is_empty() { None } else { Some(median(&rel)) },
    }))
}

pub fn complete(args: CompleteArgs) -> CliResult<()> {
    let from_config = config_sets_seed(args.common.config.as_deref());
    let mut args = overlay(args.clone(), args.common.config.as_deref())?;
    let seed_source = resolve_seed(&mut args.sketch.seed, from_config)?;
    let seed = args.sketch.seed;
    let rate = parse_rate(&args.p)?;
    let requests = args.ci.iter().map(|c| parse_ci(c)).collect::<CliResult<Vec<_>>>()?;
    let spec = parse_gen(&args.input)?;
    let drawn = spec.as_ref().map(|s| s.draw(gen_stream(seed, 0))).transpose()?;
    let (t_hat, mask, truth, gen_rank) = match drawn {
        Some(Generated::Completion(inst)) => {
            let k = inst.lambda.len();
            (inst.t_hat, Some(inst.omega), Some(inst.t), Some(k))
        }
        Some(Generated::Edm { dist, mask, observed, rank, .. }) => (observed, Some(mask), Some(dist), Some(rank)),
        Some(_) => return Err(CliError::usage("complete needs a completion or edm generator")),
        None => {
            let mask = args.mask.as_deref().map(read_input).transpose()?;
            (read_input(input_path(&args.input)?)?, mask, None, None)
        }
    };
    let k = args
        .k
        .or(gen_rank)
        .ok_or_else(|| CliError::usage("--k is required for file input"))?;
    prepare_out(&args.common.out)?;

    let cfg = sketch_config(k, t_hat.rows(), &args.sketch, sketch_stream(seed, 0));
    let result = if args.exact {
        exact_complete(&t_hat, rate, mask.as_ref(), k, args.mode.into())?
    } else {
        rsvd_complete(&t_hat, rate, mask.as_ref(), k, &cfg, args.mode.into())?
    };
    write_matrix_market(args.common.out.join("completed.mm"), &result.t_hat_g)?;

    let mut ci_csv = String::from("i,j,alpha,estimate,v_hat,lo,hi\n");
    let mut covered = 0usize;
    for &(i, j, alpha) in &requests {
        let ci = entry_ci(&result, &t_hat, result.p_used, i, j, alpha)?;
        let _ = writeln!(ci_csv, "{i},{j},{alpha},{},{},{},{}", ci.estimate, ci.v_hat, ci.lo, ci.hi);
        covered += usize::from(truth.as_ref().is_some_and(|t| ci.contains(t[(i, j)])));
    }
    fs::write(args.common.out.join("ci.csv"), ci_csv)?;

    let mut results = json!({ "p_used": result.p_used, "g": result.g, "k": k, "exact": args.exact });
    if let Some(t) = &truth {
        results["errors"] = completion_errors(&result.t_hat_g, t)?;
        results["ci_covered"] = json!(covered);
    }
    write_meta(
        &args.common.out,
        &Meta {
            command: "complete",
            version: env!("CARGO_PKG_VERSION"),
            config: serde_json::to_value(&args)?,
            seed_source,
            sketch: (!args.exact).then_some(cfg),
            generator: spec.as_ref().map(|s| generator_meta(s, gen_stream(seed, 0))).transpose()?,
            results,
        },
    )
}

pub fn pca(args: PcaArgs) -> CliResult<()> {
    let from_config = config_sets_seed(args.common.config.as_deref());
    let mut args = overlay(args.clone(), args.common.config.as_deref())?;
    let seed_source = resolve_seed(&mut args.sketch.seed, from_config)?;
    let seed = args.sketch.seed;
    let rate = parse_rate(&args.p)?;
    let spec = parse_gen(&args.input)?;
    let drawn = spec.as_ref().map(|s| s.draw(gen_stream(seed, 0))).transpose()?;
    let (x_obs, truth) = match drawn {
        Some(Generated::Pca(inst)) => (inst.x_obs, Some(inst.u)),
        Some(_) => return Err(CliError::usage("pca needs a pca generator")),
        None => (read_input(input_path(&args.input)?)?, None),
    };
    let k = args
        .k
        .or(truth.as_ref().map(|u| u.cols()))
        .ok_or_else(|| CliError::usage("--k is required for file input"))?;
    prepare_out(&args.common.out)?;

    let p = match rate {
        SamplingRate::Known(p) => p,
        SamplingRate::Auto => estimate_p(&x_obs, None)?,
    };
    let cfg = sketch_config(k, x_obs.rows(), &args.sketch, sketch_stream(seed, 0));
    let u = if args.exact {
        exact_missing_pca(&x_obs, p, k)?
    } else {
        rsvd_missing_pca(&x_obs, p, k, &cfg)?
    };
    write_matrix_market(args.common.out.join("U.mm"), u.matrix())?;
    let mut results = json!({ "p_used": p, "k": k, "exact": args.exact });
    if let Some(t) = &truth {
        results["d2"] = json!(d2(&u, t)?);
    }
    write_meta(
        &args.common.out,
        &Meta {
            command: "pca",
            version: env!("CARGO_PKG_VERSION"),
            config: serde_json::to_value(&args)?,
            seed_source,
            sketch: (!args.exact).then_some(cfg),
            generator: spec.as_ref().map(|s| generator_meta(s, gen_stream(seed, 0))).transpose()?,
            results,
        },
    )
}

pub fn experiment(args: ExperimentArgs) -> CliResult<()> {
    let args = overlay(args.clone(), args.common.config.as_deref())?;
    let text = fs::read_to_string(&args.plan)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", args.plan.display())))?;
    let mut plan = ExperimentPlan::from_json(&text)?;
    let mut seed_source = "plan";
    if let Some(s) = env_seed()? {
        plan.master_seed = s;
        seed_source = "env";
    }
    if let Some(threads) = args.parallel {
        plan.parallelism = threads;
    }
    plan.validate()?;
    prepare_out(&args.common.out)?;

    let records = run_plan(&plan)?;
    emit_csv(&records, args.common.out.join("records.csv"))?;
    let mut summary = String::from("n,g,metric,mean,stderr,count\n");
    for row in summarize(&records) {
        let _ = writeln!(summary, "{},{},{},{},{},{}", row.n, row.g, row.metric, row.mean, row.stderr, row.count);
    }
    fs::write(args.common.out.join("summary.csv"), summary)?;
    // Thread count cannot change the records, so it stays out of the metadata
    // and reruns at any parallelism give identical files.
    let mut plan_json: Value = serde_json::from_str(&plan.to_json())?;
    if let Value::Object(map) = &mut plan_json {
        map.remove("parallelism");
    }
    let mut config = serde_json::to_value(&args)?;
    if let Value::Object(map) = &mut config {
        map.remove("parallel");
    }
    write_meta(
        &args.common.out,
        &Meta {
            command: "experiment",
            version: env!("CARGO_PKG_VERSION"),
            config,
            seed_source,
            sketch: None,
            generator: None,
            results: json!({
                "plan": plan_json,
                "records": records.len(),
                "failed": records.iter().filter(|r| r.failed()).count(),
            }),
        },
    )
}
