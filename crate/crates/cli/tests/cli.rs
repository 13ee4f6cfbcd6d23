use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_rsvdlab");

fn plans_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("plans")
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("RSVDLAB_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn rsvdlab")
}

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn meta(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("meta.json")).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_mm(path: &Path, rows: usize, cols: usize, entries: &[(usize, usize, f64)]) {
    let mut text = format!("%%MatrixMarket matrix coordinate real general\n{rows} {cols} {}\n", entries.len());
    for (i, j, v) in entries {
        text.push_str(&format!("{} {} {v}\n", i + 1, j + 1));
    }
    fs::write(path, text).unwrap();
}

/// Every file of `dir`, by name.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn two_cliques(path: &Path, half: usize) {
    let n = 2 * half;
    let entries: Vec<_> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i / half == j / half)
        .map(|(i, j)| (i, j, 1.0))
        .collect();
    write_mm(path, n, n, &entries);
}

#[test]
fn svd_of_diagonal_reports_its_values() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d.mm");
    write_mm(&input, 3, 3, &[(0, 0, 5.0), (1, 1, 4.0)]);
    let out = dir.path().join("out");
    ok(&["svd", s(&input), "--k", "2", "--out", s(&out)]);
    let sigma: Vec<f64> = fs::read_to_string(out.join("sigma.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(sigma.len(), 2);
    assert!((sigma[0] - 5.0).abs() < 1e-12 && (sigma[1] - 4.0).abs() < 1e-12, "{sigma:?}");
    assert!(out.join("U.mm").exists());
    let m = meta(&out);
    assert_eq!(m["sketch"]["k"], 2);
    assert_eq!(m["config"]["seed"], 0);
}

#[test]
fn svd_sym_rejects_asymmetric_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.mm");
    write_mm(&input, 3, 3, &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0), (2, 2, 1.0)]);
    let out = dir.path().join("out");
    assert_eq!(code(&run(&["svd", s(&input), "--k", "1", "--sym", "--out", s(&out)])), 2);
    ok(&["svd", s(&input), "--k", "1", "--asym", "--out", s(&out)]);
}

#[test]
fn svd_asym_handles_rectangular_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    ok(&["svd", "--gen", "pca:d=30,m=60,k=2", "--asym", "--k", "2", "--out", s(&out)]);
    let u = fs::read_to_string(out.join("U.mm")).unwrap();
    assert!(u.lines().nth(1).unwrap() == "30 2");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = |out: &Path| {
        vec!["svd", "--gen", "sbm:n=120", "--k", "2", "--g", "3", "--seed", "9", "--out"]
            .into_iter()
            .map(String::from)
            .chain([s(out).to_string()])
            .collect::<Vec<_>>()
    };
    for out in [&a, &b] {
        let argv = args(out);
        ok(&argv.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    assert_eq!(sa.len(), 3);
    // only the output path inside meta.json differs
    for ((na, fa), (nb, fb)) in sa.iter().zip(&sb) {
        assert_eq!(na, nb);
        if na == "meta.json" {
            let strip = |v: &[u8]| String::from_utf8_lossy(v).replace(s(&a), "").replace(s(&b), "");
            assert_eq!(strip(fa), strip(fb));
        } else {
            assert_eq!(fa, fb, "{na}");
        }
    }
}

#[test]
fn env_seed_and_config_override_flags() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["svd", "--gen", "sbm:n=80", "--k", "2", "--seed", "1", "--out"];
    let flag = dir.path().join("flag");
    let env = dir.path().join("env");
    ok(&[&base[..], &[s(&flag)]].concat());
    let out = run_env(&[&base[..], &[s(&env)]].concat(), &[("RSVDLAB_SEED", "77")]);
    assert_eq!(code(&out), 0);
    let (mf, me) = (meta(&flag), meta(&env));
    assert_eq!((mf["config"]["seed"].as_u64(), mf["seed_source"].as_str()), (Some(1), Some("flag")));
    assert_eq!((me["config"]["seed"].as_u64(), me["seed_source"].as_str()), (Some(77), Some("env")));
    assert_ne!(fs::read(flag.join("U.mm")).unwrap(), fs::read(env.join("U.mm")).unwrap());

    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"g": 4, "ktilde": 6}"#).unwrap();
    let conf = dir.path().join("conf");
    ok(&[&base[..], &[s(&conf), "--config", s(&cfg)]].concat());
    let mc = meta(&conf);
    assert_eq!((mc["sketch"]["g"].as_u64(), mc["sketch"]["k_tilde"].as_u64()), (Some(4), Some(6)));

    fs::write(&cfg, r#"{"gee": 4}"#).unwrap();
    assert_eq!(code(&run(&[&base[..], &[s(&conf), "--config", s(&cfg)]].concat())), 2);
    let bad = run_env(&[&base[..], &[s(&env)]].concat(), &[("RSVDLAB_SEED", "x")]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn exit_codes_distinguish_usage_and_numerical_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let zero = dir.path().join("z.mm");
    write_mm(&zero, 6, 6, &[]);
    assert_eq!(code(&run(&["svd", s(&zero), "--k", "1", "--out", s(&out)])), 1);
    let missing = dir.path().join("missing.mm");
    assert_eq!(code(&run(&["svd", s(&missing), "--k", "1", "--out", s(&out)])), 2);
    assert_eq!(code(&run(&["svd", "--k", "1", "--out", s(&out)])), 2);
    assert_eq!(code(&run(&["svd", "--gen", "nope:n=3", "--k", "1", "--out", s(&out)])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
}

#[test]
fn cluster_splits_two_cliques() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("g.mm");
    two_cliques(&input, 15);
    let truth = dir.path().join("truth.txt");
    fs::write(&truth, (0..30).map(|i| format!("{}\n", i / 15)).collect::<String>()).unwrap();
    let out = dir.path().join("out");
    ok(&["cluster", s(&input), "--K", "2", "--truth", s(&truth), "--out", s(&out)]);
    let labels: Vec<usize> = fs::read_to_string(out.join("labels.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(labels, (0..30).map(|i| i / 15).collect::<Vec<_>>());
    assert_eq!(meta(&out)["results"]["recovery_proportion"], 1.0);
}

#[test]
fn cluster_requires_block_count() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("g.mm");
    two_cliques(&input, 5);
    assert_eq!(code(&run(&["cluster", s(&input), "--out", s(dir.path())])), 2);
}

#[test]
fn cluster_dense_sbm_recovers_nearly_always() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    ok(&[
        "cluster", "--gen", "sbm:n=1000,rho=1", "--K", "2", "--ktilde", "12", "--g", "2", "--reps", "100", "--seed",
        "11", "--out", s(&out),
    ]);
    let m = meta(&out);
    let prop = m["results"]["recovery_proportion"].as_f64().unwrap();
    assert!(prop >= 0.98, "{prop}");
    assert_eq!(fs::read_to_string(out.join("recovery.csv")).unwrap().lines().count(), 101);
}

#[test]
fn complete_noiseless_full_observation_reproduces_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    ok(&[
        "complete", "--gen", "completion:n=60,k=3,p=1,sigma=0", "--p", "1", "--ci", "3,7,0.05", "--out", s(&out),
    ]);
    let m = meta(&out);
    assert!(m["results"]["errors"]["max_err"].as_f64().unwrap() <= 1e-10);
    let ci = fs::read_to_string(out.join("ci.csv")).unwrap();
    assert_eq!(ci.lines().count(), 2);
}

#[test]
fn complete_interval_brackets_the_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    ok(&[
        "complete", "--gen", "completion:n=200,k=3,p=0.6,sigma=0.5", "--g", "4", "--ci", "3,7,0.05", "--ci", "0,0,0.1",
        "--out", s(&out),
    ]);
    let ci = fs::read_to_string(out.join("ci.csv")).unwrap();
    let rows: Vec<Vec<f64>> = ci
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    let (est, lo, hi) = (rows[0][3], rows[0][5], rows[0][6]);
    assert!(lo < est && est < hi, "{lo} {est} {hi}");
    assert_eq!(code(&run(&["complete", "--gen", "completion:n=50", "--ci", "3,7", "--out", s(&out)])), 2);
    assert_eq!(code(&run(&["complete", "--gen", "completion:n=50", "--ci", "3,70,0.05", "--out", s(&out)])), 2);
}

#[test]
fn complete_file_input_needs_rank() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.mm");
    write_mm(&input, 4, 4, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0), (3, 3, 1.0)]);
    assert_eq!(code(&run(&["complete", s(&input), "--out", s(dir.path())])), 2);
    ok(&["complete", s(&input), "--k", "1", "--ktilde", "2", "--out", s(dir.path())]);
}

#[test]
fn complete_edm_matches_exact_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let (rs, ex) = (dir.path().join("rs"), dir.path().join("ex"));
    let base = ["complete", "--gen", "edm:n=300,p=0.8", "--p", "0.8", "--g", "5", "--ktilde", "10", "--out"];
    ok(&[&base[..], &[s(&rs)]].concat());
    ok(&[&base[..], &[s(&ex), "--exact"]].concat());
    let err = |d: &Path| meta(d)["results"]["errors"]["median_rel_err"].as_f64().unwrap();
    let (a, b) = (err(&rs), err(&ex));
    assert!(a <= 2.0 * b, "rs-RSVD {a} vs exact {b}");
    assert_eq!(meta(&ex)["results"]["g"], 0);
}

#[test]
fn pca_full_observation_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    ok(&["pca", "--gen", "pca:d=60,m=3000,k=2,p=1,sigma=0", "--p", "1", "--out", s(&out)]);
    assert!(meta(&out)["results"]["d2"].as_f64().unwrap() <= 0.05);
    let again = dir.path().join("again");
    ok(&["pca", "--gen", "pca:d=60,m=3000,k=2,p=1,sigma=0", "--p", "1", "--out", s(&again)]);
    assert_eq!(fs::read(out.join("U.mm")).unwrap(), fs::read(again.join("U.mm")).unwrap());
}

#[test]
fn pca_g3_is_close_to_exact_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let (rs, ex) = (dir.path().join("rs"), dir.path().join("ex"));
    let base = [
        "pca", "--gen", "pca:d=400,m=1000,k=4,p=0.1,sigma=1", "--p", "0.1", "--ktilde", "14", "--g", "3", "--out",
    ];
    ok(&[&base[..], &[s(&rs)]].concat());
    ok(&[&base[..], &[s(&ex), "--exact"]].concat());
    let d = |dir: &Path| meta(dir)["results"]["d2"].as_f64().unwrap();
    assert!(d(&rs) <= 1.5 * d(&ex), "{} vs {}", d(&rs), d(&ex));
}

#[test]
fn bundled_plans_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    for (name, metric) in [
        ("table_s1_small.json", "exact_recovery"),
        ("rate_fig_s1.json", "d2"),
        ("clt_fig_s2.json", "clt_coverage"),
    ] {
        let out = dir.path().join(name);
        ok(&["experiment", "--plan", s(&plans_dir().join(name)), "--out", s(&out)]);
        let csv = fs::read_to_string(out.join("records.csv")).unwrap();
        assert!(csv.starts_with("kind,n,g,replicate,metric,value\n"));
        assert!(csv.lines().any(|l| l.contains(&format!(",{metric},"))), "{name}");
        assert!(!csv.contains(",failed,"), "{name}");
        assert!(out.join("summary.csv").exists());
        assert_eq!(meta(&out)["results"]["failed"], 0);
    }
}

#[test]
fn experiment_output_ignores_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let plan = plans_dir().join("rate_fig_s1.json");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["experiment", "--plan", s(&plan), "--parallel", "1", "--out", s(&a)]);
    ok(&["experiment", "--plan", s(&plan), "--parallel", "4", "--out", s(&b)]);
    for f in ["records.csv", "summary.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn empty_plan_gives_header_only_and_bad_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("empty.json");
    fs::write(
        &plan,
        r#"{"kind": "rate_regression", "model_params": {"rho": {"c": 1}, "k_tilde": 4},
            "n_grid": [], "g_list": [1], "replicates": 1, "master_seed": 0}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&["experiment", "--plan", s(&plan), "--out", s(&out)]);
    assert_eq!(fs::read_to_string(out.join("records.csv")).unwrap(), "kind,n,g,replicate,metric,value\n");

    fs::write(&plan, "{ not json").unwrap();
    assert_eq!(code(&run(&["experiment", "--plan", s(&plan), "--out", s(&out)])), 2);
    fs::write(&plan, r#"{"kind": "rate_regression"}"#).unwrap();
    assert_eq!(code(&run(&["experiment", "--plan", s(&plan), "--out", s(&out)])), 2);
}
