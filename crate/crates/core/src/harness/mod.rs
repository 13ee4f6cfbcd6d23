//! Seeded Monte-Carlo driver for the simulation studies: rate regressions,
//! exact-recovery tables, CLT ellipse coverage, interval coverage,
//! missing-data PCA sweeps and distance-matrix completion.

mod analysis;
mod plan;
mod run;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{LabError, Result};

pub use analysis::{
    cell_mean, ci_coverage, clt_coverage, ellipse_coverage, mahalanobis_sq, median_slope, proportion, rate_regression,
    slopes_by_replicate, summarize, CoverageSummary, RateFit, SummaryRow,
};
pub use plan::{CiParams, EdmParams, ExperimentPlan, PcaParams, PlanKind, SbmParams, SizeRule, Sparsity};
pub use run::{replicate_stream, run_plan, run_replicate};

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateRecord {
    pub kind: String,
    pub n: usize,
    pub g: usize,
    pub replicate: usize,
    /// A failed replicate carries the single metric `failed = 1`.
    pub metrics: BTreeMap<String, f64>,
    /// Not part of the CSV.
    pub error: Option<String>,
}

impl ReplicateRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

pub const CSV_HEADER: &str = "kind,n,g,replicate,metric,value";

/// One line per metric per record, metrics in name order. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn records_csv(records: &[ReplicateRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        for (name, v) in &r.metrics {
            writeln!(out, "{},{},{},{},{},{}", r.kind, r.n, r.g, r.replicate, name, v).expect("write to string");
        }
    }
    out
}

pub fn emit_csv(records: &[ReplicateRecord], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, records_csv(records))?;
    Ok(())
}

/// Inverse of [`records_csv`]; rows of one record must be adjacent.
pub fn parse_csv(text: &str) -> Result<Vec<ReplicateRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        _ => return Err(LabError::Parse(format!("expected header `{CSV_HEADER}`"))),
    }
    let mut records: Vec<ReplicateRecord> = Vec::new();
    for (no, line) in lines.enumerate() {
        let bad = |what: &str| LabError::Parse(format!("line {}: {what}", no + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad("expected 6 fields"));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad("bad integer"));
        let (n, g, rep) = (int(f[1])?, int(f[2])?, int(f[3])?);
        let value: f64 = f[5].parse().map_err(|_| bad("bad value"))?;
        let same = records
            .last()
            .is_some_and(|r| r.kind == f[0] && r.n == n && r.g == g && r.replicate == rep);
        if !same {
            records.push(ReplicateRecord {
                kind: f[0].to_string(),
                n,
                g,
                replicate: rep,
                metrics: BTreeMap::new(),
                error: None,
            });
        }
        let last = records.last_mut().expect("just pushed");
        last.metrics.insert(f[4].to_string(), value);
        if f[4] == "failed" {
            last.error = Some("failed".into());
        }
    }
    Ok(records)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<ReplicateRecord>> {
    parse_csv(&std::fs::read_to_string(path)?)
}
