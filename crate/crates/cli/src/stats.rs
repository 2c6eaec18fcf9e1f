use std::fmt::Write as _;
use std::path::Path;

use dsenlg::eval::{average_ranks, friedman_test, holm_versus_control};
use serde::Serialize;

use crate::config::Method;
use crate::error::{CliError, Result};
use crate::runner::{field, read_json, summarize, write_text, Manifest, Metric, RunRecord, MANIFEST_JSON, RUNS_JSON};

pub const RANKS_CSV: &str = "ranks.csv";
pub const TESTS_CSV: &str = "tests.csv";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricTests {
    pub metric: Metric,
    pub methods: Vec<Method>,
    pub datasets: Vec<String>,
    pub average_ranks: Vec<f64>,
    pub friedman_statistic: f64,
    pub friedman_p: f64,
    pub control: Method,
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub method: Method,
    pub z: f64,
    pub p_value: f64,
    pub threshold: f64,
    pub reject: bool,
}

/// Ranks methods per dataset on each metric (mean over folds), then runs
/// the Friedman test and Holm's step-down against `control`.
pub fn analyze(records: &[RunRecord], methods: &[Method], control: Method, alpha: f64) -> Result<Vec<MetricTests>> {
    if methods.len() < 2 {
        return Err(CliError::Stats("need at least two methods to rank".into()));
    }
    let control_idx = methods
        .iter()
        .position(|m| *m == control)
        .ok_or_else(|| CliError::Stats(format!("control {control} was not run")))?;
    let summary = summarize(records);
    let mut datasets: Vec<String> = summary.iter().map(|r| r.dataset.clone()).collect();
    datasets.sort();
    datasets.dedup();
    if datasets.len() < 2 {
        return Err(CliError::Stats("need at least two datasets for the Friedman test".into()));
    }
    let mut out = Vec::new();
    for metric in Metric::ALL {
        let mut table = vec![vec![0.0; datasets.len()]; methods.len()];
        for (i, m) in methods.iter().enumerate() {
            for (j, d) in datasets.iter().enumerate() {
                let row = summary
                    .iter()
                    .find(|r| r.method == *m && &r.dataset == d)
                    .ok_or_else(|| CliError::Stats(format!("no results for {m} on {d}")))?;
                let v = row.metric(metric).mean;
                if !v.is_finite() {
                    return Err(CliError::Stats(format!("every fold of {m} on {d} failed")));
                }
                table[i][j] = v;
            }
        }
        let ranks = average_ranks(&table, true)?;
        let (stat, p) = friedman_test(&ranks, datasets.len())?;
        let comparisons = holm_versus_control(&ranks, control_idx, datasets.len(), alpha)?
            .into_iter()
            .map(|c| Comparison {
                method: methods[c.method],
                z: c.z,
                p_value: c.p_value,
                threshold: c.holm.threshold,
                reject: c.holm.reject,
            })
            .collect();
        out.push(MetricTests {
            metric,
            methods: methods.to_vec(),
            datasets: datasets.clone(),
            average_ranks: ranks,
            friedman_statistic: stat,
            friedman_p: p,
            control,
            comparisons,
        });
    }
    Ok(out)
}

pub fn ranks_csv(tests: &[MetricTests]) -> String {
    let mut out = String::from("metric,method,average_rank\n");
    for t in tests {
        for (m, r) in t.methods.iter().zip(&t.average_ranks) {
            let _ = writeln!(out, "{},{},{}", t.metric.name(), field(m.tag()), r);
        }
    }
    out
}

pub fn tests_csv(tests: &[MetricTests]) -> String {
    let mut out = String::from("metric,test,method,control,statistic,p_value,threshold,reject\n");
    for t in tests {
        let _ = writeln!(out, "{},friedman,,,{},{},,", t.metric.name(), t.friedman_statistic, t.friedman_p);
        for c in &t.comparisons {
            let _ = writeln!(
                out,
                "{},holm,{},{},{},{},{},{}",
                t.metric.name(),
                field(c.method.tag()),
                field(t.control.tag()),
                c.z,
                c.p_value,
                c.threshold,
                c.reject
            );
        }
    }
    out
}

/// Reads a finished experiment directory and writes `ranks.csv` and
/// `tests.csv` next to the runs. `control` defaults to the full pipeline
/// when it was run, otherwise the first method.
pub fn stats(dir: &Path, control: Option<Method>, alpha: f64) -> Result<Vec<MetricTests>> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST_JSON))?;
    let records: Vec<RunRecord> = read_json(&dir.join(RUNS_JSON))?;
    let methods = manifest.config.methods.clone();
    let control = control.unwrap_or(if methods.contains(&Method::Full) { Method::Full } else { methods[0] });
    let tests = analyze(&records, &methods, control, alpha)?;
    write_text(&dir.join(RANKS_CSV), &ranks_csv(&tests))?;
    write_text(&dir.join(TESTS_CSV), &tests_csv(&tests))?;
    Ok(tests)
}
