use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dsenlg::dataset::stratified_splits;
use dsenlg::ensemble::fit;
use dsenlg::eval::{confusion, metrics, Confusion, MetricSet};
use dsenlg::seed::{derive, hash_str};
use dsenlg::{Class, CvSplit, Dataset64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Method};
use crate::datasets::{load_all, DatasetSummary};
use crate::error::{CliError, Result};

pub const RUNS_CSV: &str = "runs.csv";
pub const RUNS_JSON: &str = "runs.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const PREDICTIONS_JSON: &str = "predictions.json";
pub const MANIFEST_JSON: &str = "manifest.json";

/// Outcome of one (dataset, method, repeat, fold) task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub method: Method,
    pub repeat: usize,
    pub fold: usize,
    pub seed: u64,
    pub n_classifiers: usize,
    pub confusion: Option<Confusion>,
    pub metrics: Option<MetricSet>,
    pub error: Option<String>,
    pub wall_seconds: f64,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Test-fold labels as `'1'` (minority) / `'0'` strings, kept so that
/// diversity can be measured after the fact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPredictions {
    pub dataset: String,
    pub method: Method,
    pub repeat: usize,
    pub fold: usize,
    pub test_indices: Vec<usize>,
    pub truth: String,
    pub fused: String,
    pub classifiers: Vec<String>,
}

pub fn encode(labels: &[Class]) -> String {
    labels.iter().map(|c| if c.is_minority() { '1' } else { '0' }).collect()
}

pub fn decode(s: &str) -> Result<Vec<Class>> {
    s.chars()
        .map(|c| match c {
            '1' => Ok(Class::Minority),
            '0' => Ok(Class::Majority),
            other => Err(CliError::Stats(format!("bad label character {other:?}"))),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub datasets: Vec<ManifestDataset>,
    pub model_version: u32,
    pub tool_version: String,
    pub tasks: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestDataset {
    pub name: String,
    pub samples: usize,
    pub features: usize,
    pub minority: usize,
    pub majority: usize,
    pub split_seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub records: Vec<RunRecord>,
    pub predictions: Vec<FoldPredictions>,
}

impl RunReport {
    pub fn failed(&self) -> usize {
        self.records.iter().filter(|r| !r.ok()).count()
    }
}

/// Seed for the CV splits of one dataset; shared by all methods so they
/// see identical folds.
pub fn split_seed(master: u64, dataset: &str) -> u64 {
    derive(master, &[hash_str(dataset)])
}

pub fn task_seed(master: u64, dataset: &str, method: Method, repeat: usize, fold: usize) -> u64 {
    derive(master, &[hash_str(dataset), hash_str(method.tag()), repeat as u64, fold as u64])
}

fn run_task(ds: &Dataset64, split: &CvSplit, method: Method, cfg: &ExperimentConfig) -> (RunRecord, Option<FoldPredictions>) {
    let seed = task_seed(cfg.seed, ds.name(), method, split.repeat_index, split.fold_index);
    let mut record = RunRecord {
        dataset: ds.name().to_string(),
        method,
        repeat: split.repeat_index,
        fold: split.fold_index,
        seed,
        n_classifiers: 0,
        confusion: None,
        metrics: None,
        error: None,
        wall_seconds: 0.0,
    };
    let start = Instant::now();
    let mut pipeline = cfg.pipeline.clone();
    pipeline.ablation = method.ablation();
    let outcome = (|| -> dsenlg::Result<_> {
        let train = ds.subset(&split.train_indices)?;
        let test = ds.subset(&split.test_indices)?;
        let model = fit(&train, &pipeline, seed)?;
        let pred = model.predict(test.features())?;
        let conf = confusion(test.labels(), &pred.labels)?;
        Ok((test, pred, conf))
    })();
    record.wall_seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok((test, pred, conf)) => {
            record.n_classifiers = pred.per_classifier.len();
            record.confusion = Some(conf);
            record.metrics = Some(metrics(&conf));
            let fp = FoldPredictions {
                dataset: record.dataset.clone(),
                method,
                repeat: record.repeat,
                fold: record.fold,
                test_indices: split.test_indices.clone(),
                truth: encode(test.labels()),
                fused: encode(&pred.labels),
                classifiers: pred.per_classifier.iter().map(|c| encode(c)).collect(),
            };
            (record, Some(fp))
        }
        Err(e) => {
            log::warn!("{} {} r{} f{} failed: {e}", record.dataset, method, record.repeat, record.fold);
            record.error = Some(e.to_string());
            (record, None)
        }
    }
}

/// Runs every (dataset, method, repeat, fold) task and returns the records
/// in that order, whatever the thread count.
pub fn execute(cfg: &ExperimentConfig, datasets: &[Dataset64]) -> Result<(Vec<RunRecord>, Vec<FoldPredictions>)> {
    let mut tasks = Vec::new();
    for ds in datasets {
        let splits = stratified_splits(ds, cfg.folds, cfg.repeats, split_seed(cfg.seed, ds.name()))
            .map_err(|e| CliError::Config(format!("{}: {e}", ds.name())))?;
        for &m in &cfg.methods {
            for s in &splits {
                tasks.push((ds, s.clone(), m));
            }
        }
    }
    let work = || {
        tasks
            .par_iter()
            .map(|(ds, split, m)| run_task(ds, split, *m, cfg))
            .collect::<Vec<_>>()
    };
    let results = if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(work)
    } else {
        work()
    };
    let mut records = Vec::with_capacity(results.len());
    let mut preds = Vec::new();
    for (r, p) in results {
        records.push(r);
        preds.extend(p);
    }
    Ok((records, preds))
}

/// Loads the data, runs all tasks and writes the experiment directory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let datasets = load_all(&cfg.datasets, &cfg.csv)?;
    let started = Instant::now();
    let (records, predictions) = execute(cfg, &datasets)?;
    log::info!("{} tasks in {:.1}s", records.len(), started.elapsed().as_secs_f64());
    let dir = cfg.experiment_dir();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(dir.clone(), e))?;
    let manifest = Manifest {
        config_hash: cfg.hash(),
        config: cfg.clone(),
        datasets: datasets
            .iter()
            .map(|d| {
                let s = DatasetSummary::of(d);
                ManifestDataset {
                    name: s.name,
                    samples: s.samples,
                    features: s.features,
                    minority: s.minority,
                    majority: s.majority,
                    split_seed: split_seed(cfg.seed, d.name()),
                }
            })
            .collect(),
        model_version: dsenlg::ensemble::MODEL_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        tasks: records.len(),
        failed: records.iter().filter(|r| !r.ok()).count(),
    };
    write_json(&dir.join(MANIFEST_JSON), &manifest)?;
    write_json(&dir.join(RUNS_JSON), &records)?;
    write_json(&dir.join(PREDICTIONS_JSON), &predictions)?;
    write_text(&dir.join(RUNS_CSV), &runs_csv(&records))?;
    write_text(&dir.join(SUMMARY_CSV), &summary_csv(&summarize(&records)))?;
    Ok(RunReport { dir, records, predictions })
}

pub(crate) fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Json(path.to_path_buf(), e))?;
    write_text(path, &text)
}

pub(crate) fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Json(path.to_path_buf(), e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

/// Quotes a CSV field only when it needs it.
pub(crate) fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Per-run table without wall time, so reruns compare byte for byte.
pub fn runs_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("dataset,method,repeat,fold,seed,classifiers,tp,fp,tn,fn,auc,f_measure,g_mean,mcc,sen,spe,pre,status\n");
    for r in records {
        let _ = write!(out, "{},{},{},{},{},{},", field(&r.dataset), field(r.method.tag()), r.repeat, r.fold, r.seed, r.n_classifiers);
        match (&r.confusion, &r.metrics) {
            (Some(c), Some(m)) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},ok",
                    c.tp, c.fp, c.tn, c.fn_, m.auc, m.f_measure, m.g_mean, m.mcc, m.sen, m.spe, m.pre
                );
            }
            _ => {
                let msg = r.error.as_deref().unwrap_or("failed");
                let _ = writeln!(out, ",,,,,,,,,,,{}", field(&format!("failed: {msg}")));
            }
        }
    }
    out
}

/// Mean and sample standard deviation of one metric over the folds of a
/// (dataset, method) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub method: Method,
    pub runs: usize,
    pub failed: usize,
    pub auc: Stat,
    pub f_measure: Stat,
    pub g_mean: Stat,
    pub mcc: Stat,
}

impl SummaryRow {
    pub fn metric(&self, name: Metric) -> Stat {
        match name {
            Metric::Auc => self.auc,
            Metric::FMeasure => self.f_measure,
            Metric::GMean => self.g_mean,
            Metric::Mcc => self.mcc,
        }
    }
}

/// The four headline metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Auc,
    FMeasure,
    GMean,
    Mcc,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Auc, Metric::FMeasure, Metric::GMean, Metric::Mcc];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Auc => "AUC",
            Metric::FMeasure => "F-M",
            Metric::GMean => "G-M",
            Metric::Mcc => "Mcc",
        }
    }

    pub fn of(self, m: &MetricSet) -> f64 {
        match self {
            Metric::Auc => m.auc,
            Metric::FMeasure => m.f_measure,
            Metric::GMean => m.g_mean,
            Metric::Mcc => m.mcc,
        }
    }
}

/// One row per (dataset, method), in first-seen order.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, Method)> = Vec::new();
    for r in records {
        let k = (r.dataset.clone(), r.method);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(dataset, method)| {
            let cell: Vec<&RunRecord> = records.iter().filter(|r| r.dataset == dataset && r.method == method).collect();
            let ok: Vec<&MetricSet> = cell.iter().filter_map(|r| r.metrics.as_ref()).collect();
            let col = |m: Metric| Stat::of(&ok.iter().map(|s| m.of(s)).collect::<Vec<_>>());
            SummaryRow {
                runs: ok.len(),
                failed: cell.len() - ok.len(),
                auc: col(Metric::Auc),
                f_measure: col(Metric::FMeasure),
                g_mean: col(Metric::GMean),
                mcc: col(Metric::Mcc),
                dataset,
                method,
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("dataset,method,runs,failed");
    for m in Metric::ALL {
        let _ = write!(out, ",{0}_mean,{0}_std", m.name());
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{},{},{}", field(&r.dataset), field(r.method.tag()), r.runs, r.failed);
        for m in Metric::ALL {
            let s = r.metric(m);
            let _ = write!(out, ",{},{}", s.mean, s.std);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_strings_round_trip() {
        let v = vec![Class::Minority, Class::Majority, Class::Majority];
        assert_eq!(encode(&v), "100");
        assert_eq!(decode("100").unwrap(), v);
        assert!(decode("12").is_err());
    }

    #[test]
    fn seeds_depend_on_every_coordinate() {
        let base = task_seed(1, "a", Method::Full, 0, 0);
        assert_ne!(base, task_seed(2, "a", Method::Full, 0, 0));
        assert_ne!(base, task_seed(1, "b", Method::Full, 0, 0));
        assert_ne!(base, task_seed(1, "a", Method::Mifcm, 0, 0));
        assert_ne!(base, task_seed(1, "a", Method::Full, 1, 0));
        assert_ne!(base, task_seed(1, "a", Method::Full, 0, 1));
    }

    #[test]
    fn sample_std() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Stat::of(&[7.0]).std, 0.0);
    }

    #[test]
    fn csv_fields_are_quoted_when_needed() {
        assert_eq!(field("plain"), "plain");
        assert_eq!(field("a,b"), "\"a,b\"");
        assert_eq!(field("say \"x\""), "\"say \"\"x\"\"\"");
    }
}
