use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dsenlg::eval::{cohen_kappa, confusion, metrics, MetricSet};
use serde::Serialize;

use crate::config::Method;
use crate::error::{CliError, Result};
use crate::runner::{decode, field, read_json, write_text, FoldPredictions, PREDICTIONS_JSON};

/// Agreement of one classifier pair on one test fold, with the pair's mean
/// scores: the coordinates of a kappa-error diagram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaRow {
    pub repeat: usize,
    pub fold: usize,
    pub first: usize,
    pub second: usize,
    pub kappa: f64,
    pub auc: f64,
    pub f_measure: f64,
    pub g_mean: f64,
    pub mcc: f64,
}

/// Every unordered classifier pair of every stored fold.
pub fn pairs(folds: &[&FoldPredictions]) -> Result<Vec<KappaRow>> {
    let mut out = Vec::new();
    for f in folds {
        let truth = decode(&f.truth)?;
        let preds = f.classifiers.iter().map(|c| decode(c)).collect::<Result<Vec<_>>>()?;
        let scores: Vec<MetricSet> =
            preds.iter().map(|p| Ok(metrics(&confusion(&truth, p)?))).collect::<Result<Vec<_>>>()?;
        for i in 0..preds.len() {
            for j in i + 1..preds.len() {
                let (a, b) = (&scores[i], &scores[j]);
                out.push(KappaRow {
                    repeat: f.repeat,
                    fold: f.fold,
                    first: i,
                    second: j,
                    kappa: cohen_kappa(&preds[i], &preds[j])?,
                    auc: (a.auc + b.auc) / 2.0,
                    f_measure: (a.f_measure + b.f_measure) / 2.0,
                    g_mean: (a.g_mean + b.g_mean) / 2.0,
                    mcc: (a.mcc + b.mcc) / 2.0,
                });
            }
        }
    }
    Ok(out)
}

pub fn kappa_csv(rows: &[KappaRow]) -> String {
    let mut out = String::from("repeat,fold,first,second,kappa,auc,f_measure,g_mean,mcc\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.repeat, r.fold, r.first, r.second, r.kappa, r.auc, r.f_measure, r.g_mean, r.mcc
        );
    }
    out
}

pub fn report_path(dir: &Path, dataset: &str, method: Method) -> PathBuf {
    let tag: String = method.tag().chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    dir.join(format!("kappa_{dataset}_{tag}.csv"))
}

/// Pairwise kappa for one (dataset, method) of a finished run, written to
/// `kappa_<dataset>_<method>.csv` in the experiment directory.
pub fn kappa_report(dir: &Path, dataset: &str, method: Method) -> Result<Vec<KappaRow>> {
    let all: Vec<FoldPredictions> = read_json(&dir.join(PREDICTIONS_JSON))?;
    let folds: Vec<&FoldPredictions> = all.iter().filter(|p| p.dataset == dataset && p.method == method).collect();
    if folds.is_empty() {
        return Err(CliError::Stats(format!("no stored predictions for {method} on {}", field(dataset))));
    }
    let rows = pairs(&folds)?;
    write_text(&report_path(dir, dataset, method), &kappa_csv(&rows))?;
    Ok(rows)
}
