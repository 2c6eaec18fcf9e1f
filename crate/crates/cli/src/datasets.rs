use std::path::{Path, PathBuf};

use dsenlg::dataset::{load_csv, load_keel, LabelColumn};
use dsenlg::Dataset64;
use serde::Serialize;

use crate::config::CsvOptions;
use crate::error::{CliError, Result};

fn is_data_file(p: &Path) -> bool {
    matches!(p.extension().and_then(|e| e.to_str()), Some("dat" | "csv"))
}

/// Files as given, directories replaced by their `.dat`/`.csv` entries in
/// name order.
pub fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| CliError::Io(p.clone(), e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|e| e.is_file() && is_data_file(e))
                .collect();
            entries.sort();
            out.extend(entries);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(CliError::Io(p.clone(), std::io::Error::from(std::io::ErrorKind::NotFound)));
        }
    }
    Ok(out)
}

pub fn load(path: &Path, csv: &CsvOptions) -> Result<Dataset64> {
    let loaded = if path.extension().and_then(|e| e.to_str()) == Some("csv") {
        let column = match csv.label_column.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(csv.label_column.clone()),
        };
        load_csv(path, &column, &csv.minority_label, csv.has_header)
    } else {
        load_keel(path)
    };
    loaded.map_err(|e| CliError::Dataset(path.to_path_buf(), e))
}

/// Loads everything up front so that a bad file stops the run before any
/// work starts. Names must be unique since they key the results.
pub fn load_all(paths: &[PathBuf], csv: &CsvOptions) -> Result<Vec<Dataset64>> {
    let files = expand(paths)?;
    if files.is_empty() {
        return Err(CliError::Config("no datasets given".into()));
    }
    let sets = files.iter().map(|p| load(p, csv)).collect::<Result<Vec<_>>>()?;
    let mut names: Vec<&str> = sets.iter().map(|d| d.name()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::Config(format!("dataset name {:?} appears twice", w[0])));
    }
    Ok(sets)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub name: String,
    pub samples: usize,
    pub features: usize,
    pub minority: usize,
    pub majority: usize,
    pub imbalance_ratio: f64,
}

impl DatasetSummary {
    pub fn of(ds: &Dataset64) -> Self {
        Self {
            name: ds.name().to_string(),
            samples: ds.n_samples(),
            features: ds.n_features(),
            minority: ds.n_minority(),
            majority: ds.n_majority(),
            imbalance_ratio: ds.imbalance_ratio(),
        }
    }
}

pub fn list(paths: &[PathBuf], csv: &CsvOptions) -> Result<Vec<DatasetSummary>> {
    Ok(load_all(paths, csv)?.iter().map(DatasetSummary::of).collect())
}
