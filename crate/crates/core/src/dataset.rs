//! Binary imbalanced datasets: KEEL / CSV ingestion, imbalance ratio,
//! repeated stratified cross-validation and train-fold standardization.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Class {
    Minority,
    Majority,
}

impl Class {
    pub fn is_minority(self) -> bool {
        self == Class::Minority
    }
}

/// Feature matrix (rows = samples) with minority/majority labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Dataset<T: Real> {
    name: String,
    features: DMatrix<T>,
    labels: Vec<Class>,
    feature_names: Vec<String>,
    minority_label: String,
    majority_label: String,
}

impl<T: Real> Dataset<T> {
    pub fn new(
        name: impl Into<String>,
        features: DMatrix<T>,
        labels: Vec<Class>,
        feature_names: Vec<String>,
        minority_label: impl Into<String>,
        majority_label: impl Into<String>,
    ) -> Result<Self> {
        let (n, s) = features.shape();
        if n < 2 || s < 1 {
            return Err(Error::InvalidDataset(format!("need n >= 2 and s >= 1, got {n} x {s}")));
        }
        if labels.len() != n {
            return Err(Error::Shape(format!("{} labels for {n} rows", labels.len())));
        }
        if feature_names.len() != s {
            return Err(Error::Shape(format!("{} feature names for {s} columns", feature_names.len())));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!("non-finite feature value in row {}", pos % n)));
        }
        let n2 = labels.iter().filter(|c| c.is_minority()).count();
        let n1 = n - n2;
        if n2 == 0 || n1 == 0 {
            return Err(Error::InvalidDataset("both classes must be present".into()));
        }
        if n1 < n2 {
            return Err(Error::InvalidDataset(format!("minority class has {n2} samples, majority only {n1}")));
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            feature_names,
            minority_label: minority_label.into(),
            majority_label: majority_label.into(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> &DMatrix<T> {
        &self.features
    }

    pub fn labels(&self) -> &[Class] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn minority_label(&self) -> &str {
        &self.minority_label
    }

    pub fn majority_label(&self) -> &str {
        &self.majority_label
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_minority(&self) -> usize {
        self.labels.iter().filter(|c| c.is_minority()).count()
    }

    pub fn n_majority(&self) -> usize {
        self.n_samples() - self.n_minority()
    }

    pub fn minority_indices(&self) -> Vec<usize> {
        class_indices(&self.labels, Class::Minority)
    }

    pub fn majority_indices(&self) -> Vec<usize> {
        class_indices(&self.labels, Class::Majority)
    }

    /// Majority count over minority count (n₁ / n₂).
    pub fn imbalance_ratio(&self) -> f64 {
        self.n_majority() as f64 / self.n_minority() as f64
    }

    /// Rows `indices`, in that order, as a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.features.select_rows(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.feature_names.clone(),
            self.minority_label.clone(),
            self.majority_label.clone(),
        )
    }

    /// Serializes in KEEL `.dat` form with the original class labels.
    pub fn to_keel_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "@relation {}", self.name);
        for (j, f) in self.feature_names.iter().enumerate() {
            let col = self.features.column(j);
            let lo = col.iter().copied().fold(col[0], |a, b| a.min(b));
            let hi = col.iter().copied().fold(col[0], |a, b| a.max(b));
            let _ = writeln!(out, "@attribute {f} real [{lo}, {hi}]");
        }
        let _ = writeln!(out, "@attribute Class {{{}, {}}}", self.minority_label, self.majority_label);
        let inputs = self.feature_names.join(", ");
        let _ = writeln!(out, "@inputs {inputs}");
        let _ = writeln!(out, "@outputs Class");
        let _ = writeln!(out, "@data");
        for (i, row) in self.features.row_iter().enumerate() {
            for v in row.iter() {
                let _ = write!(out, "{v}, ");
            }
            let label = if self.labels[i].is_minority() { &self.minority_label } else { &self.majority_label };
            let _ = writeln!(out, "{label}");
        }
        out
    }
}

/// Standalone form of [`Dataset::imbalance_ratio`].
pub fn imbalance_ratio<T: Real>(ds: &Dataset<T>) -> f64 {
    ds.imbalance_ratio()
}

fn class_indices(labels: &[Class], class: Class) -> Vec<usize> {
    labels.iter().enumerate().filter(|(_, &c)| c == class).map(|(i, _)| i).collect()
}

/// Picks the rarer label as minority; equal counts go to the lexicographically smaller label.
fn assign_classes(raw: &[String]) -> Result<(String, String, Vec<Class>)> {
    let mut distinct: Vec<&String> = raw.iter().collect();
    distinct.sort();
    distinct.dedup();
    if distinct.len() != 2 {
        return Err(Error::InvalidDataset(format!(
            "expected exactly two class values, found {}",
            distinct.len()
        )));
    }
    let count = |l: &String| raw.iter().filter(|r| *r == l).count();
    let (a, b) = (distinct[0].clone(), distinct[1].clone());
    let (minority, majority) = if count(&b) < count(&a) { (b, a) } else { (a, b) };
    let labels = raw.iter().map(|l| if *l == minority { Class::Minority } else { Class::Majority }).collect();
    Ok((minority, majority, labels))
}

fn parse_value<T: Real>(tok: &str) -> Option<T> {
    tok.trim().parse::<f64>().ok().filter(|v| v.is_finite()).map(lit)
}

/// Reads a KEEL `.dat` file. The class attribute is the one named in
/// `@outputs`, or the last `@attribute` when no `@outputs` line exists.
pub fn load_keel<T: Real>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let parse_err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };

    let mut name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut attributes: Vec<String> = Vec::new();
    let mut output: Option<String> = None;
    let mut in_data = false;
    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut label_col = 0usize;

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if !in_data {
            let lower = line.to_ascii_lowercase();
            if lower.starts_with("@relation") {
                name = line[9..].trim().to_string();
            } else if lower.starts_with("@attribute") {
                let rest = line[10..].trim();
                let attr = rest
                    .split(|c: char| c.is_whitespace() || c == '{')
                    .next()
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| parse_err(lineno, "attribute without a name".into()))?;
                attributes.push(attr.to_string());
            } else if lower.starts_with("@outputs") || lower.starts_with("@output") {
                let rest = line.split_once(char::is_whitespace).map(|x| x.1).unwrap_or("").trim();
                output = Some(rest.to_string());
            } else if lower.starts_with("@inputs") || lower.starts_with("@input") {
            } else if lower.starts_with("@data") {
                if attributes.len() < 2 {
                    return Err(parse_err(lineno, "need at least one feature and a class attribute".into()));
                }
                label_col = match &output {
                    Some(o) => attributes
                        .iter()
                        .position(|a| a == o)
                        .ok_or_else(|| parse_err(lineno, format!("@outputs names unknown attribute {o}")))?,
                    None => attributes.len() - 1,
                };
                in_data = true;
            } else if line.starts_with('@') {
                return Err(parse_err(lineno, format!("unknown header directive: {line}")));
            } else {
                return Err(parse_err(lineno, "data before @data".into()));
            }
            continue;
        }

        let toks: Vec<&str> = line.split(',').map(str::trim).collect();
        if toks.len() != attributes.len() {
            return Err(parse_err(lineno, format!("expected {} fields, got {}", attributes.len(), toks.len())));
        }
        let row_idx = rows.len();
        if toks.iter().any(|t| *t == "?" || t.is_empty()) {
            return Err(Error::MissingValue { path: path.to_path_buf(), row: row_idx, line: lineno });
        }
        let mut feats = Vec::with_capacity(toks.len() - 1);
        for (j, tok) in toks.iter().enumerate() {
            if j == label_col {
                continue;
            }
            let v = parse_value(tok).ok_or_else(|| parse_err(lineno, format!("non-numeric value {tok:?}")))?;
            feats.push(v);
        }
        rows.push(feats);
        raw_labels.push(toks[label_col].to_string());
    }
    if !in_data {
        return Err(parse_err(text.lines().count(), "missing @data section".into()));
    }
    if rows.is_empty() {
        return Err(Error::InvalidDataset("no data rows".into()));
    }

    let (minority, majority, labels) = assign_classes(&raw_labels)?;
    let feature_names: Vec<String> =
        attributes.iter().enumerate().filter(|(j, _)| *j != label_col).map(|(_, a)| a.clone()).collect();
    let s = feature_names.len();
    let features = DMatrix::from_fn(rows.len(), s, |i, j| rows[i][j]);
    Dataset::new(name, features, labels, feature_names, minority, majority)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

/// Reads a CSV file. A named label column requires a header row; with an
/// index the file may be headerless.
pub fn load_csv<T: Real>(
    path: impl AsRef<Path>,
    label_column: &LabelColumn,
    minority_label: &str,
    has_header: bool,
) -> Result<Dataset<T>> {
    let path = path.as_ref();
    if matches!(label_column, LabelColumn::Name(_)) && !has_header {
        return Err(Error::InvalidArgument("label column given by name requires a header row".into()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(has_header).trim(csv::Trim::All).from_path(path)?;
    let header: Option<Vec<String>> =
        if has_header { Some(reader.headers()?.iter().map(str::to_string).collect()) } else { None };

    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut width = None;
    let mut label_idx = None;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let line = r + 1 + usize::from(has_header);
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Parse { path: path.to_path_buf(), line, msg: format!("expected {w} fields") });
        }
        let li = match label_idx {
            Some(li) => li,
            None => {
                let li = match label_column {
                    LabelColumn::Index(i) if *i < w => *i,
                    LabelColumn::Index(i) => {
                        return Err(Error::InvalidArgument(format!("label column {i} out of range ({w} columns)")))
                    }
                    LabelColumn::Name(n) => header
                        .as_ref()
                        .and_then(|h| h.iter().position(|c| c == n))
                        .ok_or_else(|| Error::InvalidArgument(format!("unknown label column {n:?}")))?,
                };
                label_idx = Some(li);
                li
            }
        };
        let mut feats = Vec::with_capacity(w - 1);
        for (j, cell) in record.iter().enumerate() {
            if j == li {
                continue;
            }
            if cell == "?" || cell.is_empty() {
                return Err(Error::MissingValue { path: path.to_path_buf(), row: r, line });
            }
            let v = parse_value(cell).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("non-numeric value {cell:?}"),
            })?;
            feats.push(v);
        }
        rows.push(feats);
        raw_labels.push(record[li].to_string());
    }
    let (w, li) = match (width, label_idx) {
        (Some(w), Some(li)) => (w, li),
        _ => return Err(Error::InvalidDataset("no data rows".into())),
    };
    if w < 2 {
        return Err(Error::InvalidDataset("need at least one feature column besides the label".into()));
    }
    if !raw_labels.iter().any(|l| l == minority_label) {
        return Err(Error::InvalidArgument(format!("minority label {minority_label:?} not present")));
    }
    let mut others: Vec<&String> = raw_labels.iter().filter(|l| *l != minority_label).collect();
    others.sort();
    others.dedup();
    if others.len() != 1 {
        return Err(Error::InvalidDataset(format!("expected exactly two class values, found {}", others.len() + 1)));
    }
    let majority = others[0].clone();
    let labels = raw_labels.iter().map(|l| if l == minority_label { Class::Minority } else { Class::Majority }).collect();
    let feature_names = match header {
        Some(h) => h.into_iter().enumerate().filter(|(j, _)| *j != li).map(|(_, c)| c).collect(),
        None => (0..w).filter(|j| *j != li).map(|j| format!("x{j}")).collect(),
    };
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let features = DMatrix::from_fn(rows.len(), w - 1, |i, j| rows[i][j]);
    Dataset::new(name, features, labels, feature_names, minority_label, majority)
}

/// One train/test split of a repeated k-fold protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvSplit {
    pub repeat_index: usize,
    pub fold_index: usize,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// `folds × repeats` stratified splits. Each class is shuffled and dealt
/// round-robin; the majority deal continues where the minority deal stopped
/// so fold sizes also differ by at most one.
pub fn stratified_splits<T: Real>(
    ds: &Dataset<T>,
    folds: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<CvSplit>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("folds must be >= 2, got {folds}")));
    }
    let minority = ds.minority_indices();
    let majority = ds.majority_indices();
    if minority.len() < folds {
        return Err(Error::InvalidArgument(format!(
            "minority class has {} samples, fewer than {folds} folds",
            minority.len()
        )));
    }
    let n = ds.n_samples();
    let mut out = Vec::with_capacity(folds * repeats);
    for rep in 0..repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[rep as u64]));
        let mut fold_of = vec![0usize; n];
        let mut offset = 0usize;
        for class in [&minority, &majority] {
            let mut idx = class.clone();
            idx.shuffle(&mut rng);
            for (k, &i) in idx.iter().enumerate() {
                fold_of[i] = (offset + k) % folds;
            }
            offset = (offset + idx.len()) % folds;
        }
        for f in 0..folds {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| fold_of[i] == f);
            out.push(CvSplit { repeat_index: rep, fold_index: f, train_indices: train, test_indices: test });
        }
    }
    Ok(out)
}

/// Per-feature z-score fitted on training rows. Constant features map to 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Standardizer<T: Real> {
    mean: Vec<T>,
    scale: Vec<T>,
}

impl<T: Real> Standardizer<T> {
    pub fn fit(x: &DMatrix<T>) -> Self {
        let n: T = lit(x.nrows() as f64);
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let m = col.sum() / n;
            let var = col.iter().map(|&v| (v - m) * (v - m)).fold(T::zero(), |a, b| a + b) / n;
            let sd = var.sqrt();
            mean.push(m);
            scale.push(if sd > T::default_epsilon() { sd } else { T::zero() });
        }
        Self { mean, scale }
    }

    pub fn transform(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::Shape(format!("standardizer fitted on {} features, got {}", self.mean.len(), x.ncols())));
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            if self.scale[j] == T::zero() {
                T::zero()
            } else {
                (x[(i, j)] - self.mean[j]) / self.scale[j]
            }
        }))
    }
}
