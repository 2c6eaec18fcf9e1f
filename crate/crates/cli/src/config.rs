use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dsenlg::ensemble::{AblationMode, PipelineConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// One compared method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Envelope, stacked clustering and alignment.
    Full,
    /// Stacked clustering without alignment.
    Mifcm,
    /// Trees on the raw balanced subsets.
    BaggingNone,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Full, Method::Mifcm, Method::BaggingNone];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Full => "DSEN-LGIE",
            Method::Mifcm => "MIFCM",
            Method::BaggingNone => "Bagging+None",
        }
    }

    pub fn ablation(self) -> AblationMode {
        match self {
            Method::Full => AblationMode::Full,
            Method::Mifcm => AblationMode::MifcmOnly,
            Method::BaggingNone => AblationMode::None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "full" | "dsenlgie" | "proposed" => Ok(Method::Full),
            "mifcm" | "mifcmonly" => Ok(Method::Mifcm),
            "baggingnone" | "none" | "bagging" => Ok(Method::BaggingNone),
            _ => Err(CliError::Config(format!("unknown method {s:?}"))),
        }
    }
}

/// How CSV inputs name their class column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvOptions {
    /// Column name, or a zero-based index written as a number string.
    pub label_column: String,
    pub minority_label: String,
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { label_column: "class".into(), minority_label: "positive".into(), has_header: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Dataset files, or directories scanned for `.dat` and `.csv` files.
    pub datasets: Vec<PathBuf>,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub methods: Vec<Method>,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub csv: CsvOptions,
    pub pipeline: PipelineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            folds: 5,
            repeats: 10,
            seed: 2024,
            output: PathBuf::from("results"),
            methods: Method::ALL.to_vec(),
            threads: 0,
            csv: CsvOptions::default(),
            pipeline: PipelineConfig::default(),
        }
    }
}

/// Values given on the command line; `None` leaves the default in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub datasets: Vec<PathBuf>,
    pub folds: Option<usize>,
    pub repeats: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub methods: Vec<Method>,
    pub threads: Option<usize>,
    pub neighbors: Option<usize>,
    pub layers: Option<usize>,
}

fn merge(base: &mut toml::Value, top: toml::Value) {
    match (base, top) {
        (toml::Value::Table(b), toml::Value::Table(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl ExperimentConfig {
    /// Defaults, then command-line values, then the config file on top.
    pub fn resolve(file: Option<&Path>, flags: &Overrides) -> Result<Self, CliError> {
        let mut cfg = ExperimentConfig::default();
        if !flags.datasets.is_empty() {
            cfg.datasets = flags.datasets.clone();
        }
        if !flags.methods.is_empty() {
            cfg.methods = flags.methods.clone();
        }
        cfg.folds = flags.folds.unwrap_or(cfg.folds);
        cfg.repeats = flags.repeats.unwrap_or(cfg.repeats);
        cfg.seed = flags.seed.unwrap_or(cfg.seed);
        cfg.threads = flags.threads.unwrap_or(cfg.threads);
        if let Some(o) = &flags.output {
            cfg.output = o.clone();
        }
        if let Some(k) = flags.neighbors {
            cfg.pipeline.dsen.neighbors = k;
            cfg.pipeline.lgscm.neighbors = k;
        }
        if let Some(l) = flags.layers {
            cfg.pipeline.dsen.layers = l;
        }
        let Some(path) = file else {
            cfg.validate()?;
            return Ok(cfg);
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        let top: toml::Value = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut base = toml::Value::try_from(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
        merge(&mut base, top);
        let mut cfg: ExperimentConfig = base.try_into().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // Relative dataset paths in a file are relative to that file.
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in &mut cfg.datasets {
            if p.is_relative() && !p.exists() {
                *p = dir.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.folds < 2 {
            return Err(CliError::Config("folds must be >= 2".into()));
        }
        if self.repeats < 1 {
            return Err(CliError::Config("repeats must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(CliError::Config("no methods selected".into()));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(CliError::Config("a method is listed twice".into()));
        }
        for m in &self.methods {
            let mut p = self.pipeline.clone();
            p.ablation = m.ablation();
            p.validate().map_err(|e| CliError::Config(format!("{m}: {e}")))?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form; names the experiment directory.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn experiment_dir(&self) -> PathBuf {
        self.output.join(format!("exp-{}", &self.hash()[..16]))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_parse() {
        for m in Method::ALL {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
        }
        assert_eq!("bagging_none".parse::<Method>().unwrap(), Method::BaggingNone);
        assert!("boost".parse::<Method>().is_err());
    }

    #[test]
    fn file_beats_flags_beats_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(&path, "folds = 3\n[pipeline.dsen]\nlayers = 2\n").unwrap();
        let flags = Overrides { folds: Some(4), repeats: Some(2), layers: Some(5), ..Default::default() };
        let cfg = ExperimentConfig::resolve(Some(&path), &flags).unwrap();
        assert_eq!((cfg.folds, cfg.repeats, cfg.pipeline.dsen.layers), (3, 2, 2));
        assert_eq!(cfg.seed, ExperimentConfig::default().seed);
        assert_eq!(cfg.pipeline.dsen.neighbors, 3);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig { datasets: vec!["a.dat".into()], ..Default::default() };
        let back: ExperimentConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn bad_values_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(&path, "folds = 1\n").unwrap();
        assert!(ExperimentConfig::resolve(Some(&path), &Overrides::default()).is_err());
        std::fs::write(&path, "methods = [\"full\", \"full\"]\n").unwrap();
        assert!(ExperimentConfig::resolve(Some(&path), &Overrides::default()).is_err());
        std::fs::write(&path, "folds = \"five\"\n").unwrap();
        assert!(ExperimentConfig::resolve(Some(&path), &Overrides::default()).is_err());
    }
}
