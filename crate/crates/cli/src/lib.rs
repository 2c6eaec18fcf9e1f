//! Experiment runner around `dsenlg`: repeated stratified cross-validation
//! over datasets and ablations, per-fold records, summary tables, rank
//! statistics and pairwise classifier agreement.

pub mod config;
pub mod datasets;
pub mod error;
pub mod kappa;
pub mod runner;
pub mod stats;

pub use config::{ExperimentConfig, Method, Overrides};
pub use error::{CliError, Result};
pub use kappa::{kappa_report, KappaRow};
pub use runner::{run, RunRecord, RunReport};
pub use stats::{stats, MetricTests};

use std::path::Path;

/// Parses and checks a config file, loading every dataset it names.
/// Returns the resolved config.
pub fn validate_config(path: &Path) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::resolve(Some(path), &Overrides::default())?;
    let sets = datasets::load_all(&cfg.datasets, &cfg.csv)?;
    for ds in &sets {
        if ds.n_minority() < cfg.folds {
            return Err(CliError::Config(format!(
                "{} has {} minority samples, fewer than {} folds",
                ds.name(),
                ds.n_minority(),
                cfg.folds
            )));
        }
    }
    Ok(cfg)
}
