use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use dsenlg_cli::config::CsvOptions;
use dsenlg_cli::{datasets, ExperimentConfig, Method, Overrides};

#[derive(Parser)]
#[command(name = "dsenlg", version, about = "Imbalanced ensemble experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Repeated stratified cross-validation over datasets and methods.
    Run {
        /// TOML experiment file; its values win over the flags below.
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Dataset files or directories.
        #[arg(short, long = "dataset")]
        datasets: Vec<PathBuf>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// full, mifcm or none; repeat for several.
        #[arg(short, long = "method")]
        methods: Vec<Method>,
        #[arg(long)]
        threads: Option<usize>,
        /// Neighbours for both the envelope and the alignment graph.
        #[arg(long)]
        neighbors: Option<usize>,
        #[arg(long)]
        layers: Option<usize>,
    },
    /// Average ranks, Friedman test and Holm comparisons against a control.
    Stats {
        /// Experiment directory written by `run`.
        dir: PathBuf,
        #[arg(long)]
        control: Option<Method>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Pairwise Cohen's kappa between the member classifiers.
    Kappa {
        dir: PathBuf,
        #[arg(long)]
        dataset: String,
        #[arg(long, default_value = "full")]
        method: Method,
    },
    /// Sample counts and imbalance ratio of each dataset.
    ListDatasets {
        paths: Vec<PathBuf>,
        #[arg(long, default_value = "class")]
        label_column: String,
        #[arg(long, default_value = "positive")]
        minority_label: String,
    },
    /// Check a config file and the datasets it names without running.
    ValidateConfig { path: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<ExitCode> {
    match cmd {
        Command::Run { config, datasets, folds, repeats, seed, output, methods, threads, neighbors, layers } => {
            let flags = Overrides { datasets, folds, repeats, seed, output, methods, threads, neighbors, layers };
            let cfg = ExperimentConfig::resolve(config.as_deref(), &flags)?;
            let report = dsenlg_cli::run(&cfg)?;
            println!("{}", report.dir.display());
            let failed = report.failed();
            if failed > 0 {
                eprintln!("{failed} of {} runs failed; see runs.csv", report.records.len());
                return Ok(ExitCode::from(1));
            }
        }
        Command::Stats { dir, control, alpha } => {
            let tests = dsenlg_cli::stats(&dir, control, alpha).with_context(|| format!("stats for {}", dir.display()))?;
            for t in &tests {
                let ranks: Vec<String> =
                    t.methods.iter().zip(&t.average_ranks).map(|(m, r)| format!("{m} {r:.3}")).collect();
                println!(
                    "{:4} ranks [{}]  friedman {:.4} p={:.4e}",
                    t.metric.name(),
                    ranks.join(", "),
                    t.friedman_statistic,
                    t.friedman_p
                );
                for c in &t.comparisons {
                    println!(
                        "     {} vs {}: z={:.4} p={:.4e} holm<{:.4} {}",
                        t.control,
                        c.method,
                        c.z,
                        c.p_value,
                        c.threshold,
                        if c.reject { "reject" } else { "keep" }
                    );
                }
            }
        }
        Command::Kappa { dir, dataset, method } => {
            let rows = dsenlg_cli::kappa_report(&dir, &dataset, method)?;
            let mean = rows.iter().map(|r| r.kappa).sum::<f64>() / rows.len() as f64;
            println!("{} pairs, mean kappa {mean:.4}", rows.len());
            println!("{}", dsenlg_cli::kappa::report_path(&dir, &dataset, method).display());
        }
        Command::ListDatasets { paths, label_column, minority_label } => {
            let csv = CsvOptions { label_column, minority_label, ..Default::default() };
            println!("name,samples,features,minority,majority,imbalance_ratio");
            for s in datasets::list(&paths, &csv)? {
                println!("{},{},{},{},{},{:.2}", s.name, s.samples, s.features, s.minority, s.majority, s.imbalance_ratio);
            }
        }
        Command::ValidateConfig { path } => {
            let cfg = dsenlg_cli::validate_config(&path)?;
            println!("ok: {} datasets, {} methods, {}", datasets::expand(&cfg.datasets)?.len(), cfg.methods.len(), cfg.experiment_dir().display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
