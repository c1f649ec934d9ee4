use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use uxai::harness::{self, Artifacts, ExperimentConfig};

#[derive(Parser)]
#[command(name = "uxai", version, about = "Uncertainty-aware explanation experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set uncertainty.eknn_k=5`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    runs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (replaces `output_dir`).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// `NAME=PATH[:LABEL]`; replaces the configured dataset list when given.
    #[arg(long = "dataset", value_name = "NAME=PATH", global = true)]
    datasets: Vec<String>,
    /// Only print the config that would be used.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Verb {
    /// Spearman correlation of AU against counterfactual dissimilarity.
    CorrelateCf,
    /// Spearman correlation of AU against SHAP instability, full and after EU rejection.
    CorrelateShap,
    /// Rejection curves and a dossier on the most epistemically uncertain instance.
    RejectDemo,
    /// Route each row of a CSV through the reject / counterfactual / importance protocol.
    Route {
        /// CSV with a header naming the training features.
        instances: PathBuf,
    },
    /// AU/EU over a grid around the two-moons toy data.
    ToyLandscape,
    /// Fit and save the classifier and uncertainty models of the first run.
    Fit,
}

fn split_pair(s: &str) -> anyhow::Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => bail!("expected KEY=VALUE, got {s:?}"),
    }
}

fn load_config(c: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut overrides = c.overrides.iter().map(|s| split_pair(s)).collect::<anyhow::Result<Vec<_>>>()?;
    if let Some(r) = c.runs {
        overrides.push(("runs".into(), r.to_string()));
    }
    if let Some(s) = c.seed {
        overrides.push(("seed".into(), s.to_string()));
    }
    let mut cfg = ExperimentConfig::load(c.config.as_deref(), &overrides)?;
    if let Some(o) = &c.output {
        cfg.output_dir = o.clone();
    }
    if !c.datasets.is_empty() {
        cfg.datasets = c
            .datasets
            .iter()
            .map(|d| {
                let (name, rest) = split_pair(d)?;
                let (path, label) = match rest.rsplit_once(':') {
                    Some((p, l)) if !l.contains(['/', '\\']) && !p.is_empty() => (p.to_string(), l.to_string()),
                    _ => (rest, "class".to_string()),
                };
                Ok(harness::DatasetEntry {
                    name,
                    path: path.into(),
                    label,
                })
            })
            .collect::<anyhow::Result<_>>()?;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn emit(cfg: &ExperimentConfig, artifacts: &Artifacts) -> anyhow::Result<()> {
    let written = artifacts
        .write_all(&cfg.output_dir)
        .with_context(|| format!("writing to {}", cfg.output_dir.display()))?;
    for a in &artifacts.0 {
        if a.path.starts_with("tables") && a.path.extension().is_some_and(|e| e == "txt") {
            println!("{}", a.contents);
        }
    }
    log::info!("wrote {} file(s) under {}", written.len(), cfg.output_dir.display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let cfg = load_config(&cli.common)?;
    if cli.common.print_config {
        print!("{}", cfg.to_canonical_toml());
        return Ok(true);
    }
    log::info!("config {}", cfg.hash());
    let needs_data = !matches!(cli.verb, Verb::ToyLandscape);
    if needs_data && cfg.datasets.is_empty() {
        bail!("no datasets configured; pass --dataset NAME=PATH or list them in the config");
    }
    let ok = match &cli.verb {
        Verb::CorrelateCf | Verb::CorrelateShap => {
            let out = if matches!(cli.verb, Verb::CorrelateCf) {
                harness::correlate_cf(&cfg)?
            } else {
                harness::correlate_shap(&cfg)?
            };
            emit(&cfg, &out.artifacts)?;
            out.all_ok()
        }
        Verb::RejectDemo => {
            let out = harness::reject_demo(&cfg)?;
            emit(&cfg, &out.artifacts)?;
            out.all_ok()
        }
        Verb::Route { instances } => {
            let out = harness::route_instances(&cfg, instances)?;
            emit(&cfg, &out.artifacts)?;
            for r in &out.records {
                println!("{r}");
            }
            out.n_errors == 0
        }
        Verb::ToyLandscape => {
            let out = harness::toy_landscape(&cfg)?;
            emit(&cfg, &out.artifacts)?;
            out.summaries.iter().all(|s| s.is_ok())
        }
        Verb::Fit => {
            let out = harness::fit_models(&cfg)?;
            emit(&cfg, &out.artifacts)?;
            out.all_ok()
        }
    };
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("uxai: some units failed; see the status column of the tables");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("uxai: {e:#}");
            ExitCode::from(2)
        }
    }
}
