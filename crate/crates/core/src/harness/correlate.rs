use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::output::{csv_text, fmt_p, fmt_rho, slug, text_table, Artifacts};
use super::{derive_seed, fit_knn, fit_quantifier, load_dataset, prepare_run, KnnExplainers, RunData};
use crate::classifiers::ProbabilisticClassifier;
use crate::dataset::Dataset;
use crate::error::Result;
use crate::explain::counterfactual_nn;
use crate::robustness::{cf_dissimilarity, lipschitz_estimate, LipschitzParams};
use crate::stats::{aggregate_runs, CorrelationReport, RunSample};
use crate::uncertainty::{Strategy, UncertaintyEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subset {
    Full,
    /// Highest-EU share of each run's test split removed.
    Rejected,
}

impl Subset {
    pub fn name(self) -> &'static str {
        match self {
            Subset::Full => "full",
            Subset::Rejected => "rejected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    pub dataset: String,
    pub strategy: Strategy,
    pub subset: Subset,
    pub result: std::result::Result<CorrelationReport, String>,
}

#[derive(Debug, Clone)]
pub struct CorrelationOutcome {
    pub verb: &'static str,
    pub config_hash: String,
    pub rows: Vec<CorrelationRow>,
    pub artifacts: Artifacts,
}

impl CorrelationOutcome {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.result.is_ok())
    }

    pub fn row(&self, dataset: &str, strategy: Strategy, subset: Subset) -> Option<&CorrelationRow> {
        self.rows
            .iter()
            .find(|r| r.dataset == dataset && r.strategy == strategy && r.subset == subset)
    }
}

/// Per-test-instance outcome of one run.
#[derive(Debug, Clone)]
struct Instance {
    test_index: usize,
    predicted: usize,
    /// Counterfactual dissimilarity or Lipschitz estimate.
    metric: f64,
    /// Counterfactual source row (dataset index) and label.
    cf: Option<(usize, usize)>,
    uncertainty: Vec<Option<UncertaintyEstimate<f64>>>,
}

#[derive(Debug, Clone)]
struct Unit {
    run: usize,
    instances: Vec<Instance>,
    /// Per-strategy fitting error.
    strategy_errors: Vec<Option<String>>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Counterfactual,
    Shap,
}

impl Kind {
    fn verb(self) -> &'static str {
        match self {
            Kind::Counterfactual => "correlate-cf",
            Kind::Shap => "correlate-shap",
        }
    }

    fn metric_name(self) -> &'static str {
        match self {
            Kind::Counterfactual => "cf_dissimilarity",
            Kind::Shap => "lipschitz",
        }
    }

    fn subsets(self) -> &'static [Subset] {
        match self {
            Kind::Counterfactual => &[Subset::Full],
            Kind::Shap => &[Subset::Full, Subset::Rejected],
        }
    }
}

/// Counterfactual dissimilarity against AU, repeated over `runs` splits
/// (default 100).
pub fn correlate_cf(cfg: &ExperimentConfig) -> Result<CorrelationOutcome> {
    run_correlation(cfg, Kind::Counterfactual, cfg.runs_or(100))
}

/// SHAP Lipschitz instability against AU, on the full test split and after
/// EU rejection (default 5 runs).
pub fn correlate_shap(cfg: &ExperimentConfig) -> Result<CorrelationOutcome> {
    run_correlation(cfg, Kind::Shap, cfg.runs_or(5))
}

fn run_unit(kind: Kind, data: &Dataset<f64>, cfg: &ExperimentConfig, run: usize, name: &str) -> Result<Unit> {
    let rd: RunData = prepare_run(data, cfg, run, name)?;
    let knn = fit_knn(&rd.train, cfg)?;
    let mut quantifiers = Vec::new();
    let mut strategy_errors = Vec::new();
    for &s in &cfg.uncertainty.strategies {
        match fit_quantifier(s, &rd.train, cfg, rd.seed) {
            Ok(q) => {
                quantifiers.push(Some(q));
                strategy_errors.push(None);
            }
            Err(e) => {
                quantifiers.push(None);
                strategy_errors.push(Some(e.to_string()));
            }
        }
    }
    let explainers = (kind == Kind::Shap).then(|| KnnExplainers::new(&knn, cfg, rd.seed));
    let mut instances = Vec::with_capacity(rd.test.len());
    for (t, x) in rd.test.rows().enumerate() {
        let test_index = rd.split.test[t];
        let predicted = knn.predict(x)?;
        let (metric, cf) = match &explainers {
            None => {
                let cf = counterfactual_nn(&rd.train, x, predicted)?;
                let d = cf_dissimilarity(x, &cf)?;
                (d, Some((rd.split.train[cf.source_index], cf.counter_label)))
            }
            Some(ex) => {
                let sample_seed = derive_seed(rd.seed, "shap", test_index as u64);
                let params = LipschitzParams {
                    epsilon: cfg.robustness.epsilon,
                    n_samples: cfg.robustness.n_samples,
                    seed: derive_seed(rd.seed, "lipschitz", test_index as u64),
                };
                let l = lipschitz_estimate(|z: &[f64]| Ok(ex.shap(z, predicted, sample_seed)?.values), x, &params)?;
                (l.value, None)
            }
        };
        let uncertainty = quantifiers
            .iter()
            .map(|q| q.as_ref().and_then(|q| q.estimate(x).ok()))
            .collect();
        instances.push(Instance {
            test_index,
            predicted,
            metric,
            cf,
            uncertainty,
        });
    }
    Ok(Unit {
        run,
        instances,
        strategy_errors,
    })
}

/// Indices of the instances kept after dropping the `fraction` with highest
/// EU (ties resolved towards lower test index).
fn kept_after_rejection(instances: &[Instance], s: usize, fraction: f64) -> Vec<bool> {
    let n = instances.len();
    let n_reject = (fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let eu = |i: usize| instances[i].uncertainty[s].map_or(f64::INFINITY, |u| u.epistemic);
    order.sort_by(|&a, &b| eu(a).total_cmp(&eu(b)).then(a.cmp(&b)));
    let mut keep = vec![false; n];
    for &i in &order[..n - n_reject] {
        keep[i] = true;
    }
    keep
}

fn run_correlation(cfg: &ExperimentConfig, kind: Kind, runs: usize) -> Result<CorrelationOutcome> {
    cfg.validate()?;
    let hash = cfg.hash();
    let strategies = &cfg.uncertainty.strategies;
    let loaded: Vec<(String, std::result::Result<Dataset<f64>, String>)> = cfg
        .datasets
        .iter()
        .map(|d| (d.name.clone(), load_dataset(d).map_err(|e| e.to_string())))
        .collect();
    let jobs: Vec<(usize, usize)> = loaded
        .iter()
        .enumerate()
        .filter(|(_, (_, d))| d.is_ok())
        .flat_map(|(di, _)| (0..runs).map(move |r| (di, r)))
        .collect();
    let results: Vec<((usize, usize), Result<Unit>)> = jobs
        .par_iter()
        .map(|&(di, r)| {
            let (name, data) = &loaded[di];
            let data = data.as_ref().expect("filtered to loaded datasets");
            ((di, r), run_unit(kind, data, cfg, r, name))
        })
        .collect();

    let mut rows = Vec::new();
    let mut run_rows = Vec::new();
    let mut artifacts = Artifacts::default();
    for (di, (name, data)) in loaded.iter().enumerate() {
        if let Err(e) = data {
            for &s in strategies {
                for &sub in kind.subsets() {
                    rows.push(CorrelationRow {
                        dataset: name.clone(),
                        strategy: s,
                        subset: sub,
                        result: Err(format!("dataset error: {e}")),
                    });
                }
            }
            continue;
        }
        let units: Vec<&Result<Unit>> = results.iter().filter(|((d, _), _)| *d == di).map(|(_, u)| u).collect();
        let unit_error = units.iter().find_map(|u| u.as_ref().err().map(|e| e.to_string()));
        let ok_units: Vec<&Unit> = units.iter().filter_map(|u| u.as_ref().ok()).collect();

        let mut kept: Vec<Vec<Vec<bool>>> = Vec::new();
        for (si, &s) in strategies.iter().enumerate() {
            kept.push(
                ok_units
                    .iter()
                    .map(|u| kept_after_rejection(&u.instances, si, cfg.protocol.reject_fraction))
                    .collect(),
            );
            for &sub in kind.subsets() {
                let result = if let Some(e) = &unit_error {
                    Err(format!("run failed: {e}"))
                } else if let Some(e) = ok_units.iter().find_map(|u| u.strategy_errors[si].clone()) {
                    Err(e)
                } else {
                    let samples: Vec<RunSample> = ok_units
                        .iter()
                        .zip(&kept[si])
                        .map(|(u, keep)| {
                            let mut rs = RunSample::default();
                            for (inst, &k) in u.instances.iter().zip(keep) {
                                if sub == Subset::Rejected && !k {
                                    continue;
                                }
                                if let Some(est) = inst.uncertainty[si] {
                                    rs.push(est.aleatoric, inst.metric);
                                }
                            }
                            rs
                        })
                        .collect();
                    aggregate_runs(&samples, cfg.alpha).map_err(|e| e.to_string())
                };
                if let Ok(rep) = &result {
                    for (u, summary) in ok_units.iter().zip(&rep.runs) {
                        run_rows.push(vec![
                            hash.clone(),
                            name.clone(),
                            s.name().to_string(),
                            sub.name().to_string(),
                            u.run.to_string(),
                            summary.rho.map_or(String::new(), |v| v.to_string()),
                            summary.p_value.map_or(String::new(), |v| v.to_string()),
                            summary.n_pairs.to_string(),
                        ]);
                    }
                }
                rows.push(CorrelationRow {
                    dataset: name.clone(),
                    strategy: s,
                    subset: sub,
                    result,
                });
            }
        }
        artifacts.push(
            format!("raw/{}_{}.csv", kind.verb().replace('-', "_"), slug(name)),
            raw_csv(kind, &hash, strategies, &ok_units, &kept),
        );
    }
    let stem = kind.verb().replace('-', "_");
    artifacts.push(format!("tables/{stem}.csv"), table_csv(&hash, &rows));
    artifacts.push(format!("tables/{stem}.txt"), table_text(kind, &hash, &rows));
    artifacts.push(
        format!("tables/{stem}_runs.csv"),
        csv_text(
            &["config_hash", "dataset", "strategy", "subset", "run", "rho", "p_value", "n_pairs"],
            run_rows,
        ),
    );
    Ok(CorrelationOutcome {
        verb: kind.verb(),
        config_hash: hash,
        rows,
        artifacts,
    })
}

fn raw_csv(kind: Kind, hash: &str, strategies: &[Strategy], units: &[&Unit], kept: &[Vec<Vec<bool>>]) -> String {
    let mut header: Vec<String> = ["config_hash", "run", "test_index", "predicted", kind.metric_name()]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if kind == Kind::Counterfactual {
        header.push("cf_index".into());
        header.push("cf_label".into());
    }
    for s in strategies {
        let n = s.name().replace('-', "_");
        header.extend([format!("au_{n}"), format!("eu_{n}"), format!("tu_{n}")]);
        if kind == Kind::Shap {
            header.push(format!("kept_{n}"));
        }
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::new();
    for (ui, u) in units.iter().enumerate() {
        for (ii, inst) in u.instances.iter().enumerate() {
            let mut r = vec![
                hash.to_string(),
                u.run.to_string(),
                inst.test_index.to_string(),
                inst.predicted.to_string(),
                inst.metric.to_string(),
            ];
            if let Some((ci, cl)) = inst.cf {
                r.push(ci.to_string());
                r.push(cl.to_string());
            }
            for (si, est) in inst.uncertainty.iter().enumerate() {
                match est {
                    Some(e) => r.extend([e.aleatoric.to_string(), e.epistemic.to_string(), e.total.to_string()]),
                    None => r.extend([String::new(), String::new(), String::new()]),
                }
                if kind == Kind::Shap {
                    r.push(u8::from(kept[si][ui][ii]).to_string());
                }
            }
            rows.push(r);
        }
    }
    csv_text(&header_refs, rows)
}

fn table_csv(hash: &str, rows: &[CorrelationRow]) -> String {
    let header = [
        "config_hash",
        "dataset",
        "strategy",
        "subset",
        "rho",
        "rho_std",
        "pooled_rho",
        "p_value",
        "significant",
        "alpha",
        "n_pairs",
        "n_runs",
        "n_undefined",
        "status",
    ];
    let body = rows.iter().map(|r| {
        let mut v = vec![
            hash.to_string(),
            r.dataset.clone(),
            r.strategy.name().to_string(),
            r.subset.name().to_string(),
        ];
        match &r.result {
            Ok(rep) => v.extend([
                rep.rho.to_string(),
                rep.rho_std.to_string(),
                rep.pooled_rho.to_string(),
                rep.p_value.to_string(),
                rep.significant.to_string(),
                rep.alpha.to_string(),
                rep.n_pairs.to_string(),
                rep.n_runs.to_string(),
                rep.n_undefined.to_string(),
                "ok".to_string(),
            ]),
            Err(e) => {
                v.extend(std::iter::repeat_n(String::new(), 9));
                v.push(status_text(e));
            }
        }
        v
    });
    csv_text(&header, body)
}

fn status_text(e: &str) -> String {
    if e.contains("not available") {
        "strategy unavailable".into()
    } else {
        format!("error: {e}")
    }
}

fn table_text(kind: Kind, hash: &str, rows: &[CorrelationRow]) -> String {
    let cell = |r: Option<&CorrelationRow>| -> Vec<String> {
        match r.map(|r| &r.result) {
            Some(Ok(rep)) => vec![
                fmt_rho(rep.rho),
                fmt_rho(rep.rho_std),
                fmt_p(rep.p_value),
                if rep.significant { "yes" } else { "no" }.into(),
            ],
            Some(Err(e)) => vec![status_text(e), String::new(), String::new(), String::new()],
            None => vec![String::new(); 4],
        }
    };
    let mut body = Vec::new();
    let mut seen = Vec::new();
    for r in rows {
        let key = (r.dataset.clone(), r.strategy);
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let find = |sub| {
            rows.iter()
                .find(|x| x.dataset == r.dataset && x.strategy == r.strategy && x.subset == sub)
        };
        let mut line = vec![r.dataset.clone(), r.strategy.name().to_string()];
        line.extend(cell(find(Subset::Full)));
        if kind == Kind::Shap {
            line.extend(cell(find(Subset::Rejected)));
        }
        let runs = match &r.result {
            Ok(rep) => rep.n_runs.to_string(),
            Err(_) => String::new(),
        };
        line.push(runs);
        body.push(line);
    }
    let mut header = vec!["dataset", "strategy", "rho", "std", "p-value", "sig"];
    if kind == Kind::Shap {
        header.extend(["rho(rej)", "std(rej)", "p(rej)", "sig(rej)"]);
    }
    header.push("runs");
    let title = format!(
        "# {}: Spearman rho of AU vs {}  [config {hash}]",
        kind.verb(),
        kind.metric_name()
    );
    text_table(&title, &header, &body)
}
