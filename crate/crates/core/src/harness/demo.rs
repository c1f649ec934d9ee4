use serde_json::json;

use super::config::{ExperimentConfig, ExplanationType};
use super::output::{csv_text, slug, Artifacts};
use super::{fit_knn, fit_quantifier, load_dataset, prepare_run, KnnExplainers};
use crate::classifiers::ProbabilisticClassifier;
use crate::error::{Error, Result};
use crate::explain::{counterfactual_nn, Explanation};
use crate::protocol::{fraction_rejected, most_uncertain, rejection_curve, RoutingPolicy, Threshold, UncertaintyKind};
use crate::uncertainty::{Strategy, UncertaintyEstimate};

#[derive(Debug, Clone)]
pub struct DemoEntry {
    pub dataset: String,
    pub strategy: Strategy,
    pub result: std::result::Result<DemoResult, String>,
}

#[derive(Debug, Clone)]
pub struct DemoResult {
    pub curve: Vec<(f64, f64)>,
    /// Test-split uncertainties, in test order.
    pub uncertainties: Vec<UncertaintyEstimate<f64>>,
    /// Position within the test split of the most epistemically uncertain
    /// instance, and its dataset row.
    pub instance: usize,
    pub dataset_index: usize,
    pub explanation: Explanation<f64>,
    /// Features the scatter data is projected on.
    pub projection: [usize; 2],
    pub calibrated_eu_threshold: f64,
    pub calibrated_rejected: f64,
}

#[derive(Debug, Clone)]
pub struct DemoOutcome {
    pub config_hash: String,
    pub entries: Vec<DemoEntry>,
    pub artifacts: Artifacts,
}

impl DemoOutcome {
    pub fn all_ok(&self) -> bool {
        self.entries.iter().all(|e| e.result.is_ok())
    }
}

/// Two features with the largest magnitude in `scores`, lower index first on
/// ties.
fn top_two(scores: &[f64]) -> [usize; 2] {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].abs().total_cmp(&scores[a].abs()).then(a.cmp(&b)));
    [idx[0], *idx.get(1).unwrap_or(&idx[0])]
}

/// Rejection curve on the first run's test split plus a dossier on the most
/// epistemically uncertain test instance, per dataset and strategy.
pub fn reject_demo(cfg: &ExperimentConfig) -> Result<DemoOutcome> {
    cfg.validate()?;
    let hash = cfg.hash();
    let mut artifacts = Artifacts::default();
    let mut entries = Vec::new();
    for entry in &cfg.datasets {
        let prepared = load_dataset(entry).and_then(|d| {
            let rd = prepare_run(&d, cfg, 0, &entry.name)?;
            Ok((d, rd))
        });
        for &strategy in &cfg.uncertainty.strategies {
            let result = match &prepared {
                Err(e) => Err(e.to_string()),
                Ok((data, rd)) => demo_one(cfg, &hash, &entry.name, data, rd, strategy, &mut artifacts)
                    .map_err(|e| e.to_string()),
            };
            entries.push(DemoEntry {
                dataset: entry.name.clone(),
                strategy,
                result,
            });
        }
    }
    let summary: Vec<Vec<String>> = entries
        .iter()
        .map(|e| {
            let mut v = vec![hash.clone(), e.dataset.clone(), e.strategy.name().to_string()];
            match &e.result {
                Ok(r) => v.extend([
                    r.dataset_index.to_string(),
                    r.uncertainties[r.instance].epistemic.to_string(),
                    r.calibrated_eu_threshold.to_string(),
                    r.calibrated_rejected.to_string(),
                    "ok".into(),
                ]),
                Err(msg) => {
                    v.extend(std::iter::repeat_n(String::new(), 4));
                    v.push(if msg.contains("not available") {
                        "strategy unavailable".into()
                    } else {
                        format!("error: {msg}")
                    });
                }
            }
            v
        })
        .collect();
    artifacts.push(
        "tables/reject_demo.csv",
        csv_text(
            &[
                "config_hash",
                "dataset",
                "strategy",
                "most_uncertain_index",
                "max_eu",
                "eu_threshold",
                "fraction_rejected",
                "status",
            ],
            summary,
        ),
    );
    Ok(DemoOutcome {
        config_hash: hash,
        entries,
        artifacts,
    })
}

fn demo_one(
    cfg: &ExperimentConfig,
    hash: &str,
    name: &str,
    data: &crate::dataset::Dataset<f64>,
    rd: &super::RunData,
    strategy: Strategy,
    artifacts: &mut Artifacts,
) -> Result<DemoResult> {
    if rd.test.is_empty() {
        return Err(Error::InvalidDataset("empty test split".into()));
    }
    let knn = fit_knn(&rd.train, cfg)?;
    let quantifier = fit_quantifier(strategy, &rd.train, cfg, rd.seed)?;
    let uncertainties = rd
        .test
        .rows()
        .map(|x| quantifier.estimate(x))
        .collect::<Result<Vec<_>>>()?;
    let curve = rejection_curve(&uncertainties, cfg.protocol.n_thresholds)?;
    let policy = RoutingPolicy::new(
        Threshold::Quantile(cfg.protocol.eu_quantile),
        Threshold::Quantile(cfg.protocol.au_quantile),
    )
    .calibrate(&uncertainties)?;
    let (eu_t, _) = policy.thresholds()?;
    let calibrated_rejected = fraction_rejected(&uncertainties, eu_t);

    let instance = most_uncertain(&uncertainties, UncertaintyKind::Epistemic)?;
    let x = rd.test.row(instance);
    let predicted = knn.predict(x)?;
    let explainers = KnnExplainers::new(&knn, cfg, rd.seed);
    let (explanation, projection) = match cfg.explain.kind {
        ExplanationType::FeatureImportance => {
            let phi = explainers.shap(x, predicted, super::derive_seed(rd.seed, "shap", 0))?;
            let proj = top_two(&phi.values);
            (Explanation::FeatureImportance(phi), proj)
        }
        ExplanationType::Counterfactual => {
            let cf = counterfactual_nn(&rd.train, x, predicted)?;
            let diff: Vec<f64> = x.iter().zip(&cf.instance).map(|(a, b)| a - b).collect();
            (Explanation::Counterfactual(cf), top_two(&diff))
        }
    };

    let stem = format!("{}_{}", slug(name), strategy.name().replace('-', "_"));
    artifacts.push(
        format!("curves/{stem}_rejection.csv"),
        csv_text(
            &["config_hash", "threshold", "fraction_rejected"],
            curve
                .iter()
                .map(|(t, f)| vec![hash.to_string(), t.to_string(), f.to_string()]),
        ),
    );
    let names = rd.train.feature_names();
    let [f0, f1] = projection;
    let mut scatter = Vec::new();
    for (i, row) in rd.train.rows().enumerate() {
        scatter.push(vec![
            hash.to_string(),
            "train".to_string(),
            rd.split.train[i].to_string(),
            rd.train.class_names()[rd.train.label(i)].clone(),
            row[f0].to_string(),
            row[f1].to_string(),
        ]);
    }
    let dataset_index = rd.split.test[instance];
    scatter.push(vec![
        hash.to_string(),
        "instance".to_string(),
        dataset_index.to_string(),
        rd.train.class_names()[predicted].clone(),
        x[f0].to_string(),
        x[f1].to_string(),
    ]);
    artifacts.push(
        format!("dossiers/{stem}_scatter.csv"),
        csv_text(&["config_hash", "role", "index", "label", &names[f0], &names[f1]], scatter),
    );
    let mut ranked: Vec<(usize, f64)> = match &explanation {
        Explanation::FeatureImportance(phi) => phi.values.iter().copied().enumerate().collect(),
        Explanation::Counterfactual(cf) => x.iter().zip(&cf.instance).map(|(a, b)| a - b).enumerate().collect(),
        Explanation::Rejection(_) => Vec::new(),
    };
    ranked.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
    let dossier = json!({
        "config_hash": hash,
        "dataset": name,
        "strategy": strategy.name(),
        "instance": {
            "dataset_index": dataset_index,
            "features": x,
            "raw_features": data.row(dataset_index),
            "true_label": data.class_names()[data.label(dataset_index)],
            "predicted_label": rd.train.class_names()[predicted],
        },
        "uncertainty": uncertainties[instance],
        "explanation": explanation,
        "ranked_features": ranked.iter().map(|(i, v)| json!({"feature": names[*i], "value": v})).collect::<Vec<_>>(),
        "projection": [names[f0], names[f1]],
        "rejection": {
            "eu_quantile": cfg.protocol.eu_quantile,
            "eu_threshold": eu_t,
            "fraction_rejected": calibrated_rejected,
        },
    });
    artifacts.push(
        format!("dossiers/{stem}.json"),
        serde_json::to_string_pretty(&dossier).map_err(|e| Error::Serde(e.to_string()))? + "\n",
    );
    Ok(DemoResult {
        curve,
        uncertainties,
        instance,
        dataset_index,
        explanation,
        projection,
        calibrated_eu_threshold: eu_t,
        calibrated_rejected,
    })
}
