use serde_json::json;

use super::config::ExperimentConfig;
use super::output::{csv_text, slug, Artifacts};
use super::{fit_knn, fit_model, load_dataset, prepare_run};
use crate::error::{Error, Result};
use crate::persist::{to_json, SavedModel};

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub config_hash: String,
    /// `(dataset, model, result)` in config order.
    pub entries: Vec<(String, String, std::result::Result<(), String>)>,
    pub artifacts: Artifacts,
}

impl FitOutcome {
    pub fn all_ok(&self) -> bool {
        self.entries.iter().all(|e| e.2.is_ok())
    }
}

/// Fits the K-NN classifier and every configured strategy on the first run's
/// training split and emits them as model documents under `models/`.
pub fn fit_models(cfg: &ExperimentConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    let hash = cfg.hash();
    let mut artifacts = Artifacts::default();
    let mut entries = Vec::new();
    for entry in &cfg.datasets {
        let ds = slug(&entry.name);
        let rd = match load_dataset(entry).and_then(|d| prepare_run(&d, cfg, 0, &entry.name)) {
            Ok(rd) => rd,
            Err(e) => {
                entries.push((entry.name.clone(), "split".to_string(), Err(e.to_string())));
                continue;
            }
        };
        let norm = json!({
            "config_hash": hash,
            "dataset": entry.name,
            "features": rd.train.feature_names(),
            "classes": rd.train.class_names(),
            "min": rd.norm.min,
            "max": rd.norm.max,
            "train_rows": rd.split.train,
        });
        artifacts.push(
            format!("models/{ds}_normalization.json"),
            serde_json::to_string_pretty(&norm).map_err(|e| Error::Serde(e.to_string()))? + "\n",
        );
        let mut fitted = vec![("knn".to_string(), fit_knn(&rd.train, cfg).map(SavedModel::Knn))];
        for &s in &cfg.uncertainty.strategies {
            fitted.push((s.name().to_string(), fit_model(s, &rd.train, cfg, rd.seed)));
        }
        for (name, model) in fitted {
            let res = model.and_then(|m| to_json(&m)).map(|text| {
                artifacts.push(format!("models/{ds}_{}.json", name.replace('-', "_")), text + "\n");
            });
            entries.push((entry.name.clone(), name, res.map_err(|e| e.to_string())));
        }
    }
    artifacts.push(
        "tables/fit.csv",
        csv_text(
            &["config_hash", "dataset", "model", "status"],
            entries.iter().map(|(d, m, r)| {
                vec![
                    hash.clone(),
                    d.clone(),
                    m.clone(),
                    match r {
                        Ok(()) => "ok".to_string(),
                        Err(e) => format!("error: {e}"),
                    },
                ]
            }),
        ),
    );
    Ok(FitOutcome {
        config_hash: hash,
        entries,
        artifacts,
    })
}
