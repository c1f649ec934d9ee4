use std::path::Path;

use serde_json::{json, Value};

use super::config::ExperimentConfig;
use super::output::{slug, Artifacts};
use super::{fit_knn, fit_quantifier, load_dataset, prepare_run, KnnExplainers};
use crate::error::{Error, Result};
use crate::protocol::{route, RoutingPolicy, Threshold};

#[derive(Debug, Clone)]
pub struct RouteOutcome {
    pub config_hash: String,
    /// One JSON record per input row, in input order.
    pub records: Vec<Value>,
    pub n_errors: usize,
    pub artifacts: Artifacts,
}

/// Reads the columns named in `feature_names` from a CSV with a header row.
/// Extra columns (such as a label) are ignored. Rows that fail to parse come
/// back as errors in place.
fn read_instances(path: &Path, feature_names: &[String]) -> Result<Vec<std::result::Result<Vec<f64>, String>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    let header = rdr
        .headers()
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .clone();
    let cols = feature_names
        .iter()
        .map(|f| {
            header.iter().position(|h| h == f).ok_or_else(|| Error::Csv {
                path: path.to_path_buf(),
                message: format!("missing feature column {f:?}"),
            })
        })
        .collect::<Result<Vec<usize>>>()?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let parsed = rec.map_err(|e| e.to_string()).and_then(|rec| {
            cols.iter()
                .zip(feature_names)
                .map(|(&c, name)| {
                    let cell = rec.get(c).unwrap_or("");
                    cell.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| format!("row {row}, column {name:?}: non-numeric value {cell:?}"))
                })
                .collect()
        });
        out.push(parsed);
    }
    Ok(out)
}

/// Routes every row of `instances` through the protocol. Thresholds are
/// quantiles of the held-out split's uncertainty under the first configured
/// strategy.
pub fn route_instances(cfg: &ExperimentConfig, instances: &Path) -> Result<RouteOutcome> {
    cfg.validate()?;
    let hash = cfg.hash();
    let entry = cfg
        .datasets
        .first()
        .ok_or_else(|| Error::Config("route needs a training dataset".into()))?;
    let strategy = cfg.uncertainty.strategies[0];
    let data = load_dataset(entry)?;
    let rd = prepare_run(&data, cfg, 0, &entry.name)?;
    let knn = fit_knn(&rd.train, cfg)?;
    let quantifier = fit_quantifier(strategy, &rd.train, cfg, rd.seed)?;
    let held_out = rd
        .test
        .rows()
        .map(|x| quantifier.estimate(x))
        .collect::<Result<Vec<_>>>()?;
    let policy = RoutingPolicy::new(
        Threshold::Quantile(cfg.protocol.eu_quantile),
        Threshold::Quantile(cfg.protocol.au_quantile),
    )
    .calibrate(&held_out)?;
    let (eu_t, au_t) = policy.thresholds()?;
    let explainers = KnnExplainers::new(&knn, cfg, rd.seed);
    let rows = read_instances(instances, rd.train.feature_names())?;

    let mut records = Vec::with_capacity(rows.len());
    let mut n_errors = 0;
    for (i, row) in rows.into_iter().enumerate() {
        let routed = row.map_err(Error::InvalidDataset).and_then(|raw| {
            let x = rd.norm.transform_row(&raw);
            let u = quantifier.estimate(&x)?;
            route(&policy, &x, u, &explainers)
        });
        let rec = match routed {
            Ok(r) => json!({
                "instance": i,
                "verdict": r.verdict,
                "explanation": r.explanation,
                "uncertainty": r.uncertainty,
            }),
            Err(e) => {
                n_errors += 1;
                json!({"instance": i, "error": e.to_string()})
            }
        };
        records.push(rec);
    }
    let mut stream = String::new();
    for r in &records {
        stream.push_str(&serde_json::to_string(r).map_err(|e| Error::Serde(e.to_string()))?);
        stream.push('\n');
    }
    let mut artifacts = Artifacts::default();
    artifacts.push(format!("raw/route_{}.jsonl", slug(&entry.name)), stream);
    let policy_doc = json!({
        "config_hash": hash,
        "dataset": entry.name,
        "strategy": strategy.name(),
        "calibration_points": held_out.len(),
        "eu_quantile": cfg.protocol.eu_quantile,
        "au_quantile": cfg.protocol.au_quantile,
        "eu_threshold": eu_t,
        "au_threshold": au_t,
    });
    artifacts.push(
        format!("dossiers/route_policy_{}.json", slug(&entry.name)),
        serde_json::to_string_pretty(&policy_doc).map_err(|e| Error::Serde(e.to_string()))? + "\n",
    );
    Ok(RouteOutcome {
        config_hash: hash,
        records,
        n_errors,
        artifacts,
    })
}
