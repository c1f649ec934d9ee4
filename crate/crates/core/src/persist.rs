//! Fitted models as versioned JSON documents.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifiers::{KnnModel, TreeEnsemble};
use crate::error::{Error, Result};
use crate::evidence::EknnModel;
use crate::scalar::Scalar;
use crate::uncertainty::CentroidModel;

pub const MODEL_SCHEMA: &str = "uxai-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "kebab-case")]
#[serde(bound = "F: Scalar")]
pub enum SavedModel<F: Scalar> {
    Knn(KnnModel<F>),
    Forest(TreeEnsemble<F>),
    Eknn(EknnModel<F>),
    Centroid(CentroidModel<F>),
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
struct Document<F: Scalar> {
    schema: String,
    version: u32,
    #[serde(flatten)]
    body: SavedModel<F>,
}

#[derive(Deserialize)]
struct Header {
    schema: String,
    version: u32,
}

pub fn to_json<F: Scalar>(model: &SavedModel<F>) -> Result<String> {
    let doc = Document {
        schema: MODEL_SCHEMA.to_string(),
        version: MODEL_VERSION,
        body: model.clone(),
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Serde(e.to_string()))
}

/// Parses a document written by [`to_json`]. The schema tag and version are
/// checked before the body is decoded.
pub fn from_json<F: Scalar>(text: &str) -> Result<SavedModel<F>> {
    let head: Header = serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
    if head.schema != MODEL_SCHEMA {
        return Err(Error::Serde(format!("unexpected schema {:?}", head.schema)));
    }
    if head.version != MODEL_VERSION {
        return Err(Error::Serde(format!(
            "model version {} is not supported (expected {MODEL_VERSION})",
            head.version
        )));
    }
    let doc: Document<F> = serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
    Ok(doc.body)
}

pub fn save<F: Scalar>(model: &SavedModel<F>, path: &Path) -> Result<()> {
    let text = to_json(model)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load<F: Scalar>(path: &Path) -> Result<SavedModel<F>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{ensemble_fit, knn_fit, EnsembleParams, ProbabilisticClassifier};
    use crate::dataset::make_toy_moons;
    use crate::evidence::{eknn_fit, EknnParams};
    use crate::uncertainty::{centroid_fit, UncertaintyQuantifier};

    #[test]
    fn round_trips_every_kind() {
        let d = make_toy_moons::<f64>(20, 0.2, 3).unwrap();
        let forest = ensemble_fit(
            &d,
            &EnsembleParams {
                n_trees: 5,
                max_depth: 3,
                seed: 1,
            },
        )
        .unwrap();
        let models = vec![
            SavedModel::Knn(knn_fit(&d, 3).unwrap()),
            SavedModel::Forest(forest.clone()),
            SavedModel::Eknn(eknn_fit(&d, &EknnParams::default()).unwrap()),
            SavedModel::Centroid(centroid_fit(&d, 1.0).unwrap()),
        ];
        let dir = tempfile::tempdir().unwrap();
        for (i, m) in models.iter().enumerate() {
            let p = dir.path().join(format!("m{i}.json"));
            save(m, &p).unwrap();
            let back: SavedModel<f64> = load(&p).unwrap();
            assert_eq!(&back, m);
        }
        if let SavedModel::Forest(back) = from_json::<f64>(&to_json(&SavedModel::Forest(forest.clone())).unwrap()).unwrap() {
            let x = d.row(7);
            assert_eq!(back.predict_proba(x).unwrap(), forest.predict_proba(x).unwrap());
            assert_eq!(back.estimate(x).unwrap(), forest.estimate(x).unwrap());
        } else {
            panic!("wrong kind");
        }
    }

    #[test]
    fn rejects_foreign_documents() {
        let d = make_toy_moons::<f32>(5, 0.1, 1).unwrap();
        let text = to_json(&SavedModel::Knn(knn_fit(&d, 1).unwrap())).unwrap();
        assert!(text.contains("\"kind\": \"knn\""));
        let bumped = text.replace("\"version\": 1", "\"version\": 99");
        assert!(from_json::<f32>(&bumped).unwrap_err().to_string().contains("99"));
        let other = text.replace(MODEL_SCHEMA, "something-else");
        assert!(from_json::<f32>(&other).is_err());
        assert!(from_json::<f32>("{").is_err());
    }
}
