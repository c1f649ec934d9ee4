use serde::{Deserialize, Serialize};

use crate::classifiers::check_dim;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::{squared_euclidean, Scalar};

/// Closest training row labelled differently from the prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Counterfactual<F: Scalar> {
    pub instance: Vec<F>,
    pub source_index: usize,
    pub counter_label: usize,
    /// Euclidean distance to the explained instance.
    pub distance: F,
}

/// Full scan over `train`; ties resolve to the lowest row index.
pub fn counterfactual_nn<F: Scalar>(train: &Dataset<F>, x: &[F], predicted_label: usize) -> Result<Counterfactual<F>> {
    check_dim(train.n_features(), x)?;
    let mut best: Option<(usize, F)> = None;
    for (i, (row, &y)) in train.rows().zip(train.labels()).enumerate() {
        if y == predicted_label {
            continue;
        }
        let d = squared_euclidean(row, x);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    let (i, d2) = best.ok_or(Error::NoCounterfactual(predicted_label))?;
    Ok(Counterfactual {
        instance: train.row(i).to_vec(),
        source_index: i,
        counter_label: train.label(i),
        distance: d2.sqrt(),
    })
}
