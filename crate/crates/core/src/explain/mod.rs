//! Post-hoc explanations: Shapley feature importance and nearest-neighbour
//! counterfactuals.

mod counterfactual;
mod shapley;

pub use counterfactual::{counterfactual_nn, Counterfactual};
pub use shapley::{
    background_sample, coalition_value, shapley_auto, shapley_exact, shapley_sampled, CoalitionScorer,
    Estimator, FnScorer, ImportanceVector, KnnCursor, ProbaScorer, SamplingParams, SamplingScheme,
    MAX_EXACT_FEATURES,
};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Stands in for an explanation when the model lacks training data near the
/// instance; the epistemic uncertainty itself is the message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RejectionRecord<F: Scalar> {
    pub epistemic: F,
    pub threshold: F,
    pub message: String,
}

impl<F: Scalar> RejectionRecord<F> {
    pub fn new(epistemic: F, threshold: F) -> Self {
        RejectionRecord {
            epistemic,
            threshold,
            message: "the model lacks training data close to this instance".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "kebab-case", bound = "")]
pub enum Explanation<F: Scalar> {
    FeatureImportance(ImportanceVector<F>),
    Counterfactual(Counterfactual<F>),
    Rejection(RejectionRecord<F>),
}
