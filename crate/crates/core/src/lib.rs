//! Aleatoric/epistemic uncertainty for tabular classifiers, and explanations
//! that are routed, rejected or scored by it.
//!
//! Numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`). The
//! aliases below fix the scalar for the common cases. The experiment harness
//! and the statistics work in `f64`.

pub mod classifiers;
pub mod dataset;
pub mod error;
pub mod evidence;
pub mod explain;
pub mod harness;
pub mod persist;
pub mod protocol;
pub mod robustness;
pub mod scalar;
pub mod stats;
pub mod uncertainty;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Dataset64 = dataset::Dataset<f64>;
pub type Dataset32 = dataset::Dataset<f32>;
pub type KnnModel64 = classifiers::KnnModel<f64>;
pub type KnnModel32 = classifiers::KnnModel<f32>;
pub type TreeEnsemble64 = classifiers::TreeEnsemble<f64>;
pub type TreeEnsemble32 = classifiers::TreeEnsemble<f32>;
pub type MassFunction64 = evidence::MassFunction<f64>;
pub type MassFunction32 = evidence::MassFunction<f32>;
pub type EknnModel64 = evidence::EknnModel<f64>;
pub type EknnModel32 = evidence::EknnModel<f32>;
pub type CentroidModel64 = uncertainty::CentroidModel<f64>;
pub type CentroidModel32 = uncertainty::CentroidModel<f32>;
pub type UncertaintyEstimate64 = uncertainty::UncertaintyEstimate<f64>;
pub type UncertaintyEstimate32 = uncertainty::UncertaintyEstimate<f32>;
pub type ImportanceVector64 = explain::ImportanceVector<f64>;
pub type Counterfactual64 = explain::Counterfactual<f64>;
