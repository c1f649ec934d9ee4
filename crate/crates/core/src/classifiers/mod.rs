//! Probabilistic classifiers used as the explained models.

mod knn;
mod tree;

pub use knn::{k_nearest, knn_fit, KnnModel};
pub use tree::{ensemble_fit, DecisionTree, EnsembleParams, Node, TreeEnsemble};

use crate::error::{Error, Result};
use crate::scalar::{argmax, Scalar};

/// A classifier exposing a class-score vector `f(x)` that sums to one.
pub trait ProbabilisticClassifier<F: Scalar>: Send + Sync {
    fn n_features(&self) -> usize;

    fn num_classes(&self) -> usize;

    fn predict_proba(&self, x: &[F]) -> Result<Vec<F>>;

    /// Arg-max of the score vector, lowest class index on ties.
    fn predict(&self, x: &[F]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }
}

pub(crate) fn check_dim(expected: usize, x: &[impl Copy]) -> Result<()> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        })
    }
}
