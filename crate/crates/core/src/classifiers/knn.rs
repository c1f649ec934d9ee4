use serde::{Deserialize, Serialize};

use super::{check_dim, ProbabilisticClassifier};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::{squared_euclidean, Scalar};

/// Lazy K-nearest-neighbour classifier with class-frequency scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct KnnModel<F: Scalar> {
    train: Dataset<F>,
    k: usize,
}

pub fn knn_fit<F: Scalar>(train: &Dataset<F>, k: usize) -> Result<KnnModel<F>> {
    if train.is_empty() {
        return Err(Error::InvalidParameter("empty training set".into()));
    }
    if k == 0 || k > train.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must lie in 1..={}",
            train.len()
        )));
    }
    Ok(KnnModel {
        train: train.clone(),
        k,
    })
}

/// Indices of the `k` smallest entries of `dist`, ordered by `(distance,
/// index)`. Equal distances resolve to the lower index.
pub(crate) fn k_smallest<F: Scalar>(dist: &[F], k: usize) -> Vec<usize> {
    let mut best: Vec<usize> = Vec::with_capacity(k + 1);
    for (i, &d) in dist.iter().enumerate() {
        if best.len() == k && d >= dist[best[k - 1]] {
            continue;
        }
        let pos = best.partition_point(|&j| dist[j] <= d);
        best.insert(pos, i);
        if best.len() > k {
            best.pop();
        }
    }
    best
}

/// The `k` nearest rows of `data` to `x` as `(row index, squared distance)`,
/// nearest first, ties broken by ascending row index.
pub fn k_nearest<F: Scalar>(data: &Dataset<F>, x: &[F], k: usize) -> Vec<(usize, F)> {
    let dist: Vec<F> = data.rows().map(|r| squared_euclidean(r, x)).collect();
    k_smallest(&dist, k)
        .into_iter()
        .map(|i| (i, dist[i]))
        .collect()
}

impl<F: Scalar> KnnModel<F> {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn train(&self) -> &Dataset<F> {
        &self.train
    }

    pub(crate) fn proba_from_neighbors(&self, neighbors: &[usize]) -> Vec<F> {
        let mut counts = vec![0usize; self.train.num_classes()];
        for &i in neighbors {
            counts[self.train.label(i)] += 1;
        }
        let k = F::from_usize_lossy(self.k);
        counts
            .into_iter()
            .map(|c| F::from_usize_lossy(c) / k)
            .collect()
    }
}

impl<F: Scalar> ProbabilisticClassifier<F> for KnnModel<F> {
    fn n_features(&self) -> usize {
        self.train.n_features()
    }

    fn num_classes(&self) -> usize {
        self.train.num_classes()
    }

    fn predict_proba(&self, x: &[F]) -> Result<Vec<F>> {
        check_dim(self.n_features(), x)?;
        let nn: Vec<usize> = k_nearest(&self.train, x, self.k)
            .into_iter()
            .map(|(i, _)| i)
            .collect();
        Ok(self.proba_from_neighbors(&nn))
    }
}
