use serde::{Deserialize, Serialize};

use super::mass::{full_set, singleton, MassFunction, MAX_CLASSES};
use crate::classifiers::k_nearest;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EknnParams {
    pub k: usize,
    /// Maximal support a single neighbour can lend to its class.
    pub alpha: f64,
    /// Multiplier on the inverse mean intra-class squared distance.
    pub gamma_scale: f64,
}

impl Default for EknnParams {
    fn default() -> Self {
        EknnParams {
            k: 7,
            alpha: 0.95,
            gamma_scale: 1.0,
        }
    }
}

/// Evidential K-NN: each neighbour is a simple mass function supporting its
/// own class, and the K pieces of evidence are pooled with Dempster's rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EknnModel<F: Scalar> {
    train: Dataset<F>,
    k: usize,
    alpha: F,
    gamma: Vec<F>,
}

/// Mean squared Euclidean distance over ordered pairs of distinct rows.
fn mean_pairwise_sq_distance<'a, F: Scalar>(rows: impl Iterator<Item = &'a [F]>, q: usize) -> Option<F> {
    let mut n = 0usize;
    let mut sum = vec![F::zero(); q];
    let mut sum_sq = F::zero();
    for r in rows {
        n += 1;
        for (s, &v) in sum.iter_mut().zip(r) {
            *s = *s + v;
            sum_sq = sum_sq + v * v;
        }
    }
    if n < 2 {
        return None;
    }
    let nf = F::from_usize_lossy(n);
    let norm_of_sum: F = sum.iter().map(|&s| s * s).sum();
    let total = F::lit(2.0) * (nf * sum_sq - norm_of_sum);
    let mean = total / (nf * (nf - F::one()));
    (mean > F::zero()).then_some(mean)
}

pub fn eknn_fit<F: Scalar>(train: &Dataset<F>, params: &EknnParams) -> Result<EknnModel<F>> {
    if train.is_empty() {
        return Err(Error::InvalidParameter("empty training set".into()));
    }
    if params.k == 0 || params.k > train.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {} must lie in 1..={}",
            params.k,
            train.len()
        )));
    }
    if !(params.alpha > 0.0 && params.alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha {} outside (0, 1)", params.alpha)));
    }
    if !(params.gamma_scale > 0.0 && params.gamma_scale.is_finite()) {
        return Err(Error::InvalidParameter("gamma_scale must be positive".into()));
    }
    let q = train.n_features();
    let global = mean_pairwise_sq_distance(train.rows(), q).unwrap_or_else(F::one);
    let scale = F::lit(params.gamma_scale);
    let gamma = (0..train.num_classes())
        .map(|c| {
            let rows = train.rows().zip(train.labels()).filter(|(_, &l)| l == c).map(|(r, _)| r);
            let mean = mean_pairwise_sq_distance(rows, q).unwrap_or(global);
            scale / mean
        })
        .collect();
    EknnModel::with_gamma(train, params.k, F::lit(params.alpha), gamma)
}

impl<F: Scalar> EknnModel<F> {
    /// Model with explicit per-class `gamma`.
    pub fn with_gamma(train: &Dataset<F>, k: usize, alpha: F, gamma: Vec<F>) -> Result<Self> {
        if train.num_classes() > MAX_CLASSES {
            return Err(Error::InvalidParameter(format!(
                "{} classes exceeds the supported {MAX_CLASSES}",
                train.num_classes()
            )));
        }
        if k == 0 || k > train.len() {
            return Err(Error::InvalidParameter(format!("k = {k} out of range")));
        }
        if !(alpha > F::zero() && alpha < F::one()) {
            return Err(Error::InvalidParameter("alpha must lie in (0, 1)".into()));
        }
        if gamma.len() != train.num_classes() || gamma.iter().any(|&g| !(g > F::zero())) {
            return Err(Error::InvalidParameter(
                "gamma needs one positive entry per class".into(),
            ));
        }
        Ok(EknnModel {
            train: train.clone(),
            k,
            alpha,
            gamma,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> F {
        self.alpha
    }

    pub fn gamma(&self) -> &[F] {
        &self.gamma
    }

    pub fn train(&self) -> &Dataset<F> {
        &self.train
    }

    pub fn num_classes(&self) -> usize {
        self.train.num_classes()
    }

    pub fn predict_mass(&self, x: &[F]) -> Result<MassFunction<F>> {
        crate::classifiers::check_dim(self.train.n_features(), x)?;
        let c = self.num_classes();
        let full = full_set(c);
        let mut m = MassFunction::vacuous(c)?;
        for (i, d2) in k_nearest(&self.train, x, self.k) {
            let y = self.train.label(i);
            let support = self.alpha * (-self.gamma[y] * d2).exp();
            if support > F::zero() {
                let focal = if c == 1 { full } else { singleton(y) };
                m = m.combine(&MassFunction::simple(c, focal, support)?)?;
            }
        }
        Ok(m)
    }
}
