//! Aleatoric / epistemic / total uncertainty from three strategies: entropy
//! decomposition of an ensemble, distance to RBF class centroids, and
//! belief functions from the evidential K-NN.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifiers::{check_dim, TreeEnsemble};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::evidence::{EknnModel, MassFunction};
use crate::scalar::{entropy_bits, squared_euclidean, Scalar};

const DIST_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    EnsembleEntropy,
    CentroidRbf,
    Belief,
    /// Reserved name; no quantifier implements it.
    Likelihood,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::EnsembleEntropy,
        Strategy::CentroidRbf,
        Strategy::Belief,
        Strategy::Likelihood,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::EnsembleEntropy => "ensemble-entropy",
            Strategy::CentroidRbf => "centroid-rbf",
            Strategy::Belief => "belief",
            Strategy::Likelihood => "likelihood",
        }
    }

    pub fn is_available(self) -> bool {
        self != Strategy::Likelihood
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown uncertainty strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct UncertaintyEstimate<F: Scalar> {
    pub aleatoric: F,
    pub epistemic: F,
    pub total: F,
    pub strategy: Strategy,
}

/// Anything that maps a feature vector to an uncertainty triple.
pub trait UncertaintyQuantifier<F: Scalar>: Send + Sync {
    fn strategy(&self) -> Strategy;

    fn estimate(&self, x: &[F]) -> Result<UncertaintyEstimate<F>>;
}

fn check_distribution<F: Scalar>(p: &[F]) -> Result<()> {
    let tol = F::lit(DIST_TOL);
    if p.is_empty() || p.iter().any(|&v| !v.is_finite() || v < -tol) {
        return Err(Error::InvalidDistribution(format!("{p:?}")));
    }
    let s: F = p.iter().copied().sum();
    if (s - F::one()).abs() > tol {
        return Err(Error::InvalidDistribution(format!("entries sum to {s}")));
    }
    Ok(())
}

/// AU is the mean member entropy, TU the entropy of the mean prediction,
/// EU their difference.
pub fn entropy_decompose<F: Scalar>(member_probas: &[Vec<F>]) -> Result<UncertaintyEstimate<F>> {
    let first = member_probas
        .first()
        .ok_or_else(|| Error::InvalidDistribution("empty ensemble".into()))?;
    let c = first.len();
    let mut mean = vec![F::zero(); c];
    let mut au = F::zero();
    for p in member_probas {
        if p.len() != c {
            return Err(Error::DimensionMismatch {
                expected: c,
                got: p.len(),
            });
        }
        check_distribution(p)?;
        au = au + entropy_bits(p);
        for (m, &v) in mean.iter_mut().zip(p) {
            *m = *m + v;
        }
    }
    let k = F::from_usize_lossy(member_probas.len());
    au = au / k;
    for m in &mut mean {
        *m = *m / k;
    }
    let tu = entropy_bits(&mean);
    // the Jensen gap is nonnegative; only rounding can push it below zero
    let eu = (tu - au).max(F::zero());
    Ok(UncertaintyEstimate {
        aleatoric: au,
        epistemic: eu,
        total: au + eu,
        strategy: Strategy::EnsembleEntropy,
    })
}

impl<F: Scalar> UncertaintyQuantifier<F> for TreeEnsemble<F> {
    fn strategy(&self) -> Strategy {
        Strategy::EnsembleEntropy
    }

    fn estimate(&self, x: &[F]) -> Result<UncertaintyEstimate<F>> {
        entropy_decompose(&self.member_probas(x)?)
    }
}

/// How the centroid strategy derives AU.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CentroidAu {
    /// Entropy of the softmax over the class kernels.
    #[default]
    SoftmaxEntropy,
    /// That entropy minus EU. Mixes units and may go negative.
    TotalMinusEpistemic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CentroidModel<F: Scalar> {
    centroids: Vec<Vec<F>>,
    /// Class index of each centroid.
    classes: Vec<usize>,
    sigma: F,
    au_variant: CentroidAu,
}

/// One centroid per class; every class must have training rows.
pub fn centroid_fit<F: Scalar>(train: &Dataset<F>, sigma: F) -> Result<CentroidModel<F>> {
    let counts = train.class_counts();
    if let Some(empty) = counts.iter().position(|&n| n == 0) {
        return Err(Error::InvalidDataset(format!("class {empty} has no training rows")));
    }
    centroid_fit_present(train, sigma)
}

/// Like [`centroid_fit`] but skips classes absent from `train`.
pub fn centroid_fit_present<F: Scalar>(train: &Dataset<F>, sigma: F) -> Result<CentroidModel<F>> {
    if !(sigma > F::zero() && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma {sigma} must be positive")));
    }
    if train.is_empty() {
        return Err(Error::InvalidDataset("empty training set".into()));
    }
    let q = train.n_features();
    let c = train.num_classes();
    let mut sums = vec![vec![F::zero(); q]; c];
    let mut counts = vec![0usize; c];
    for (row, &y) in train.rows().zip(train.labels()) {
        counts[y] += 1;
        for (s, &v) in sums[y].iter_mut().zip(row) {
            *s = *s + v;
        }
    }
    let mut classes = Vec::new();
    let mut centroids = Vec::new();
    for (y, (s, &n)) in sums.into_iter().zip(&counts).enumerate() {
        if n == 0 {
            continue;
        }
        let nf = F::from_usize_lossy(n);
        classes.push(y);
        centroids.push(s.into_iter().map(|v| v / nf).collect());
    }
    Ok(CentroidModel {
        centroids,
        classes,
        sigma,
        au_variant: CentroidAu::default(),
    })
}

impl<F: Scalar> CentroidModel<F> {
    pub fn with_au_variant(mut self, variant: CentroidAu) -> Self {
        self.au_variant = variant;
        self
    }

    pub fn centroids(&self) -> &[Vec<F>] {
        &self.centroids
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn sigma(&self) -> F {
        self.sigma
    }

    pub fn au_variant(&self) -> CentroidAu {
        self.au_variant
    }

    /// Per-class RBF certainty `exp(-(|x - e_y|^2 / Q) / (2 sigma^2))`.
    pub fn kernel_values(&self, x: &[F]) -> Result<Vec<F>> {
        let q = self.centroids[0].len();
        check_dim(q, x)?;
        let qf = F::from_usize_lossy(q);
        let two_s2 = F::lit(2.0) * self.sigma * self.sigma;
        Ok(self
            .centroids
            .iter()
            .map(|e| (-(squared_euclidean(x, e) / qf) / two_s2).exp())
            .collect())
    }
}

fn softmax<F: Scalar>(v: &[F]) -> Vec<F> {
    let mx = v.iter().copied().fold(F::neg_infinity(), F::max);
    let e: Vec<F> = v.iter().map(|&u| (u - mx).exp()).collect();
    let s: F = e.iter().copied().sum();
    e.into_iter().map(|u| u / s).collect()
}

pub fn centroid_uncertainty<F: Scalar>(model: &CentroidModel<F>, x: &[F]) -> Result<UncertaintyEstimate<F>> {
    let u = model.kernel_values(x)?;
    let ec = u.iter().copied().fold(F::zero(), F::max);
    // EC underflows to 0 far from every centroid; report infinite EU then
    let eu = F::one() / ec;
    let tu = entropy_bits(&softmax(&u));
    let au = match model.au_variant {
        CentroidAu::SoftmaxEntropy => tu,
        CentroidAu::TotalMinusEpistemic => tu - eu,
    };
    Ok(UncertaintyEstimate {
        aleatoric: au,
        epistemic: eu,
        total: tu,
        strategy: Strategy::CentroidRbf,
    })
}

impl<F: Scalar> UncertaintyQuantifier<F> for CentroidModel<F> {
    fn strategy(&self) -> Strategy {
        Strategy::CentroidRbf
    }

    fn estimate(&self, x: &[F]) -> Result<UncertaintyEstimate<F>> {
        centroid_uncertainty(self, x)
    }
}

/// AU is the discord of `m`, EU its non-specificity.
pub fn belief_uncertainty<F: Scalar>(m: &MassFunction<F>) -> UncertaintyEstimate<F> {
    let au = m.discord();
    let eu = m.nonspecificity();
    UncertaintyEstimate {
        aleatoric: au,
        epistemic: eu,
        total: au + eu,
        strategy: Strategy::Belief,
    }
}

impl<F: Scalar> UncertaintyQuantifier<F> for EknnModel<F> {
    fn strategy(&self) -> Strategy {
        Strategy::Belief
    }

    fn estimate(&self, x: &[F]) -> Result<UncertaintyEstimate<F>> {
        Ok(belief_uncertainty(&self.predict_mass(x)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn opposing_diracs() {
        let u = entropy_decompose(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!((u.aleatoric, u.total, u.epistemic), (0.0, 1.0, 1.0));
    }

    #[test]
    fn identical_members_have_no_epistemic_part() {
        let u = entropy_decompose(&vec![vec![0.5f64, 0.5]; 5]).unwrap();
        assert!(close(u.aleatoric, 1.0, 1e-15) && u.epistemic == 0.0);
    }

    #[test]
    fn two_member_worked_example() {
        let h = |p: f64| -(p * p.log2() + (1.0 - p) * (1.0 - p).log2());
        let u = entropy_decompose(&[vec![0.8, 0.2], vec![0.6, 0.4]]).unwrap();
        assert!(close(u.aleatoric, (h(0.8) + h(0.6)) / 2.0, 1e-12));
        assert!(close(u.total, h(0.7), 1e-12));
        assert!(close(u.aleatoric, 0.84645, 1e-4));
        assert!(close(u.total, 0.88129, 1e-4));
        assert!(close(u.epistemic, 0.03484, 1e-4));
    }

    #[test]
    fn decompose_rejects_bad_input() {
        assert!(entropy_decompose::<f64>(&[]).is_err());
        assert!(entropy_decompose(&[vec![0.5, 0.6]]).is_err());
        assert!(entropy_decompose(&[vec![0.5, 0.5], vec![1.0]]).is_err());
    }

    fn two_class() -> Dataset<f64> {
        Dataset::new(
            vec![vec![1.0, 1.0], vec![-1.0, -1.0], vec![4.0, 0.0]],
            vec![0, 0, 1],
            vec!["a".into(), "b".into()],
            vec!["p".into(), "q".into()],
        )
        .unwrap()
    }

    #[test]
    fn centroids_are_class_means() {
        let m = centroid_fit(&two_class(), 1.0).unwrap();
        assert_eq!(m.centroids(), &[vec![0.0, 0.0], vec![4.0, 0.0]]);
        assert_eq!(m.sigma(), 1.0);
        assert!(centroid_fit(&two_class(), 0.0).is_err());
        let missing = two_class().subset(&[0, 1]);
        assert!(centroid_fit(&missing, 1.0).is_err());
        let partial = centroid_fit_present(&missing, 1.0).unwrap();
        assert_eq!(partial.classes(), &[0]);
    }

    #[test]
    fn centroid_kernel_oracles() {
        let m = centroid_fit(&two_class(), 1.0).unwrap();
        let at = centroid_uncertainty(&m, &[0.0, 0.0]).unwrap();
        assert_eq!(at.epistemic, 1.0);
        // |x - e|^2 / Q = 4 / 2 = 2
        let u = m.kernel_values(&[2.0, 0.0]).unwrap();
        assert!(close(u[0], (-1.0f64).exp(), 1e-15));
        // equidistant from both centroids: uniform softmax
        let mid = centroid_uncertainty(&m, &[2.0, 0.0]).unwrap();
        assert!(close(mid.aleatoric, 1.0, 1e-15));
        assert!(close(mid.epistemic, 1.0f64.exp(), 1e-12));
    }

    #[test]
    fn centroid_variant_subtracts() {
        let m = centroid_fit(&two_class(), 1.0)
            .unwrap()
            .with_au_variant(CentroidAu::TotalMinusEpistemic);
        let u = centroid_uncertainty(&m, &[1.0, 0.5]).unwrap();
        assert!(close(u.aleatoric, u.total - u.epistemic, 1e-15));
    }

    #[test]
    fn belief_oracles() {
        let v = MassFunction::<f64>::vacuous(2).unwrap();
        let u = belief_uncertainty(&v);
        assert_eq!((u.aleatoric, u.epistemic), (0.0, 1.0));
        let split = MassFunction::new(2, [(0b01, 0.5), (0b10, 0.5)]).unwrap();
        let u = belief_uncertainty(&split);
        assert!(close(u.aleatoric, 1.0, 1e-15) && u.epistemic == 0.0);
        let d = belief_uncertainty(&MassFunction::<f64>::categorical(3, 2).unwrap());
        assert_eq!((d.aleatoric, d.epistemic, d.total), (0.0, 0.0, 0.0));
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("bayes".parse::<Strategy>().is_err());
        assert!(!Strategy::Likelihood.is_available());
    }
}
