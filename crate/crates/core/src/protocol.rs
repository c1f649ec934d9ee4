//! Uncertainty-driven routing: reject on high EU, counterfactual on high AU,
//! feature importance otherwise. Also rejection curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{Counterfactual, Explanation, ImportanceVector, RejectionRecord};
use crate::scalar::Scalar;
use crate::uncertainty::{Strategy, UncertaintyEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Threshold {
    Absolute(f64),
    /// Resolved to an absolute value by [`RoutingPolicy::calibrate`].
    Quantile(f64),
}

impl Threshold {
    fn resolve(self, sorted: &[f64]) -> Result<f64> {
        match self {
            Threshold::Absolute(t) => Ok(t),
            Threshold::Quantile(q) => quantile(sorted, q),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub strategy: Strategy,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingPolicy {
    pub eu: Threshold,
    pub au: Threshold,
    pub calibration: Option<Calibration>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    RejectedInsufficientTraining,
    Counterfactual,
    FeatureImportance,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::RejectedInsufficientTraining => "rejected-insufficient-training",
            Verdict::Counterfactual => "counterfactual",
            Verdict::FeatureImportance => "feature-importance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RoutedExplanation<F: Scalar> {
    pub verdict: Verdict,
    pub explanation: Explanation<F>,
    pub uncertainty: UncertaintyEstimate<F>,
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n - 1) q`). `sorted` must be ascending.
pub fn quantile(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::InvalidParameter("quantile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("quantile level {q} outside [0, 1]")));
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn sorted_component<F: Scalar>(us: &[UncertaintyEstimate<F>], pick: impl Fn(&UncertaintyEstimate<F>) -> F) -> Vec<f64> {
    let mut v: Vec<f64> = us.iter().map(|u| pick(u).as_f64()).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// The one strategy shared by every estimate.
pub fn common_strategy<F: Scalar>(us: &[UncertaintyEstimate<F>]) -> Result<Strategy> {
    let first = us
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty uncertainty list".into()))?
        .strategy;
    if us.iter().any(|u| u.strategy != first) {
        return Err(Error::MixedStrategies);
    }
    Ok(first)
}

impl RoutingPolicy {
    pub fn new(eu: Threshold, au: Threshold) -> Self {
        RoutingPolicy {
            eu,
            au,
            calibration: None,
        }
    }

    /// Resolves quantile thresholds on a calibration distribution.
    pub fn calibrate<F: Scalar>(&self, uncertainties: &[UncertaintyEstimate<F>]) -> Result<RoutingPolicy> {
        let strategy = common_strategy(uncertainties)?;
        let eu = self.eu.resolve(&sorted_component(uncertainties, |u| u.epistemic))?;
        let au = self.au.resolve(&sorted_component(uncertainties, |u| u.aleatoric))?;
        Ok(RoutingPolicy {
            eu: Threshold::Absolute(eu),
            au: Threshold::Absolute(au),
            calibration: Some(Calibration {
                strategy,
                n_points: uncertainties.len(),
            }),
        })
    }

    /// Absolute `(eu, au)` thresholds; fails while a quantile is unresolved.
    pub fn thresholds(&self) -> Result<(f64, f64)> {
        match (self.eu, self.au) {
            (Threshold::Absolute(e), Threshold::Absolute(a)) => Ok((e, a)),
            _ => Err(Error::InvalidParameter("routing policy is not calibrated".into())),
        }
    }

    /// Routing decision from the uncertainty alone.
    pub fn verdict<F: Scalar>(&self, u: &UncertaintyEstimate<F>) -> Result<Verdict> {
        if let Some(c) = &self.calibration {
            if c.strategy != u.strategy {
                return Err(Error::MixedStrategies);
            }
        }
        let (te, ta) = self.thresholds()?;
        Ok(if u.epistemic.as_f64() >= te {
            Verdict::RejectedInsufficientTraining
        } else if u.aleatoric.as_f64() >= ta {
            Verdict::Counterfactual
        } else {
            Verdict::FeatureImportance
        })
    }
}

/// Explanation producers the router dispatches to.
pub trait Explainers<F: Scalar> {
    fn importance(&self, x: &[F]) -> Result<ImportanceVector<F>>;

    fn counterfactual(&self, x: &[F]) -> Result<Counterfactual<F>>;
}

/// Routes one instance. Only the explainer picked by the verdict runs.
pub fn route<F: Scalar, E: Explainers<F> + ?Sized>(
    policy: &RoutingPolicy,
    x: &[F],
    uncertainty: UncertaintyEstimate<F>,
    explainers: &E,
) -> Result<RoutedExplanation<F>> {
    let verdict = policy.verdict(&uncertainty)?;
    let context = |e: Error| Error::Routing {
        context: format!("{} branch", verdict.name()),
        source: Box::new(e),
    };
    let explanation = match verdict {
        Verdict::RejectedInsufficientTraining => {
            let (te, _) = policy.thresholds()?;
            Explanation::Rejection(RejectionRecord::new(uncertainty.epistemic, F::lit(te)))
        }
        Verdict::Counterfactual => Explanation::Counterfactual(explainers.counterfactual(x).map_err(context)?),
        Verdict::FeatureImportance => Explanation::FeatureImportance(explainers.importance(x).map_err(context)?),
    };
    Ok(RoutedExplanation {
        verdict,
        explanation,
        uncertainty,
    })
}

/// Share of estimates with `EU >= threshold`.
pub fn fraction_rejected<F: Scalar>(uncertainties: &[UncertaintyEstimate<F>], threshold: f64) -> f64 {
    if uncertainties.is_empty() {
        return 0.0;
    }
    let n = uncertainties
        .iter()
        .filter(|u| u.epistemic.as_f64() >= threshold)
        .count();
    n as f64 / uncertainties.len() as f64
}

/// `(threshold, fraction rejected)` at `n_thresholds` evenly spaced EU
/// thresholds from the minimum to the maximum observed EU.
pub fn rejection_curve<F: Scalar>(uncertainties: &[UncertaintyEstimate<F>], n_thresholds: usize) -> Result<Vec<(f64, f64)>> {
    if uncertainties.is_empty() {
        return Err(Error::InvalidParameter("rejection curve of an empty set".into()));
    }
    if n_thresholds == 0 {
        return Err(Error::InvalidParameter("n_thresholds must be >= 1".into()));
    }
    let eu = sorted_component(uncertainties, |u| u.epistemic);
    let (lo, hi) = (eu[0], eu[eu.len() - 1]);
    Ok((0..n_thresholds)
        .map(|i| {
            let t = if i + 1 == n_thresholds && n_thresholds > 1 {
                hi
            } else if n_thresholds == 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (n_thresholds - 1) as f64
            };
            // eu is sorted, so the count at or above t is a partition point
            let below = eu.partition_point(|&v| v < t);
            (t, (eu.len() - below) as f64 / eu.len() as f64)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UncertaintyKind {
    Aleatoric,
    Epistemic,
}

/// Index of the largest requested component, lowest index on ties.
pub fn most_uncertain<F: Scalar>(uncertainties: &[UncertaintyEstimate<F>], kind: UncertaintyKind) -> Result<usize> {
    if uncertainties.is_empty() {
        return Err(Error::InvalidParameter("no instances".into()));
    }
    let pick = |u: &UncertaintyEstimate<F>| match kind {
        UncertaintyKind::Aleatoric => u.aleatoric,
        UncertaintyKind::Epistemic => u.epistemic,
    };
    let mut best = 0;
    for (i, u) in uncertainties.iter().enumerate().skip(1) {
        if pick(u) > pick(&uncertainties[best]) {
            best = i;
        }
    }
    Ok(best)
}
