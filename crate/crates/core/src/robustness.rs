//! Robustness of explanations: local Lipschitz instability of importance
//! vectors and counterfactual dissimilarity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::Counterfactual;
use crate::scalar::{euclidean, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzParams {
    pub epsilon: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for LipschitzParams {
    fn default() -> Self {
        LipschitzParams {
            epsilon: 0.1,
            n_samples: 30,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LipschitzEstimate<F: Scalar> {
    /// Largest observed `|phi(x) - phi(x')| / |x - x'|`.
    pub value: F,
    pub n_samples: usize,
    pub epsilon: F,
    pub argmax_perturbation: Vec<F>,
}

/// Point drawn uniformly from the open L2 ball of radius `epsilon` around
/// `center`, never equal to `center`.
pub fn sample_in_ball<F: Scalar, R: Rng + ?Sized>(rng: &mut R, center: &[F], epsilon: F) -> Vec<F> {
    let q = center.len();
    loop {
        let dir: Vec<f64> = (0..q).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        let r = epsilon.as_f64() * u.powf(1.0 / q as f64);
        let p: Vec<F> = center
            .iter()
            .zip(&dir)
            .map(|(&c, &d)| c + F::lit(r * d / norm))
            .collect();
        if p != center {
            return p;
        }
    }
}

/// Samples the epsilon-ball around `x` and keeps the worst ratio of
/// explanation change to input change.
pub fn lipschitz_estimate<F, E>(explainer: E, x: &[F], params: &LipschitzParams) -> Result<LipschitzEstimate<F>>
where
    F: Scalar,
    E: Fn(&[F]) -> Result<Vec<F>>,
{
    if params.n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    if !(params.epsilon > 0.0 && params.epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon {} must be positive", params.epsilon)));
    }
    let wrap = |p: &[F], e: Error| Error::Explainer {
        perturbation: p.iter().map(|v| v.as_f64()).collect(),
        source: Box::new(e),
    };
    let base = explainer(x).map_err(|e| wrap(x, e))?;
    let epsilon = F::lit(params.epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best = F::zero();
    let mut best_point: Option<Vec<F>> = None;
    for _ in 0..params.n_samples {
        let p = sample_in_ball(&mut rng, x, epsilon);
        let phi = explainer(&p).map_err(|e| wrap(&p, e))?;
        if phi.len() != base.len() {
            return Err(wrap(
                &p,
                Error::DimensionMismatch {
                    expected: base.len(),
                    got: phi.len(),
                },
            ));
        }
        let ratio = euclidean(&base, &phi) / euclidean(x, &p);
        if best_point.is_none() || ratio > best {
            best = ratio;
            best_point = Some(p);
        }
    }
    Ok(LipschitzEstimate {
        value: best,
        n_samples: params.n_samples,
        epsilon,
        argmax_perturbation: best_point.unwrap_or_default(),
    })
}

/// Euclidean distance from `x` to the counterfactual instance.
pub fn cf_dissimilarity<F: Scalar>(x: &[F], cf: &Counterfactual<F>) -> Result<F> {
    if x.len() != cf.instance.len() {
        return Err(Error::DimensionMismatch {
            expected: cf.instance.len(),
            got: x.len(),
        });
    }
    Ok(euclidean(x, &cf.instance))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_explainer_is_perfectly_robust() {
        let est = lipschitz_estimate(|_: &[f64]| Ok(vec![1.0, 2.0]), &[0.5, 0.5], &LipschitzParams::default()).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.n_samples, 30);
        assert_eq!(est.epsilon, 0.1);
    }

    #[test]
    fn doubling_explainer_has_constant_two() {
        let est = lipschitz_estimate(
            |z: &[f64]| Ok(z.iter().map(|v| 2.0 * v).collect()),
            &[0.1, 0.7, 0.3],
            &LipschitzParams::default(),
        )
        .unwrap();
        assert!((est.value - 2.0).abs() < 1e-9);
        assert!(euclidean(&est.argmax_perturbation, &[0.1, 0.7, 0.3]) <= 0.1);
    }

    #[test]
    fn failures_carry_the_perturbation() {
        let x = [0.0, 0.0];
        let err = lipschitz_estimate(
            |z: &[f64]| {
                if z == [0.0, 0.0] {
                    Ok(vec![0.0])
                } else {
                    Err(Error::InvalidParameter("boom".into()))
                }
            },
            &x,
            &LipschitzParams::default(),
        )
        .unwrap_err();
        match err {
            Error::Explainer { perturbation, .. } => {
                assert_eq!(perturbation.len(), 2);
                assert!(perturbation != vec![0.0, 0.0]);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn dissimilarity_examples() {
        let cf = Counterfactual {
            instance: vec![3.0, 4.0],
            source_index: 0,
            counter_label: 1,
            distance: 5.0,
        };
        assert_eq!(cf_dissimilarity(&[0.0, 0.0], &cf).unwrap(), 5.0);
        assert_eq!(cf_dissimilarity(&[3.0, 4.0], &cf).unwrap(), 0.0);
        assert!(cf_dissimilarity(&[0.0], &cf).is_err());
    }
}
