use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{check_dim, KnnModel, ProbabilisticClassifier};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest feature count accepted by [`shapley_exact`].
pub const MAX_EXACT_FEATURES: usize = 12;

/// Evaluates a class score along a walk of hybrid points that change one
/// coordinate at a time, so models can update incrementally.
pub trait CoalitionScorer<F: Scalar>: Sync {
    type Cursor: Send;

    fn n_features(&self) -> usize;

    fn cursor(&self, start: &[F]) -> Self::Cursor;

    fn set(&self, cursor: &mut Self::Cursor, feature: usize, value: F);

    fn score(&self, cursor: &mut Self::Cursor, class: usize) -> Result<F>;
}

/// Adapts any classifier: every score is a fresh `predict_proba` call.
#[derive(Debug, Clone, Copy)]
pub struct ProbaScorer<'a, M>(pub &'a M);

impl<F: Scalar, M: ProbabilisticClassifier<F>> CoalitionScorer<F> for ProbaScorer<'_, M> {
    type Cursor = Vec<F>;

    fn n_features(&self) -> usize {
        self.0.n_features()
    }

    fn cursor(&self, start: &[F]) -> Vec<F> {
        start.to_vec()
    }

    fn set(&self, cursor: &mut Vec<F>, feature: usize, value: F) {
        cursor[feature] = value;
    }

    fn score(&self, cursor: &mut Vec<F>, class: usize) -> Result<F> {
        Ok(self.0.predict_proba(cursor)?[class])
    }
}

/// Scorer backed by a plain function of `(z, class)`.
#[derive(Debug, Clone, Copy)]
pub struct FnScorer<G> {
    pub n_features: usize,
    pub f: G,
}

impl<F: Scalar, G: Fn(&[F], usize) -> F + Sync> CoalitionScorer<F> for FnScorer<G> {
    type Cursor = Vec<F>;

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn cursor(&self, start: &[F]) -> Vec<F> {
        start.to_vec()
    }

    fn set(&self, cursor: &mut Vec<F>, feature: usize, value: F) {
        cursor[feature] = value;
    }

    fn score(&self, cursor: &mut Vec<F>, class: usize) -> Result<F> {
        Ok((self.f)(cursor, class))
    }
}

pub struct KnnCursor<F> {
    z: Vec<F>,
    dist: Vec<F>,
    best_d: Vec<F>,
    best_i: Vec<usize>,
}

/// Keeps squared distances to every training row and patches them on each
/// coordinate change: O(N) per step instead of O(NQ).
impl<F: Scalar> CoalitionScorer<F> for KnnModel<F> {
    type Cursor = KnnCursor<F>;

    fn n_features(&self) -> usize {
        self.train().n_features()
    }

    fn cursor(&self, start: &[F]) -> KnnCursor<F> {
        let dist = self
            .train()
            .rows()
            .map(|r| crate::scalar::squared_euclidean(r, start))
            .collect();
        KnnCursor {
            z: start.to_vec(),
            dist,
            best_d: Vec::with_capacity(self.k() + 1),
            best_i: Vec::with_capacity(self.k() + 1),
        }
    }

    fn set(&self, cur: &mut KnnCursor<F>, feature: usize, value: F) {
        let old = cur.z[feature];
        if old == value {
            return;
        }
        cur.z[feature] = value;
        let q = self.train().n_features();
        let flat = self.train().features_flat();
        for (i, d) in cur.dist.iter_mut().enumerate() {
            let t = flat[i * q + feature];
            let (a, b) = (value - t, old - t);
            *d = *d + (a * a - b * b);
        }
    }

    fn score(&self, cur: &mut KnnCursor<F>, class: usize) -> Result<F> {
        let k = self.k();
        cur.best_d.clear();
        cur.best_i.clear();
        for (i, &d) in cur.dist.iter().enumerate() {
            if cur.best_d.len() == k && d >= cur.best_d[k - 1] {
                continue;
            }
            let pos = cur.best_d.partition_point(|&b| b <= d);
            cur.best_d.insert(pos, d);
            cur.best_i.insert(pos, i);
            if cur.best_d.len() > k {
                cur.best_d.pop();
                cur.best_i.pop();
            }
        }
        let labels = self.train().labels();
        let hits = cur.best_i.iter().filter(|&&i| labels[i] == class).count();
        Ok(F::from_usize_lossy(hits) / F::from_usize_lossy(k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Exact,
    PermutationSampled,
}

/// How sampled mode pairs orderings with background rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingScheme {
    /// One random background row per ordering: `Q + 1` scores per sample.
    #[default]
    Paired,
    /// Every ordering walked against the whole background.
    FullBackground,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ImportanceVector<F: Scalar> {
    pub values: Vec<F>,
    pub target_class: usize,
    pub estimator: Estimator,
    /// Orderings drawn; 0 in exact mode.
    pub n_samples: usize,
    /// Standard error of each sampled coordinate; empty in exact mode.
    pub std_error: Vec<F>,
}

/// Uniform subsample of at most `cap` rows, kept in original order.
pub fn background_sample<F: Scalar>(train: &Dataset<F>, cap: usize, seed: u64) -> Dataset<F> {
    if train.len() <= cap {
        return train.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, train.len(), cap).into_vec();
    idx.sort_unstable();
    train.subset(&idx)
}

fn check_inputs<F: Scalar, S: CoalitionScorer<F>>(scorer: &S, background: &Dataset<F>, x: &[F]) -> Result<()> {
    if background.is_empty() {
        return Err(Error::InvalidParameter("empty background".into()));
    }
    check_dim(scorer.n_features(), x)?;
    check_dim(scorer.n_features(), background.row(0))
}

/// Mean score over background rows of the hybrid taking `x` on `subset`
/// and the background row elsewhere.
pub fn coalition_value<F: Scalar, S: CoalitionScorer<F>>(
    scorer: &S,
    background: &Dataset<F>,
    x: &[F],
    subset: &[usize],
    target_class: usize,
) -> Result<F> {
    check_inputs(scorer, background, x)?;
    if let Some(&bad) = subset.iter().find(|&&q| q >= x.len()) {
        return Err(Error::InvalidParameter(format!("feature {bad} out of range")));
    }
    let mut total = F::zero();
    for b in background.rows() {
        let mut cur = scorer.cursor(b);
        for &q in subset {
            scorer.set(&mut cur, q, x[q]);
        }
        total = total + scorer.score(&mut cur, target_class)?;
    }
    Ok(total / F::from_usize_lossy(background.len()))
}

/// Coalition values for every subset, indexed by bit mask. Each background
/// row is walked through all masks in Gray-code order.
fn all_coalition_values<F: Scalar, S: CoalitionScorer<F>>(
    scorer: &S,
    background: &Dataset<F>,
    x: &[F],
    target_class: usize,
) -> Result<Vec<F>> {
    let q = x.len();
    let n = 1usize << q;
    let mut v = vec![F::zero(); n];
    for b in background.rows() {
        let mut cur = scorer.cursor(b);
        let mut mask = 0usize;
        v[0] = v[0] + scorer.score(&mut cur, target_class)?;
        for i in 1..n {
            let bit = i.trailing_zeros() as usize;
            mask ^= 1 << bit;
            let val = if mask >> bit & 1 == 1 { x[bit] } else { b[bit] };
            scorer.set(&mut cur, bit, val);
            v[mask] = v[mask] + scorer.score(&mut cur, target_class)?;
        }
    }
    let m = F::from_usize_lossy(background.len());
    for val in &mut v {
        *val = *val / m;
    }
    Ok(v)
}

/// Exact Shapley values by enumerating all `2^Q` coalitions.
pub fn shapley_exact<F: Scalar, S: CoalitionScorer<F>>(
    scorer: &S,
    background: &Dataset<F>,
    x: &[F],
    target_class: usize,
) -> Result<ImportanceVector<F>> {
    check_inputs(scorer, background, x)?;
    let q = x.len();
    if q > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures(q, MAX_EXACT_FEATURES));
    }
    let v = all_coalition_values(scorer, background, x, target_class)?;
    // weight(s) = s! (Q - s - 1)! / Q!
    let mut weight = vec![0.0f64; q];
    for (s, w) in weight.iter_mut().enumerate() {
        let mut acc = 1.0 / q as f64;
        // 1 / (Q * C(Q-1, s))
        for j in 0..s {
            acc *= (j + 1) as f64 / (q - 1 - j) as f64;
        }
        *w = acc;
    }
    let weight: Vec<F> = weight.into_iter().map(F::lit).collect();
    let mut phi = vec![F::zero(); q];
    for (feature, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << feature;
        let mut acc = F::zero();
        for mask in 0..(1usize << q) {
            if mask & bit == 0 {
                let s = mask.count_ones() as usize;
                acc = acc + weight[s] * (v[mask | bit] - v[mask]);
            }
        }
        *p = acc;
    }
    Ok(ImportanceVector {
        values: phi,
        target_class,
        estimator: Estimator::Exact,
        n_samples: 0,
        std_error: Vec::new(),
    })
}

/// Sampling settings for [`shapley_sampled`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub n_permutations: usize,
    pub seed: u64,
    pub scheme: SamplingScheme,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            n_permutations: 200,
            seed: 0,
            scheme: SamplingScheme::Paired,
        }
    }
}

/// Monte Carlo Shapley values from random feature orderings. The draws depend
/// only on the seed, `Q` and the background size, so two calls with equal
/// seeds share their orderings.
pub fn shapley_sampled<F: Scalar, S: CoalitionScorer<F>>(
    scorer: &S,
    background: &Dataset<F>,
    x: &[F],
    target_class: usize,
    params: &SamplingParams,
) -> Result<ImportanceVector<F>> {
    check_inputs(scorer, background, x)?;
    if params.n_permutations == 0 {
        return Err(Error::InvalidParameter("n_permutations must be >= 1".into()));
    }
    let q = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..q).collect();
    let mut sum = vec![0.0f64; q];
    let mut sum_sq = vec![0.0f64; q];
    let mut contrib = vec![0.0f64; q];
    let all_rows: Vec<usize> = (0..background.len()).collect();
    for _ in 0..params.n_permutations {
        order.shuffle(&mut rng);
        let rows = match params.scheme {
            SamplingScheme::Paired => std::slice::from_ref(&all_rows[rng.random_range(0..background.len())]),
            SamplingScheme::FullBackground => &all_rows[..],
        };
        contrib.iter_mut().for_each(|c| *c = 0.0);
        for &r in rows {
            let mut cur = scorer.cursor(background.row(r));
            let mut prev = scorer.score(&mut cur, target_class)?;
            for &feature in &order {
                scorer.set(&mut cur, feature, x[feature]);
                let now = scorer.score(&mut cur, target_class)?;
                contrib[feature] += (now - prev).as_f64();
                prev = now;
            }
        }
        let m = rows.len() as f64;
        for j in 0..q {
            let c = contrib[j] / m;
            sum[j] += c;
            sum_sq[j] += c * c;
        }
    }
    let n = params.n_permutations as f64;
    let values = sum.iter().map(|&s| F::lit(s / n)).collect();
    let std_error = sum
        .iter()
        .zip(&sum_sq)
        .map(|(&s, &ss)| {
            if params.n_permutations < 2 {
                return F::zero();
            }
            let mean = s / n;
            let var = ((ss - n * mean * mean) / (n - 1.0)).max(0.0);
            F::lit((var / n).sqrt())
        })
        .collect();
    Ok(ImportanceVector {
        values,
        target_class,
        estimator: Estimator::PermutationSampled,
        n_samples: params.n_permutations,
        std_error,
    })
}

/// Exact mode when `Q` allows it, sampled otherwise.
pub fn shapley_auto<F: Scalar, S: CoalitionScorer<F>>(
    scorer: &S,
    background: &Dataset<F>,
    x: &[F],
    target_class: usize,
    exact_max_features: usize,
    params: &SamplingParams,
) -> Result<ImportanceVector<F>> {
    if x.len() <= exact_max_features.min(MAX_EXACT_FEATURES) {
        shapley_exact(scorer, background, x, target_class)
    } else {
        shapley_sampled(scorer, background, x, target_class, params)
    }
}
