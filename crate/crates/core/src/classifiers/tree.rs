use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_dim, ProbabilisticClassifier};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum Node<F: Scalar> {
    /// `x[feature] <= threshold` goes to `left`.
    Split {
        feature: usize,
        threshold: F,
        left: usize,
        right: usize,
    },
    Leaf { proba: Vec<F> },
}

/// Axis-aligned CART tree grown with Gini impurity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DecisionTree<F: Scalar> {
    nodes: Vec<Node<F>>,
    n_features: usize,
    num_classes: usize,
}

impl<F: Scalar> DecisionTree<F> {
    pub fn nodes(&self) -> &[Node<F>] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk<F: Scalar>(nodes: &[Node<F>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_proba(&self, x: &[F]) -> &[F] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { proba } => return proba,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Builds a tree from explicit nodes; node 0 is the root.
    pub fn from_nodes(nodes: Vec<Node<F>>, n_features: usize, num_classes: usize) -> Result<Self> {
        for (i, n) in nodes.iter().enumerate() {
            match n {
                Node::Leaf { proba } if proba.len() != num_classes => {
                    return Err(Error::InvalidParameter(format!(
                        "leaf {i} has {} probabilities, expected {num_classes}",
                        proba.len()
                    )))
                }
                Node::Split {
                    feature,
                    left,
                    right,
                    ..
                } if *feature >= n_features || *left >= nodes.len() || *right >= nodes.len() => {
                    return Err(Error::InvalidParameter(format!("node {i} is malformed")))
                }
                _ => {}
            }
        }
        if nodes.is_empty() {
            return Err(Error::InvalidParameter("tree has no nodes".into()));
        }
        Ok(DecisionTree {
            nodes,
            n_features,
            num_classes,
        })
    }
}

impl<F: Scalar> ProbabilisticClassifier<F> for DecisionTree<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn predict_proba(&self, x: &[F]) -> Result<Vec<F>> {
        check_dim(self.n_features, x)?;
        Ok(self.leaf_proba(x).to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for EnsembleParams {
    fn default() -> Self {
        EnsembleParams {
            n_trees: 100,
            max_depth: 4,
            seed: 0,
        }
    }
}

/// Bootstrap ensemble of depth-limited trees (a random forest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TreeEnsemble<F: Scalar> {
    trees: Vec<DecisionTree<F>>,
    max_depth: usize,
    bootstrap_seeds: Vec<u64>,
}

struct Grower<'a, F: Scalar> {
    data: &'a Dataset<F>,
    max_depth: usize,
    max_features: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node<F>>,
}

struct BestSplit<F> {
    impurity: f64,
    feature: usize,
    threshold: F,
}

impl<'a, F: Scalar> Grower<'a, F> {
    fn leaf(&self, idx: &[usize]) -> Node<F> {
        let c = self.data.num_classes();
        let mut counts = vec![0usize; c];
        for &i in idx {
            counts[self.data.label(i)] += 1;
        }
        let n = F::from_usize_lossy(idx.len().max(1));
        Node::Leaf {
            proba: counts
                .into_iter()
                .map(|k| F::from_usize_lossy(k) / n)
                .collect(),
        }
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { proba: Vec::new() });
        let pure = idx
            .iter()
            .all(|&i| self.data.label(i) == self.data.label(idx[0]));
        let split = if depth >= self.max_depth || idx.len() < 2 || pure {
            None
        } else {
            self.best_split(idx)
        };
        match split {
            None => self.nodes[id] = self.leaf(idx),
            Some(best) => {
                let (f, t) = (best.feature, best.threshold);
                idx.sort_by(|&a, &b| {
                    let ka = self.data.row(a)[f] > t;
                    let kb = self.data.row(b)[f] > t;
                    ka.cmp(&kb).then(a.cmp(&b))
                });
                let n_left = idx
                    .iter()
                    .filter(|&&i| self.data.row(i)[f] <= t)
                    .count();
                let (l, r) = idx.split_at_mut(n_left);
                let left = self.grow(l, depth + 1);
                let right = self.grow(r, depth + 1);
                self.nodes[id] = Node::Split {
                    feature: f,
                    threshold: t,
                    left,
                    right,
                };
            }
        }
        id
    }

    /// Examines random features until `max_features` non-constant ones have
    /// been searched. Equal impurities resolve to the smaller
    /// `(feature, threshold)` pair.
    fn best_split(&mut self, idx: &[usize]) -> Option<BestSplit<F>> {
        let q = self.data.n_features();
        let c = self.data.num_classes();
        let mut order: Vec<usize> = (0..q).collect();
        order.shuffle(&mut self.rng);
        let mut best: Option<BestSplit<F>> = None;
        let mut searched = 0;
        let mut sorted: Vec<(F, usize)> = Vec::with_capacity(idx.len());
        let mut total = vec![0usize; c];
        for &i in idx {
            total[self.data.label(i)] += 1;
        }
        for f in order {
            if searched >= self.max_features {
                break;
            }
            sorted.clear();
            sorted.extend(idx.iter().map(|&i| (self.data.row(i)[f], self.data.label(i))));
            sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
            if sorted[0].0 == sorted[sorted.len() - 1].0 {
                continue;
            }
            searched += 1;
            let n = sorted.len();
            let mut left = vec![0usize; c];
            for pos in 0..n - 1 {
                left[sorted[pos].1] += 1;
                if sorted[pos].0 == sorted[pos + 1].0 {
                    continue;
                }
                let nl = (pos + 1) as f64;
                let nr = (n - pos - 1) as f64;
                let sl: f64 = left.iter().map(|&k| (k * k) as f64).sum();
                let sr: f64 = left
                    .iter()
                    .zip(&total)
                    .map(|(&l, &t)| ((t - l) * (t - l)) as f64)
                    .sum();
                // sum of child Gini impurities weighted by child size
                let impurity = (nl - sl / nl) + (nr - sr / nr);
                let threshold = (sorted[pos].0 + sorted[pos + 1].0) / F::lit(2.0);
                let better = match &best {
                    None => true,
                    Some(b) => {
                        impurity < b.impurity
                            || (impurity == b.impurity
                                && (f < b.feature || (f == b.feature && threshold < b.threshold)))
                    }
                };
                if better {
                    best = Some(BestSplit {
                        impurity,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        best
    }
}

fn fit_tree<F: Scalar>(data: &Dataset<F>, max_depth: usize, seed: u64) -> DecisionTree<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = data.len();
    let mut idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    idx.sort_unstable();
    let q = data.n_features();
    let mut grower = Grower {
        data,
        max_depth,
        max_features: ((q as f64).sqrt().ceil() as usize).max(1),
        rng,
        nodes: Vec::new(),
    };
    grower.grow(&mut idx, 0);
    DecisionTree {
        nodes: grower.nodes,
        n_features: q,
        num_classes: data.num_classes(),
    }
}

/// Fits `n_trees` trees, each on its own bootstrap resample with per-split
/// feature subsampling of `ceil(sqrt(Q))` candidates.
pub fn ensemble_fit<F: Scalar>(train: &Dataset<F>, params: &EnsembleParams) -> Result<TreeEnsemble<F>> {
    if train.is_empty() {
        return Err(Error::InvalidParameter("empty training set".into()));
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidParameter("n_trees must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let bootstrap_seeds: Vec<u64> = (0..params.n_trees).map(|_| rng.random()).collect();
    let trees = bootstrap_seeds
        .par_iter()
        .map(|&s| fit_tree(train, params.max_depth, s))
        .collect();
    Ok(TreeEnsemble {
        trees,
        max_depth: params.max_depth,
        bootstrap_seeds,
    })
}

impl<F: Scalar> TreeEnsemble<F> {
    pub fn trees(&self) -> &[DecisionTree<F>] {
        &self.trees
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn bootstrap_seeds(&self) -> &[u64] {
        &self.bootstrap_seeds
    }

    /// One leaf distribution per member tree.
    pub fn member_probas(&self, x: &[F]) -> Result<Vec<Vec<F>>> {
        check_dim(self.n_features(), x)?;
        Ok(self.trees.iter().map(|t| t.leaf_proba(x).to_vec()).collect())
    }
}

impl<F: Scalar> ProbabilisticClassifier<F> for TreeEnsemble<F> {
    fn n_features(&self) -> usize {
        self.trees[0].n_features
    }

    fn num_classes(&self) -> usize {
        self.trees[0].num_classes
    }

    fn predict_proba(&self, x: &[F]) -> Result<Vec<F>> {
        let members = self.member_probas(x)?;
        let k = F::from_usize_lossy(members.len());
        let mut mean = vec![F::zero(); self.num_classes()];
        for p in &members {
            for (m, &v) in mean.iter_mut().zip(p) {
                *m = *m + v;
            }
        }
        Ok(mean.into_iter().map(|v| v / k).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::make_toy_moons;

    #[test]
    fn depth_zero_gives_bootstrap_frequencies() {
        let d: Dataset<f64> = make_toy_moons(30, 0.1, 2).unwrap();
        let e = ensemble_fit(
            &d,
            &EnsembleParams {
                n_trees: 5,
                max_depth: 0,
                seed: 4,
            },
        )
        .unwrap();
        for (tree, &seed) in e.trees().iter().zip(e.bootstrap_seeds()) {
            assert_eq!(tree.nodes().len(), 1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ones = 0;
            for _ in 0..d.len() {
                ones += d.label(rng.random_range(0..d.len()));
            }
            let p = tree.leaf_proba(d.row(0));
            assert!((p[1] - ones as f64 / d.len() as f64).abs() < 1e-12);
        }
        let members = e.member_probas(&[9.0, 9.0]).unwrap();
        assert_eq!(members.len(), 5);
    }

    #[test]
    fn pure_training_data_gives_dirac_leaves() {
        let d = Dataset::new(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![1, 1, 1, 1],
            vec!["a".into()],
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        let e = ensemble_fit(&d, &EnsembleParams::default()).unwrap();
        for p in e.member_probas(&[1.5]).unwrap() {
            assert_eq!(p, vec![0.0, 1.0]);
        }
    }

    #[test]
    fn same_seed_same_forest_and_depth_cap() {
        let d: Dataset<f64> = make_toy_moons(60, 0.3, 5).unwrap();
        let p = EnsembleParams {
            n_trees: 20,
            max_depth: 3,
            seed: 77,
        };
        let a = ensemble_fit(&d, &p).unwrap();
        let b = ensemble_fit(&d, &p).unwrap();
        assert_eq!(a, b);
        for t in a.trees() {
            assert!(t.depth() <= 3);
            for n in t.nodes() {
                if let Node::Leaf { proba } = n {
                    assert!((proba.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    assert!(proba.iter().all(|&v| v >= 0.0));
                }
            }
        }
        let mean = a.predict_proba(&[0.3, 0.2]).unwrap();
        assert!((mean.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separable_data_is_learned() {
        let d: Dataset<f64> = make_toy_moons(100, 0.05, 3).unwrap();
        let e = ensemble_fit(
            &d,
            &EnsembleParams {
                n_trees: 30,
                max_depth: 6,
                seed: 1,
            },
        )
        .unwrap();
        let correct = (0..d.len())
            .filter(|&i| e.predict(d.row(i)).unwrap() == d.label(i))
            .count();
        assert!(correct as f64 / d.len() as f64 > 0.95);
    }
}
