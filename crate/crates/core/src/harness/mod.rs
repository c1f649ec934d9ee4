//! End-to-end experiments wired from the library modules: configuration,
//! per-unit seeding, and artifact emission.

pub mod config;
mod correlate;
mod demo;
mod fit;
mod output;
mod route;
mod toy;

pub use config::{DatasetEntry, ExperimentConfig, ExplanationType};
pub use correlate::{correlate_cf, correlate_shap, CorrelationOutcome, CorrelationRow, Subset};
pub use demo::{reject_demo, DemoOutcome};
pub use fit::{fit_models, FitOutcome};
pub use output::{Artifact, Artifacts};
pub use route::{route_instances, RouteOutcome};
pub use toy::{classify_regions, landscape_summary, toy_landscape, LandscapeSummary, Region, ToyOutcome, PROBE_MARGIN};

use sha2::{Digest, Sha256};

use crate::classifiers::{ensemble_fit, knn_fit, EnsembleParams, KnnModel};
use crate::dataset::{load_csv, normalize_minmax, split_indices, Dataset, NormParams, SplitIndices, SplitSpec};
use crate::error::{Error, Result};
use crate::evidence::{eknn_fit, EknnParams};
use crate::explain::{background_sample, counterfactual_nn, shapley_auto, Counterfactual, ImportanceVector, SamplingParams};
use crate::persist::SavedModel;
use crate::protocol::Explainers;
use crate::uncertainty::{centroid_fit_present, Strategy, UncertaintyQuantifier};

fn seed_from_bytes(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Seed of one `(run, dataset)` unit; independent of scheduling order.
pub fn unit_seed(root: u64, run: usize, dataset: &str) -> u64 {
    let mut b = Vec::with_capacity(16 + dataset.len());
    b.extend_from_slice(&root.to_le_bytes());
    b.extend_from_slice(&(run as u64).to_le_bytes());
    b.extend_from_slice(dataset.as_bytes());
    seed_from_bytes(&b)
}

/// Child seed for a named purpose within a unit.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    let mut b = Vec::with_capacity(16 + tag.len());
    b.extend_from_slice(&seed.to_le_bytes());
    b.extend_from_slice(&index.to_le_bytes());
    b.extend_from_slice(tag.as_bytes());
    seed_from_bytes(&b)
}

/// One split of a dataset, normalized on its training part.
#[derive(Debug, Clone)]
pub struct RunData {
    pub seed: u64,
    pub split: SplitIndices,
    pub train: Dataset<f64>,
    pub test: Dataset<f64>,
    pub norm: NormParams<f64>,
}

pub fn prepare_run(data: &Dataset<f64>, cfg: &ExperimentConfig, run: usize, name: &str) -> Result<RunData> {
    let seed = unit_seed(cfg.seed, run, name);
    let split = split_indices(
        data,
        &SplitSpec {
            train_fraction: cfg.split.train_fraction,
            seed,
            stratified: cfg.split.stratified,
        },
    )?;
    if split.test.is_empty() || split.train.is_empty() {
        return Err(Error::InvalidDataset(format!("{name}: split leaves an empty side")));
    }
    let (train, norm) = normalize_minmax(&data.subset(&split.train));
    let test = norm.transform(&data.subset(&split.test));
    Ok(RunData {
        seed,
        split,
        train,
        test,
        norm,
    })
}

pub fn load_dataset(entry: &DatasetEntry) -> Result<Dataset<f64>> {
    load_csv(&entry.path, &entry.label_column())
}

pub fn fit_knn(train: &Dataset<f64>, cfg: &ExperimentConfig) -> Result<KnnModel<f64>> {
    knn_fit(train, cfg.model.knn_k.min(train.len()))
}

/// Fits the model behind `strategy` in its persistable form.
pub fn fit_model(strategy: Strategy, train: &Dataset<f64>, cfg: &ExperimentConfig, seed: u64) -> Result<SavedModel<f64>> {
    let u = &cfg.uncertainty;
    Ok(match strategy {
        Strategy::Belief => SavedModel::Eknn(eknn_fit(
            train,
            &EknnParams {
                k: u.eknn_k.min(train.len()),
                alpha: u.eknn_alpha,
                gamma_scale: u.eknn_gamma_scale,
            },
        )?),
        Strategy::EnsembleEntropy => SavedModel::Forest(ensemble_fit(
            train,
            &EnsembleParams {
                n_trees: cfg.model.forest_trees,
                max_depth: cfg.model.forest_max_depth,
                seed: derive_seed(seed, "forest", 0),
            },
        )?),
        Strategy::CentroidRbf => {
            SavedModel::Centroid(centroid_fit_present(train, u.centroid_sigma)?.with_au_variant(u.centroid_au))
        }
        Strategy::Likelihood => return Err(Error::StrategyUnavailable(strategy.name().into())),
    })
}

pub fn fit_quantifier(
    strategy: Strategy,
    train: &Dataset<f64>,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Box<dyn UncertaintyQuantifier<f64>>> {
    Ok(match fit_model(strategy, train, cfg, seed)? {
        SavedModel::Eknn(m) => Box::new(m),
        SavedModel::Forest(m) => Box::new(m),
        SavedModel::Centroid(m) => Box::new(m),
        SavedModel::Knn(_) => unreachable!("no strategy fits a plain K-NN"),
    })
}

/// SHAP and counterfactual explainers for a K-NN model, with the background
/// drawn from its training split.
pub struct KnnExplainers<'a> {
    pub model: &'a KnnModel<f64>,
    pub background: Dataset<f64>,
    pub cfg: &'a ExperimentConfig,
    pub seed: u64,
}

impl<'a> KnnExplainers<'a> {
    pub fn new(model: &'a KnnModel<f64>, cfg: &'a ExperimentConfig, seed: u64) -> Self {
        let background = background_sample(model.train(), cfg.explain.background_size, derive_seed(seed, "background", 0));
        KnnExplainers {
            model,
            background,
            cfg,
            seed,
        }
    }

    /// Shapley values of `target` at `x`. Sampled mode reuses the orderings
    /// of `sample_seed` so nearby points get comparable estimates.
    pub fn shap(&self, x: &[f64], target: usize, sample_seed: u64) -> Result<ImportanceVector<f64>> {
        let e = &self.cfg.explain;
        shapley_auto(
            self.model,
            &self.background,
            x,
            target,
            e.exact_max_features,
            &SamplingParams {
                n_permutations: e.n_permutations,
                seed: sample_seed,
                scheme: e.sampling_scheme,
            },
        )
    }
}

impl Explainers<f64> for KnnExplainers<'_> {
    fn importance(&self, x: &[f64]) -> Result<ImportanceVector<f64>> {
        let target = crate::classifiers::ProbabilisticClassifier::predict(self.model, x)?;
        self.shap(x, target, derive_seed(self.seed, "shap", 0))
    }

    fn counterfactual(&self, x: &[f64]) -> Result<Counterfactual<f64>> {
        let pred = crate::classifiers::ProbabilisticClassifier::predict(self.model, x)?;
        counterfactual_nn(self.model.train(), x, pred)
    }
}
