use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::LabelColumn;
use crate::error::{Error, Result};
use crate::explain::SamplingScheme;
use crate::uncertainty::{CentroidAu, Strategy};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    pub path: PathBuf,
    /// Header name or zero-based index of the label column.
    #[serde(default = "default_label")]
    pub label: String,
}

fn default_label() -> String {
    "class".into()
}

impl DatasetEntry {
    pub fn label_column(&self) -> LabelColumn {
        LabelColumn::parse(&self.label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.7,
            stratified: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Neighbour count of the explained K-NN classifier.
    pub knn_k: usize,
    pub forest_trees: usize,
    pub forest_max_depth: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            knn_k: 7,
            forest_trees: 100,
            forest_max_depth: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncertaintyConfig {
    pub strategies: Vec<Strategy>,
    pub eknn_k: usize,
    pub eknn_alpha: f64,
    /// Multiplier on the inverse mean intra-class squared distance.
    pub eknn_gamma_scale: f64,
    pub centroid_sigma: f64,
    pub centroid_au: CentroidAu,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        UncertaintyConfig {
            strategies: vec![Strategy::Belief, Strategy::EnsembleEntropy, Strategy::CentroidRbf],
            eknn_k: 7,
            eknn_alpha: 0.95,
            eknn_gamma_scale: DEFAULT_GAMMA_SCALE,
            centroid_sigma: 1.0,
            centroid_au: CentroidAu::SoftmaxEntropy,
        }
    }
}

/// Multiplier on the per-class inverse mean squared distance. 1 is the
/// classical setting; larger values make neighbour evidence more local.
pub const DEFAULT_GAMMA_SCALE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplanationType {
    Counterfactual,
    FeatureImportance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributionTarget {
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Used by `reject-demo` and `route`'s importance branch.
    pub kind: ExplanationType,
    pub target: AttributionTarget,
    pub background_size: usize,
    /// Exact enumeration up to this many features, sampling above.
    pub exact_max_features: usize,
    pub n_permutations: usize,
    pub sampling_scheme: SamplingScheme,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            kind: ExplanationType::FeatureImportance,
            target: AttributionTarget::Predicted,
            background_size: 100,
            exact_max_features: 12,
            n_permutations: 200,
            sampling_scheme: SamplingScheme::Paired,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessConfig {
    pub epsilon: f64,
    pub n_samples: usize,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig {
            epsilon: 0.1,
            n_samples: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Share of highest-EU test instances dropped in the rejected column.
    pub reject_fraction: f64,
    /// Routing thresholds, as quantiles of the held-out split.
    pub eu_quantile: f64,
    pub au_quantile: f64,
    pub n_thresholds: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            reject_fraction: 0.3,
            eu_quantile: 0.7,
            au_quantile: 0.5,
            n_thresholds: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub n_per_class: usize,
    pub noise: f64,
    /// Grid points per axis.
    pub resolution: usize,
    /// Grid extent beyond the unit box, in normalized units.
    pub margin: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            n_per_class: 200,
            noise: 0.25,
            resolution: 61,
            margin: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    /// Repetitions; `None` takes the verb's own default.
    pub runs: Option<usize>,
    pub alpha: f64,
    pub output_dir: PathBuf,
    pub datasets: Vec<DatasetEntry>,
    pub split: SplitConfig,
    pub model: ModelConfig,
    pub uncertainty: UncertaintyConfig,
    pub explain: ExplainConfig,
    pub robustness: RobustnessConfig,
    pub protocol: ProtocolConfig,
    pub toy: ToyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            runs: None,
            alpha: 0.05,
            output_dir: PathBuf::from("out"),
            datasets: Vec::new(),
            split: SplitConfig::default(),
            model: ModelConfig::default(),
            uncertainty: UncertaintyConfig::default(),
            explain: ExplainConfig::default(),
            robustness: RobustnessConfig::default(),
            protocol: ProtocolConfig::default(),
            toy: ToyConfig::default(),
        }
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Sets a dotted `key` in a TOML table, parsing `raw` as a TOML value and
/// falling back to a plain string.
pub fn set_key(doc: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let value: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| config_error(format!("bad key {key:?}")))?;
    let mut table = doc;
    for p in parts {
        table = table
            .entry(p)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| config_error(format!("{p:?} in {key:?} is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (if any), applies `key=value` overrides, validates.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                toml::from_str::<toml::Table>(&text).map_err(|e| config_error(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            set_key(&mut doc, k, v)?;
        }
        let cfg: ExperimentConfig =
            toml::Value::Table(doc).try_into().map_err(|e: toml::de::Error| config_error(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_error(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.alpha) {
            return Err(config_error("alpha must lie in (0, 1)"));
        }
        if !unit(self.split.train_fraction) {
            return Err(config_error("split.train_fraction must lie in (0, 1)"));
        }
        if self.runs == Some(0) {
            return Err(config_error("runs must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.protocol.reject_fraction) {
            return Err(config_error("protocol.reject_fraction must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.protocol.eu_quantile) || !(0.0..=1.0).contains(&self.protocol.au_quantile) {
            return Err(config_error("routing quantiles must lie in [0, 1]"));
        }
        if self.uncertainty.strategies.is_empty() {
            return Err(config_error("uncertainty.strategies is empty"));
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(config_error("duplicate dataset names"));
        }
        Ok(())
    }

    pub fn runs_or(&self, default: usize) -> usize {
        self.runs.unwrap_or(default)
    }

    /// Canonical TOML rendering; what the hash covers.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical rendering. The
    /// output directory does not affect results and is left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let digest = Sha256::digest(c.to_canonical_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
