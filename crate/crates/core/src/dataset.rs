//! Tabular datasets: CSV ingestion, min-max normalization, train/test
//! splitting and the two-moons toy generator.
//!
//! Features are stored row-major in a flat buffer. Labels are dense class
//! indices in `0..num_classes()`.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Dataset<F: Scalar> {
    features: Vec<F>,
    n_features: usize,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    class_names: Vec<String>,
}

/// Selects the label column of a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl LabelColumn {
    /// Numeric strings are read as zero-based indices, anything else as a
    /// header name.
    pub fn parse(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        }
    }
}

impl std::fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "#{i}"),
            LabelColumn::Name(n) => write!(f, "{n:?}"),
        }
    }
}

impl<F: Scalar> Dataset<F> {
    /// Builds a dataset from rows, checking shape, finiteness and label range.
    pub fn new(
        rows: Vec<Vec<F>>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let n_features = feature_names.len();
        if rows.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let mut features = Vec::with_capacity(rows.len() * n_features);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_features {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} entries, expected {n_features}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "row {i}, feature {j} is not finite"
                )));
            }
            features.extend(row);
        }
        Self::from_flat(features, n_features, labels, feature_names, class_names)
    }

    pub(crate) fn from_flat(
        features: Vec<F>,
        n_features: usize,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidDataset(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        debug_assert_eq!(features.len(), labels.len() * n_features);
        Ok(Dataset {
            features,
            n_features,
            labels,
            feature_names,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[F]> + '_ {
        self.features.chunks_exact(self.n_features.max(1))
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features_flat(&self) -> &[F] {
        &self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// New dataset made of the given rows, in order. Class names are kept so
    /// label indices stay comparable with the parent.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            n_features: self.n_features,
            labels,
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        }
    }

    /// Converts the scalar type (e.g. to run the f64 pipeline on f32 data).
    pub fn cast<G: Scalar>(&self) -> Dataset<G> {
        Dataset {
            features: self.features.iter().map(|v| G::lit(v.as_f64())).collect(),
            n_features: self.n_features,
            labels: self.labels.clone(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        }
    }

    /// Checks that every class index occurs at least once.
    pub fn check_all_classes_present(&self) -> Result<()> {
        match self.class_counts().iter().position(|&c| c == 0) {
            Some(c) => Err(Error::InvalidDataset(format!(
                "class {} ({}) has no instances",
                c, self.class_names[c]
            ))),
            None => Ok(()),
        }
    }
}

/// Reads a comma-separated file with a header row. Labels are re-encoded to
/// dense indices in order of first appearance.
pub fn load_csv<F: Scalar>(path: impl AsRef<Path>, label: &LabelColumn) -> Result<Dataset<F>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let label_idx = match label {
        LabelColumn::Index(i) if *i < headers.len() => *i,
        LabelColumn::Name(n) => headers
            .iter()
            .position(|h| h == n)
            .ok_or_else(|| Error::LabelColumnMissing(label.to_string()))?,
        _ => return Err(Error::LabelColumnMissing(label.to_string())),
    };
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        if record.len() != headers.len() {
            return Err(Error::Csv {
                path: path.to_path_buf(),
                message: format!(
                    "data row {} has {} fields, header has {}",
                    r + 1,
                    record.len(),
                    headers.len()
                ),
            });
        }
        let mut row = Vec::with_capacity(feature_names.len());
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                row: r + 1,
                column: headers[j].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumeric {
                    row: r + 1,
                    column: headers[j].clone(),
                    value: cell.to_string(),
                });
            }
            row.push(F::lit(v));
        }
        let name = record[label_idx].to_string();
        let next = class_index.len();
        let idx = *class_index.entry(name.clone()).or_insert_with(|| {
            class_names.push(name);
            next
        });
        rows.push(row);
        labels.push(idx);
    }
    if class_names.len() < 2 {
        return Err(Error::TooFewClasses(class_names.len()));
    }
    Dataset::new(rows, labels, feature_names, class_names)
}

/// Per-column `(min, max)` fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NormParams<F: Scalar> {
    pub min: Vec<F>,
    pub max: Vec<F>,
}

impl<F: Scalar> NormParams<F> {
    pub fn fit(data: &Dataset<F>) -> Self {
        let q = data.n_features();
        let mut min = vec![F::infinity(); q];
        let mut max = vec![F::neg_infinity(); q];
        for row in data.rows() {
            for j in 0..q {
                min[j] = min[j].min(row[j]);
                max[j] = max[j].max(row[j]);
            }
        }
        NormParams { min, max }
    }

    /// Affine map into `[0, 1]` on the fitted range; constant columns go to 0.5.
    pub fn transform_row(&self, row: &[F]) -> Vec<F> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let span = self.max[j] - self.min[j];
                if span > F::zero() {
                    (v - self.min[j]) / span
                } else {
                    F::lit(0.5)
                }
            })
            .collect()
    }

    /// Inverse of [`transform_row`](Self::transform_row). Constant columns map
    /// back to their single fitted value.
    pub fn inverse_row(&self, row: &[F]) -> Vec<F> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let span = self.max[j] - self.min[j];
                if span > F::zero() {
                    self.min[j] + v * span
                } else {
                    self.min[j]
                }
            })
            .collect()
    }

    pub fn transform(&self, data: &Dataset<F>) -> Dataset<F> {
        let features = data.rows().flat_map(|r| self.transform_row(r)).collect();
        Dataset {
            features,
            ..data.clone()
        }
    }

    pub fn inverse(&self, data: &Dataset<F>) -> Dataset<F> {
        let features = data.rows().flat_map(|r| self.inverse_row(r)).collect();
        Dataset {
            features,
            ..data.clone()
        }
    }
}

/// Fits min-max parameters on `data` and returns the normalized copy.
pub fn normalize_minmax<F: Scalar>(data: &Dataset<F>) -> (Dataset<F>, NormParams<F>) {
    let params = NormParams::fit(data);
    (params.transform(data), params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
            seed: 0,
            stratified: false,
        }
    }
}

/// Train/test row indices; each list is sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_indices<F: Scalar>(data: &Dataset<F>, spec: &SplitSpec) -> Result<SplitIndices> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train_fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    if spec.stratified {
        let counts = data.class_counts();
        for (class, &count) in counts.iter().enumerate() {
            if count < 2 {
                return Err(Error::ClassTooSmall { class, count });
            }
        }
        for class in 0..data.num_classes() {
            let mut members: Vec<usize> =
                (0..data.len()).filter(|&i| data.label(i) == class).collect();
            members.shuffle(&mut rng);
            let n_train = (spec.train_fraction * members.len() as f64).round() as usize;
            let n_train = n_train.clamp(1, members.len() - 1);
            train.extend_from_slice(&members[..n_train]);
            test.extend_from_slice(&members[n_train..]);
        }
    } else {
        let mut all: Vec<usize> = (0..data.len()).collect();
        all.shuffle(&mut rng);
        let n_train = (spec.train_fraction * all.len() as f64).round() as usize;
        train.extend_from_slice(&all[..n_train]);
        test.extend_from_slice(&all[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

pub fn split<F: Scalar>(data: &Dataset<F>, spec: &SplitSpec) -> Result<(Dataset<F>, Dataset<F>)> {
    let idx = split_indices(data, spec)?;
    Ok((data.subset(&idx.train), data.subset(&idx.test)))
}

/// Two interleaved half circles with isotropic Gaussian noise.
///
/// Class 0 lies on the upper unit arc centred at the origin, class 1 on the
/// lower arc centred at `(1, 0.5)`.
pub fn make_toy_moons<F: Scalar>(n_per_class: usize, noise: f64, seed: u64) -> Result<Dataset<F>> {
    if n_per_class == 0 {
        return Err(Error::InvalidParameter("n_per_class must be >= 1".into()));
    }
    if !(noise >= 0.0) {
        return Err(Error::InvalidParameter("noise must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    let denom = (n_per_class.max(2) - 1) as f64;
    for class in 0..2 {
        for i in 0..n_per_class {
            let t = if n_per_class == 1 {
                0.5 * std::f64::consts::PI
            } else {
                std::f64::consts::PI * i as f64 / denom
            };
            let (x, y) = if class == 0 {
                (t.cos(), t.sin())
            } else {
                (1.0 - t.cos(), 0.5 - t.sin())
            };
            let (nx, ny): (f64, f64) = if noise > 0.0 {
                (
                    noise * rng.sample::<f64, _>(StandardNormal),
                    noise * rng.sample::<f64, _>(StandardNormal),
                )
            } else {
                (0.0, 0.0)
            };
            rows.push(vec![F::lit(x + nx), F::lit(y + ny)]);
            labels.push(class);
        }
    }
    Dataset::new(
        rows,
        labels,
        vec!["x0".into(), "x1".into()],
        vec!["upper".into(), "lower".into()],
    )
}
