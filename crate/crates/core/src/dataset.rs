//! Tabular datasets: CSV ingestion, validation, splitting, min-max scaling
//! and synthetic random-feature injection.
//!
//! A [`Dataset`] is column-major and immutable once built. Every transform
//! returns a new value and appends a [`Transform`] record to its [`Meta`], so
//! a dataset written to disk carries enough provenance (in its
//! `<name>.meta.json` sidecar) to be re-derived.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Identifiers reserved for the three injected random features.
pub const RANDOM_FEATURE_NAMES: [&str; 3] = ["__rand1", "__rand2", "__rand3"];

/// Minimum number of samples accepted by [`split`].
pub const MIN_SPLIT_SAMPLES: usize = 10;

/// Tertile boundaries of the standard normal distribution.
const GAUSSIAN_TERTILE: f64 = 0.430_727_299_295_457_4;

/// Centers of the isotropic clusters used by the second random generator.
const BLOB_CENTERS: [f64; 3] = [-5.0, 0.0, 5.0];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("row {row}: label is not 0 or 1")]
    NonBinaryLabel { row: usize },
    #[error("row {row}, column `{column}`: missing or non-numeric value")]
    NonNumericValue { row: usize, column: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid meta sidecar {}: {source}", path.display())]
    Meta {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("too few samples: need at least {required}, got {actual}")]
    TooFewSamples { required: usize, actual: usize },
    #[error("reserved feature name already present: {0}")]
    NameCollision(String),
    #[error("unknown feature: {0}")]
    UnknownFeature(String),
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

/// Provenance carried alongside a dataset and persisted as a JSON sidecar.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub source: Option<String>,
    pub source_sha256: Option<String>,
    pub seed: Option<u64>,
    pub transforms: Vec<Transform>,
}

/// One transform applied to a dataset, in application order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    MinMax { scaler: MinMaxScaler },
    RandomFeatures { seed: u64, names: Vec<String> },
    Projection { features: Vec<String>, provenance: String },
    Weighted { weights: BTreeMap<String, f64> },
    Encoded { bottleneck: usize, model_seed: u64 },
    RowSubset { rows: usize },
}

impl Transform {
    /// Whether the transform fixes the scale of the columns it produces.
    fn sets_scale(&self) -> Option<bool> {
        match self {
            Transform::MinMax { .. } | Transform::Weighted { .. } => Some(true),
            Transform::Encoded { .. } => Some(false),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    columns: Vec<Vec<f64>>,
    labels: Vec<u8>,
    label_name: String,
    meta: Meta,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        columns: Vec<Vec<f64>>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if feature_names.len() != columns.len() {
            return Err(DatasetError::Invalid(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(DatasetError::Invalid(format!("duplicate feature name `{name}`")));
            }
        }
        let n = labels.len();
        for (name, col) in feature_names.iter().zip(&columns) {
            if col.len() != n {
                return Err(DatasetError::Invalid(format!(
                    "column `{name}` has {} entries, expected {n}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(DatasetError::Invalid(format!("column `{name}` has non-finite values")));
            }
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(DatasetError::Invalid("labels must be 0 or 1".into()));
        }
        Ok(Self {
            feature_names,
            columns,
            labels,
            label_name: "label".into(),
            meta: Meta::default(),
        })
    }

    pub fn with_label_name(mut self, name: impl Into<String>) -> Self {
        self.label_name = name.into();
        self
    }

    pub fn with_meta(mut self, meta: Meta) -> Self {
        self.meta = meta;
        self
    }

    fn with_transform(mut self, transform: Transform) -> Self {
        self.meta.transforms.push(transform);
        self
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, index: usize) -> &[f64] {
        &self.columns[index]
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    /// Values of one sample, in feature order.
    pub fn row(&self, index: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[index]).collect()
    }

    /// Row-major copy of the given samples.
    pub fn rows_matrix(&self, rows: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(rows.len() * self.n_features());
        for &r in rows {
            out.extend(self.columns.iter().map(|c| c[r]));
        }
        out
    }

    /// Whether the newest scale-setting transform already fixed the column
    /// scale (min-max or RRw weighting), so re-normalizing would undo it.
    pub fn is_scaled(&self) -> bool {
        self.meta
            .transforms
            .iter()
            .rev()
            .find_map(Transform::sets_scale)
            .unwrap_or(false)
    }

    /// Samples at `rows`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| rows.iter().map(|&r| c[r]).collect())
            .collect();
        let labels = rows.iter().map(|&r| self.labels[r]).collect();
        Dataset {
            feature_names: self.feature_names.clone(),
            columns,
            labels,
            label_name: self.label_name.clone(),
            meta: self.meta.clone(),
        }
        .with_transform(Transform::RowSubset { rows: rows.len() })
    }

    /// Column projection preserving labels and sample order.
    pub fn project(&self, features: &[String], provenance: &str) -> Result<Dataset> {
        let mut columns = Vec::with_capacity(features.len());
        for name in features {
            let idx = self
                .feature_index(name)
                .ok_or_else(|| DatasetError::UnknownFeature(name.clone()))?;
            columns.push(self.columns[idx].clone());
        }
        let projected = Dataset::new(features.to_vec(), columns, self.labels.clone())?;
        Ok(projected
            .with_label_name(self.label_name.clone())
            .with_meta(self.meta.clone())
            .with_transform(Transform::Projection {
                features: features.to_vec(),
                provenance: provenance.to_string(),
            }))
    }

    /// Replaces the feature columns, keeping labels and metadata.
    pub(crate) fn map_columns(
        &self,
        feature_names: Vec<String>,
        columns: Vec<Vec<f64>>,
        transform: Transform,
    ) -> Result<Dataset> {
        Ok(Dataset::new(feature_names, columns, self.labels.clone())?
            .with_label_name(self.label_name.clone())
            .with_meta(self.meta.clone())
            .with_transform(transform))
    }

    /// Writes the dataset as CSV (features then label column) plus the
    /// `<stem>.meta.json` sidecar next to it.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(&self.label_name);
        writer.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for r in 0..self.n_samples() {
            record.clear();
            record.extend(self.columns.iter().map(|c| c[r].to_string()));
            record.push(self.labels[r].to_string());
            writer.write_record(&record)?;
        }
        writer.flush().map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let sidecar = meta_sidecar_path(path);
        let json = serde_json::to_string_pretty(&self.meta).map_err(|source| DatasetError::Meta {
            path: sidecar.clone(),
            source,
        })?;
        fs::write(&sidecar, json + "\n").map_err(|source| DatasetError::Io { path: sidecar, source })
    }
}

/// `dir/name.csv` -> `dir/name.meta.json`.
pub fn meta_sidecar_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

/// Loads a CSV with a header row. Data rows are numbered from 1 in errors.
///
/// A `<stem>.meta.json` sidecar, when present, supplies the seed and
/// transform history; the source path and content hash are always refreshed.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(DatasetError::FileNotFound(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes.as_slice());

    let header = reader
        .headers()
        .map_err(|e| DatasetError::MalformedHeader(e.to_string()))?
        .clone();
    let names: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    if names.iter().any(String::is_empty) {
        return Err(DatasetError::MalformedHeader("empty column name".into()));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
        return Err(DatasetError::MalformedHeader(format!("duplicate column `{dup}`")));
    }
    let label_idx = names
        .iter()
        .position(|n| n == label_column)
        .ok_or_else(|| DatasetError::MalformedHeader(format!("label column `{label_column}` not found")))?;

    let feature_names: Vec<String> = names
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, n)| n.clone())
        .collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); feature_names.len()];
    let mut labels = Vec::new();

    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() < names.len() {
            return Err(DatasetError::NonNumericValue {
                row,
                column: names[record.len()].clone(),
            });
        }
        let mut feature = 0;
        for (col, name) in names.iter().enumerate() {
            let raw = record.get(col).map(str::trim).unwrap_or("");
            let value = raw.parse::<f64>().ok().filter(|v| v.is_finite());
            if col == label_idx {
                labels.push(match value {
                    Some(0.0) => 0,
                    Some(1.0) => 1,
                    _ => return Err(DatasetError::NonBinaryLabel { row }),
                });
            } else {
                let v = value.ok_or_else(|| DatasetError::NonNumericValue {
                    row,
                    column: name.clone(),
                })?;
                columns[feature].push(v);
                feature += 1;
            }
        }
        if record.len() > names.len() {
            return Err(DatasetError::NonNumericValue {
                row,
                column: format!("#{}", names.len() + 1),
            });
        }
    }

    let sidecar = meta_sidecar_path(path);
    let mut meta = if sidecar.exists() {
        let text = fs::read_to_string(&sidecar).map_err(|source| DatasetError::Io {
            path: sidecar.clone(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| DatasetError::Meta { path: sidecar, source })?
    } else {
        Meta::default()
    };
    meta.source = Some(path.display().to_string());
    meta.source_sha256 = Some(hex::encode(Sha256::digest(&bytes)));

    Ok(Dataset::new(feature_names, columns, labels)?
        .with_label_name(label_column)
        .with_meta(meta))
}

/// Learn/test/validation partition of sample indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplit {
    pub learn: Vec<usize>,
    pub test: Vec<usize>,
    pub validation: Vec<usize>,
    pub seed: u64,
}

/// `ceil(15% of n)` in exact integer arithmetic.
fn fifteen_percent(n: usize) -> usize {
    (15 * n).div_ceil(100)
}

/// Shuffles the samples and carves out 15% validation, then 15% of the
/// remainder as the test set; the rest is the learn set.
pub fn split(dataset: &Dataset, seed: u64) -> Result<DataSplit> {
    split_indices(dataset.n_samples(), seed)
}

pub fn split_indices(n: usize, seed: u64) -> Result<DataSplit> {
    if n < MIN_SPLIT_SAMPLES {
        return Err(DatasetError::TooFewSamples {
            required: MIN_SPLIT_SAMPLES,
            actual: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = fifteen_percent(n);
    let n_test = fifteen_percent(n - n_val);
    let mut validation = order[..n_val].to_vec();
    let mut test = order[n_val..n_val + n_test].to_vec();
    let mut learn = order[n_val + n_test..].to_vec();
    validation.sort_unstable();
    test.sort_unstable();
    learn.sort_unstable();
    Ok(DataSplit {
        learn,
        test,
        validation,
        seed,
    })
}

/// Shuffled k-fold partition; fold sizes differ by at most one.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || n < k {
        return Err(DatasetError::TooFewSamples { required: k.max(2), actual: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = order[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

/// Per-column affine map onto [0, 1]. Constant columns map to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub features: Vec<String>,
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(dataset: &Dataset) -> Self {
        let rows: Vec<usize> = (0..dataset.n_samples()).collect();
        Self::fit_rows(dataset, &rows)
    }

    /// Fits on a subset of rows, e.g. the learn split only.
    pub fn fit_rows(dataset: &Dataset, rows: &[usize]) -> Self {
        let (mins, maxs) = dataset
            .columns()
            .iter()
            .map(|col| {
                rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                    (lo.min(col[r]), hi.max(col[r]))
                })
            })
            .map(|(lo, hi)| if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) })
            .unzip();
        Self {
            features: dataset.feature_names().to_vec(),
            mins,
            maxs,
        }
    }

    pub fn transform_value(&self, column: usize, value: f64) -> f64 {
        let (lo, hi) = (self.mins[column], self.maxs[column]);
        let range = hi - lo;
        if range > 0.0 {
            (value - lo) / range
        } else {
            0.0
        }
    }

    pub fn transform(&self, dataset: &Dataset) -> Result<Dataset> {
        if dataset.feature_names() != self.features.as_slice() {
            return Err(DatasetError::Invalid(
                "scaler was fitted on a different feature set".into(),
            ));
        }
        let columns = dataset
            .columns()
            .iter()
            .enumerate()
            .map(|(j, col)| col.iter().map(|&v| self.transform_value(j, v)).collect())
            .collect();
        dataset.map_columns(
            self.features.clone(),
            columns,
            Transform::MinMax { scaler: self.clone() },
        )
    }
}

/// Fits and applies a min-max scaler over all samples.
pub fn minmax_normalize(dataset: &Dataset) -> Dataset {
    MinMaxScaler::fit(dataset)
        .transform(dataset)
        .expect("scaler fitted on the same dataset")
}

/// Appends three label-independent features: Gaussian tertile classes,
/// three unit-variance clusters centered at -5, 0 and 5, and uniform [0, 1).
pub fn inject_random_features(dataset: &Dataset, seed: u64) -> Result<Dataset> {
    if let Some(name) = RANDOM_FEATURE_NAMES
        .iter()
        .find(|n| dataset.feature_index(n).is_some())
    {
        return Err(DatasetError::NameCollision((*name).to_string()));
    }
    let n = dataset.n_samples();
    let stream = |s: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s);
        rng
    };

    let mut rng = stream(1);
    let quantile_classes = (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            if z < -GAUSSIAN_TERTILE {
                0.0
            } else if z < GAUSSIAN_TERTILE {
                1.0
            } else {
                2.0
            }
        })
        .collect();

    let mut rng = stream(2);
    let blobs = (0..n)
        .map(|_| {
            let center = BLOB_CENTERS[rng.random_range(0..BLOB_CENTERS.len())];
            let z: f64 = rng.sample(StandardNormal);
            center + z
        })
        .collect();

    let mut rng = stream(3);
    let uniform = (0..n).map(|_| rng.random::<f64>()).collect();

    let mut names = dataset.feature_names().to_vec();
    names.extend(RANDOM_FEATURE_NAMES.iter().map(|s| s.to_string()));
    let mut columns = dataset.columns().to_vec();
    columns.push(quantile_classes);
    columns.push(blobs);
    columns.push(uniform);
    let mut out = dataset.map_columns(
        names,
        columns,
        Transform::RandomFeatures {
            seed,
            names: RANDOM_FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        },
    )?;
    out.meta.seed = Some(seed);
    Ok(out)
}
