//! Dataset representation, CSV ingestion, min-max normalization, stratified
//! folding, and synthetic mixture-of-Gaussians generation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::seeding;
use crate::{Error, Result};

/// Feature matrix plus dense integer labels and a per-class row index.
///
/// Labels are always `0..C-1`; the original label strings are kept in
/// `label_names` so reports and CSV output can show the source labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// N×D feature matrix.
    pub features: Array2<f64>,
    /// N class ids in `0..C-1`.
    pub labels: Vec<usize>,
    /// Row indices per class id, each list ascending.
    pub class_index: Vec<Vec<usize>>,
    /// Original label per class id, in order of first appearance.
    pub label_names: Vec<String>,
    /// Optional feature column names.
    pub feature_names: Option<Vec<String>>,
}

impl Dataset {
    /// Assemble a dataset from a feature matrix and dense labels.
    pub fn new(features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        let label_names = {
            let c = labels.iter().copied().max().map_or(0, |m| m + 1);
            (0..c).map(|i| i.to_string()).collect()
        };
        Self::with_names(features, labels, label_names, None)
    }

    pub fn with_names(
        features: Array2<f64>,
        labels: Vec<usize>,
        label_names: Vec<String>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = features.nrows();
        let d = features.ncols();
        if n == 0 || d == 0 {
            return Err(Error::CsvStructure(
                "dataset must have at least one row and one feature".into(),
            ));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::CsvStructure("non-finite feature value".into()));
        }
        let c = labels.iter().copied().max().map_or(0, |m| m + 1);
        if label_names.len() != c {
            return Err(Error::DimensionMismatch {
                expected: c,
                got: label_names.len(),
            });
        }
        let mut class_index = vec![Vec::new(); c];
        for (row, &label) in labels.iter().enumerate() {
            class_index[label].push(row);
        }
        if class_index.iter().any(|rows| rows.is_empty()) {
            return Err(Error::CsvStructure("class ids must be dense 0..C-1".into()));
        }
        Ok(Self {
            features,
            labels,
            class_index,
            label_names,
            feature_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_index.len()
    }

    /// Row `i` as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        self.features
            .row(i)
            .to_slice()
            .expect("row-major feature matrix")
    }

    pub fn class_size(&self, class: usize) -> usize {
        self.class_index[class].len()
    }

    /// Class sizes indexed by class id.
    pub fn class_counts(&self) -> Vec<usize> {
        self.class_index.iter().map(Vec::len).collect()
    }

    /// Rows of one class as an owned matrix.
    pub fn class_matrix(&self, class: usize) -> Array2<f64> {
        let rows = &self.class_index[class];
        let mut m = Array2::zeros((rows.len(), self.n_features()));
        for (out, &row) in rows.iter().enumerate() {
            m.row_mut(out).assign(&self.features.row(row));
        }
        m
    }

    /// Subset by row indices, preserving label ids and names.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let mut features = Array2::zeros((rows.len(), self.n_features()));
        let mut labels = Vec::with_capacity(rows.len());
        for (out, &row) in rows.iter().enumerate() {
            features.row_mut(out).assign(&self.features.row(row));
            labels.push(self.labels[row]);
        }
        let mut class_index = vec![Vec::new(); self.n_classes()];
        for (row, &label) in labels.iter().enumerate() {
            class_index[label].push(row);
        }
        Dataset {
            features,
            labels,
            class_index,
            label_names: self.label_names.clone(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Append synthetic rows for one class.
    pub fn append_rows(&self, points: &[Vec<f64>], class: usize) -> Dataset {
        let n = self.n_rows();
        let d = self.n_features();
        let mut features = Array2::zeros((n + points.len(), d));
        features.slice_mut(ndarray::s![..n, ..]).assign(&self.features);
        for (i, p) in points.iter().enumerate() {
            for (j, &v) in p.iter().enumerate() {
                features[(n + i, j)] = v;
            }
        }
        let mut labels = self.labels.clone();
        labels.extend(std::iter::repeat_n(class, points.len()));
        let mut class_index = self.class_index.clone();
        class_index[class].extend(n..n + points.len());
        Dataset {
            features,
            labels,
            class_index,
            label_names: self.label_names.clone(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Which CSV column carries the class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

/// Load a dataset from CSV.
///
/// Dialect: comma-separated, `.` decimal, optional header, UTF-8, no quoting
/// of numerics. Lines starting with `#` are skipped (output files carry a
/// reproducibility header in that form). Labels are remapped to dense
/// `0..C-1` in order of first appearance; the original strings are retained
/// in `label_names`.
pub fn load_csv(path: &Path, label_column: &LabelColumn, has_header: bool) -> Result<Dataset> {
    let raw = std::fs::read_to_string(path)?;
    let mut lines = raw
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));

    let header: Option<Vec<String>> = if has_header {
        let (_, line) = lines
            .next()
            .ok_or_else(|| Error::CsvStructure("empty file".into()))?;
        Some(line.split(',').map(|s| s.trim().to_string()).collect())
    } else {
        None
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut label_idx: Option<usize> = None;
    let mut width: Option<usize> = None;

    for (line_no, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let w = *width.get_or_insert(cells.len());
        if cells.len() != w {
            return Err(Error::CsvStructure(format!(
                "row {line_no} has {} cells, expected {w}",
                cells.len()
            )));
        }
        let li = *label_idx.get_or_insert(resolve_label_column(
            label_column,
            header.as_deref(),
            w,
        )?);
        let mut row = Vec::with_capacity(w - 1);
        for (col, cell) in cells.iter().enumerate() {
            if col == li {
                continue;
            }
            if cell.is_empty() {
                return Err(Error::CsvParse {
                    row: line_no,
                    column: col + 1,
                    message: "missing value".into(),
                });
            }
            let v: f64 = cell.parse().map_err(|_| Error::CsvParse {
                row: line_no,
                column: col + 1,
                message: format!("cannot parse {cell:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::CsvParse {
                    row: line_no,
                    column: col + 1,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            row.push(v);
        }
        rows.push(row);
        raw_labels.push(cells[li].to_string());
    }

    if rows.is_empty() {
        return Err(Error::CsvStructure("no data rows".into()));
    }
    let d = rows[0].len();
    if d == 0 {
        return Err(Error::CsvStructure("no feature columns".into()));
    }

    // dense remap in order of first appearance
    let mut remap: BTreeMap<&str, usize> = BTreeMap::new();
    let mut label_names: Vec<String> = Vec::new();
    let mut labels = Vec::with_capacity(raw_labels.len());
    for raw in &raw_labels {
        let next = label_names.len();
        let id = *remap.entry(raw.as_str()).or_insert_with(|| {
            label_names.push(raw.clone());
            next
        });
        labels.push(id);
    }

    let feature_names = header.map(|h| {
        let li = label_idx.unwrap();
        h.into_iter()
            .enumerate()
            .filter(|(i, _)| *i != li)
            .map(|(_, name)| name)
            .collect()
    });

    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let features = Array2::from_shape_vec((flat.len() / d, d), flat)
        .map_err(|e| Error::CsvStructure(e.to_string()))?;
    Dataset::with_names(features, labels, label_names, feature_names)
}

fn resolve_label_column(
    selector: &LabelColumn,
    header: Option<&[String]>,
    width: usize,
) -> Result<usize> {
    let idx = match selector {
        LabelColumn::Index(i) => *i,
        LabelColumn::Name(name) => {
            let header = header.ok_or_else(|| {
                Error::CsvStructure(format!(
                    "label column {name:?} requested by name but the file has no header"
                ))
            })?;
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::CsvStructure(format!("label column {name:?} not found")))?
        }
    };
    if idx >= width {
        return Err(Error::CsvStructure(format!(
            "label column index {idx} out of range for {width}-column file"
        )));
    }
    Ok(idx)
}

/// Write a dataset to CSV (label last), with optional `#`-prefixed header
/// comment lines. Floats round-trip exactly through [`load_csv`].
pub fn write_csv(ds: &Dataset, path: &Path, comments: &[String]) -> Result<()> {
    let mut out = String::new();
    for c in comments {
        writeln!(out, "# {c}").expect("string write");
    }
    if let Some(names) = &ds.feature_names {
        writeln!(out, "{},label", names.join(",")).expect("string write");
    }
    for i in 0..ds.n_rows() {
        for v in ds.row(i) {
            write!(out, "{v},").expect("string write");
        }
        writeln!(out, "{}", ds.label_names[ds.labels[i]]).expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Per-feature min/max recorded by [`normalize_minmax`], with constant
/// features dropped.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizationParams {
    /// Min per original feature column.
    pub min: Vec<f64>,
    /// Max per original feature column.
    pub max: Vec<f64>,
    /// Original column indices dropped because max == min.
    pub dropped_features: Vec<usize>,
}

impl NormalizationParams {
    /// Apply the recorded transform to another dataset with the same original
    /// feature layout (used for test folds). Values may leave `[0, 1]`.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.n_features() != self.min.len() {
            return Err(Error::DimensionMismatch {
                expected: self.min.len(),
                got: ds.n_features(),
            });
        }
        let kept: Vec<usize> = (0..self.min.len())
            .filter(|i| !self.dropped_features.contains(i))
            .collect();
        let mut features = Array2::zeros((ds.n_rows(), kept.len()));
        for row in 0..ds.n_rows() {
            for (out, &col) in kept.iter().enumerate() {
                features[(row, out)] =
                    (ds.features[(row, col)] - self.min[col]) / (self.max[col] - self.min[col]);
            }
        }
        let feature_names = ds
            .feature_names
            .as_ref()
            .map(|names| kept.iter().map(|&c| names[c].clone()).collect());
        Dataset::with_names(
            features,
            ds.labels.clone(),
            ds.label_names.clone(),
            feature_names,
        )
    }
}

/// Min-max normalize every feature to `[0, 1]`, dropping constant columns.
///
/// Idempotent: normalizing an already-normalized dataset reproduces it.
pub fn normalize_minmax(ds: &Dataset) -> Result<(Dataset, NormalizationParams)> {
    let d = ds.n_features();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for row in 0..ds.n_rows() {
        for (col, &v) in ds.row(row).iter().enumerate() {
            min[col] = min[col].min(v);
            max[col] = max[col].max(v);
        }
    }
    let dropped: Vec<usize> = (0..d).filter(|&c| max[c] == min[c]).collect();
    if dropped.len() == d {
        return Err(Error::DegenerateDataset);
    }
    if !dropped.is_empty() {
        log::warn!("dropping {} constant feature column(s): {dropped:?}", dropped.len());
    }
    let params = NormalizationParams {
        min,
        max,
        dropped_features: dropped,
    };
    let normalized = params.apply(ds)?;
    Ok((normalized, params))
}

/// Stratified k-fold split: `(train, test)` index pairs.
///
/// Per-class counts across test folds differ by at most one. Classes with a
/// single member never enter a test fold; their row joins every training
/// fold (a warning is logged). Deterministic for a fixed seed.
pub fn stratified_kfold(
    ds: &Dataset,
    k: usize,
    seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k = {k} must be at least 2")));
    }
    if k > ds.n_rows() {
        return Err(Error::KTooLarge {
            k,
            n: ds.n_rows(),
        });
    }
    let mut test_folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut train_only: Vec<usize> = Vec::new();

    for (class, rows) in ds.class_index.iter().enumerate() {
        if rows.len() == 1 {
            log::warn!(
                "class {class} ({:?}) has a single instance; kept in training folds only",
                ds.label_names[class]
            );
            train_only.push(rows[0]);
            continue;
        }
        let mut shuffled = rows.clone();
        let mut rng = seeding::rng(seeding::derive_indexed(seed, "kfold-class", class as u64));
        shuffle(&mut shuffled, &mut rng);
        // rotate the starting fold per class so remainders spread out
        for (i, &row) in shuffled.iter().enumerate() {
            test_folds[(i + class) % k].push(row);
        }
    }

    // singleton rows are never in any test fold, so they land in every train
    drop(train_only);
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let mut test = test_folds[f].clone();
        test.sort_unstable();
        let train: Vec<usize> = (0..ds.n_rows())
            .filter(|row| test.binary_search(row).is_err())
            .collect();
        folds.push((train, test));
    }
    Ok(folds)
}

fn shuffle<T>(items: &mut [T], rng: &mut impl Rng) {
    // Fisher-Yates
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// One Gaussian blob of a synthetic mixture dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianBlobSpec {
    pub mean: Vec<f64>,
    /// D×D covariance, row-major.
    pub covariance: Vec<Vec<f64>>,
    pub count: usize,
    pub class_id: usize,
}

impl GaussianBlobSpec {
    fn validate(&self) -> Result<Cholesky<f64, nalgebra::Dyn>> {
        let d = self.mean.len();
        if self.count == 0 || d == 0 {
            return Err(Error::InvalidConfig(
                "blob count and dimension must be positive".into(),
            ));
        }
        if self.covariance.len() != d || self.covariance.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.covariance.len(),
            });
        }
        let m = DMatrix::from_fn(d, d, |i, j| self.covariance[i][j]);
        for i in 0..d {
            for j in 0..d {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                    return Err(Error::NotPositiveDefinite);
                }
            }
        }
        Cholesky::new(m).ok_or(Error::NotPositiveDefinite)
    }
}

/// Sample a labeled dataset from a list of Gaussian blobs.
///
/// Class ids are remapped to dense `0..C-1` in order of first appearance
/// across the spec list. Each blob draws from its own derived seed stream,
/// so per-blob samples do not depend on the other blobs.
pub fn generate_gmm_data(specs: &[GaussianBlobSpec], seed: u64) -> Result<Dataset> {
    if specs.is_empty() {
        return Err(Error::InvalidConfig("no blob specs".into()));
    }
    let d = specs[0].mean.len();
    let mut remap: Vec<usize> = Vec::new();
    let total: usize = specs.iter().map(|s| s.count).sum();
    let mut features = Array2::zeros((total, d));
    let mut labels = Vec::with_capacity(total);
    let mut row = 0;

    for (blob_id, spec) in specs.iter().enumerate() {
        if spec.mean.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: spec.mean.len(),
            });
        }
        let chol = spec.validate()?;
        let label = match remap.iter().position(|&c| c == spec.class_id) {
            Some(i) => i,
            None => {
                remap.push(spec.class_id);
                remap.len() - 1
            }
        };
        let mut rng = seeding::rng(seeding::derive_indexed(seed, "gmm-blob", blob_id as u64));
        let mean = DVector::from_column_slice(&spec.mean);
        for _ in 0..spec.count {
            let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = &mean + chol.l() * z;
            for (col, &v) in x.iter().enumerate() {
                features[(row, col)] = v;
            }
            labels.push(label);
            row += 1;
        }
    }

    let label_names = remap.iter().map(|c| c.to_string()).collect();
    Dataset::with_names(features, labels, label_names, None)
}
