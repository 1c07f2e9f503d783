//! Benchmark harness: macro metrics, stratified cross-validation with
//! resampling applied to training folds only, and a PCA nearest-neighbor
//! margin probe for the boundary ablation.
//!
//! Rows removed from a training fold by undersampling join that fold's test
//! set, so undersampled methods are judged on everything they chose to
//! discard.

use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, BaselineConfig};
use crate::dataset::{self, Dataset};
use crate::geometry;
use crate::gmr;
use crate::oversample::{self, OversampleConfig, SyntheticProvenance};
use crate::seeding;
use crate::undersample::{self, UndersampleAudit, UndersampleConfig};
use crate::{Error, Result};

/// Scalar metrics on the 0–100 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub oa: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub g_mean: f64,
}

/// Geometric mean of macro precision and recall (inputs and output 0–100).
pub fn g_mean(precision: f64, recall: f64) -> f64 {
    (precision * recall).sqrt()
}

/// Macro metrics from a C×C confusion matrix (rows = truth, cols = predicted).
///
/// Averages run over the classes present in the test rows; a class that was
/// never predicted contributes zero precision (with a warning). Overall
/// accuracy is trace over total.
pub fn compute_metrics(confusion: &[Vec<usize>]) -> Result<Metrics> {
    let c = confusion.len();
    let total: usize = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(Error::EmptyConfusion);
    }
    let trace: usize = (0..c).map(|i| confusion[i][i]).sum();

    let mut precisions = Vec::new();
    let mut recalls = Vec::new();
    let mut f1s = Vec::new();
    for class in 0..c {
        let row_sum: usize = confusion[class].iter().sum();
        if row_sum == 0 {
            continue; // class absent from the test set
        }
        let col_sum: usize = (0..c).map(|i| confusion[i][class]).sum();
        let tp = confusion[class][class] as f64;
        let precision = if col_sum == 0 {
            log::warn!("class {class} never predicted; precision set to 0");
            0.0
        } else {
            tp / col_sum as f64
        };
        let recall = tp / row_sum as f64;
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        precisions.push(precision);
        recalls.push(recall);
        f1s.push(f1);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let precision = 100.0 * mean(&precisions);
    let recall = 100.0 * mean(&recalls);
    Ok(Metrics {
        oa: 100.0 * trace as f64 / total as f64,
        precision,
        recall,
        f_measure: 100.0 * mean(&f1s),
        g_mean: g_mean(precision, recall),
    })
}

/// Which resampler a benchmark run applies to each training fold.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum ResamplerSpec {
    None,
    GicapsU {
        under: UndersampleConfig,
    },
    GicapsO {
        over: OversampleConfig,
    },
    Gicaps {
        under: UndersampleConfig,
        over: OversampleConfig,
    },
    Smote {
        baseline: BaselineConfig,
    },
    Adasyn {
        baseline: BaselineConfig,
    },
    Ros {
        target: Option<usize>,
    },
    Rus {
        target: Option<usize>,
    },
}

impl ResamplerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ResamplerSpec::None => "none",
            ResamplerSpec::GicapsU { .. } => "gicaps-u",
            ResamplerSpec::GicapsO { .. } => "gicaps-o",
            ResamplerSpec::Gicaps { .. } => "gicaps",
            ResamplerSpec::Smote { .. } => "smote",
            ResamplerSpec::Adasyn { .. } => "adasyn",
            ResamplerSpec::Ros { .. } => "ros",
            ResamplerSpec::Rus { .. } => "rus",
        }
    }
}

/// Everything a resampling pass produced.
#[derive(Debug, Clone)]
pub struct ResampleOutcome {
    pub dataset: Dataset,
    /// Rows of the input dataset discarded by undersampling.
    pub rejected_rows: Vec<usize>,
    /// One record per synthetic row, in append order; `m/v` reference rows
    /// of the input dataset.
    pub provenance: Vec<SyntheticProvenance>,
    /// Per-class undersampling audits (row ids are class-local).
    pub audits: Vec<(usize, UndersampleAudit)>,
    pub dropped: usize,
}

/// Classes eligible for resampling: at least two members.
fn eligible(ds: &Dataset, class: usize) -> bool {
    ds.class_size(class) >= 2
}

/// Undersample every class larger than `n_target`; returns the reduced
/// dataset, the discarded input rows, the audits, and a map from reduced row
/// to input row.
fn undersample_pass(
    ds: &Dataset,
    under: &UndersampleConfig,
    seed: u64,
) -> Result<(Dataset, Vec<usize>, Vec<(usize, UndersampleAudit)>, Vec<usize>)> {
    let mut keep: Vec<bool> = vec![true; ds.n_rows()];
    let mut audits = Vec::new();
    for class in 0..ds.n_classes() {
        let rows = &ds.class_index[class];
        if rows.len() <= under.n_target || !eligible(ds, class) {
            continue;
        }
        let points = ds.class_matrix(class);
        let (retained, audit) = undersample::gicaps_undersample(
            &points,
            under,
            seeding::derive_indexed(seed, "undersample-class", class as u64),
        )?;
        let retained_set: std::collections::BTreeSet<usize> = retained.into_iter().collect();
        for (local, &global) in rows.iter().enumerate() {
            if !retained_set.contains(&local) {
                keep[global] = false;
            }
        }
        audits.push((class, audit));
    }
    let kept_rows: Vec<usize> = (0..ds.n_rows()).filter(|&r| keep[r]).collect();
    let rejected: Vec<usize> = (0..ds.n_rows()).filter(|&r| !keep[r]).collect();
    let reduced = ds.subset(&kept_rows);
    Ok((reduced, rejected, audits, kept_rows))
}

/// Oversample every eligible class below `target` up to it, against the same
/// base dataset; synthetic rows are appended grouped by class id.
fn oversample_pass(
    base: &Dataset,
    over: &OversampleConfig,
    target: usize,
    seed: u64,
) -> Result<(Dataset, Vec<SyntheticProvenance>, usize)> {
    let mut cfg = over.clone();
    for class in 0..base.n_classes() {
        let size = base.class_size(class);
        if !cfg.h_target.contains_key(&class) && eligible(base, class) && size < target {
            cfg.h_target.insert(class, target - size);
        }
        if base.class_size(class) == 1 {
            log::warn!("class {class} has a single instance; not oversampled");
        }
    }
    let mut provenance = Vec::new();
    let mut dropped = 0;
    let mut current = base.clone();
    for class in 0..base.n_classes() {
        if cfg.h_target.get(&class).copied().unwrap_or(0) == 0 || !eligible(base, class) {
            continue;
        }
        // each class generates against the base data, not earlier synthetics
        let out = oversample::gicaps_oversample(base, class, &cfg, seed)?;
        dropped += out.dropped;
        let points: Vec<Vec<f64>> = out.provenance.iter().map(|r| r.point.clone()).collect();
        current = current.append_rows(&points, class);
        provenance.extend(out.provenance);
    }
    Ok((current, provenance, dropped))
}

impl ResamplerSpec {
    /// Apply the resampler to a dataset (typically one training fold).
    pub fn apply(&self, ds: &Dataset, seed: u64) -> Result<ResampleOutcome> {
        let identity = || ResampleOutcome {
            dataset: ds.clone(),
            rejected_rows: Vec::new(),
            provenance: Vec::new(),
            audits: Vec::new(),
            dropped: 0,
        };
        match self {
            ResamplerSpec::None => Ok(identity()),

            ResamplerSpec::GicapsU { under } => {
                let (reduced, rejected, audits, _) = undersample_pass(ds, under, seed)?;
                Ok(ResampleOutcome {
                    dataset: reduced,
                    rejected_rows: rejected,
                    provenance: Vec::new(),
                    audits,
                    dropped: 0,
                })
            }

            ResamplerSpec::GicapsO { over } => {
                let target = ds.class_counts().into_iter().max().unwrap_or(0);
                let (dataset, provenance, dropped) = oversample_pass(ds, over, target, seed)?;
                Ok(ResampleOutcome {
                    dataset,
                    rejected_rows: Vec::new(),
                    provenance,
                    audits: Vec::new(),
                    dropped,
                })
            }

            ResamplerSpec::Gicaps { under, over } => {
                let (reduced, rejected, audits, kept_map) = undersample_pass(ds, under, seed)?;
                let target = reduced.class_counts().into_iter().max().unwrap_or(0);
                let (dataset, mut provenance, dropped) =
                    oversample_pass(&reduced, over, target, seed)?;
                // provenance rows refer to the reduced dataset; map back
                for rec in &mut provenance {
                    rec.m_index = kept_map[rec.m_index];
                    rec.v_index = kept_map[rec.v_index];
                }
                Ok(ResampleOutcome {
                    dataset,
                    rejected_rows: rejected,
                    provenance,
                    audits,
                    dropped,
                })
            }

            ResamplerSpec::Smote { baseline } => {
                let majority = ds.class_counts().into_iter().max().unwrap_or(0);
                let mut provenance = Vec::new();
                let mut current = ds.clone();
                for class in 0..ds.n_classes() {
                    if !eligible(ds, class) || ds.class_size(class) >= majority {
                        continue;
                    }
                    let out = baselines::smote(ds, class, baseline, seed)?;
                    let points: Vec<Vec<f64>> =
                        out.provenance.iter().map(|r| r.point.clone()).collect();
                    current = current.append_rows(&points, class);
                    provenance.extend(out.provenance);
                }
                Ok(ResampleOutcome {
                    dataset: current,
                    rejected_rows: Vec::new(),
                    provenance,
                    audits: Vec::new(),
                    dropped: 0,
                })
            }

            ResamplerSpec::Adasyn { baseline } => {
                // optional uniform cap on the majority class first
                let mut rejected = Vec::new();
                let mut base = ds.clone();
                let mut kept_map: Vec<usize> = (0..ds.n_rows()).collect();
                if let Some(cap) = baseline.adasyn_major_cap {
                    let majority_class = (0..ds.n_classes())
                        .max_by_key(|&c| ds.class_size(c))
                        .unwrap();
                    if ds.class_size(majority_class) > cap {
                        let (reduced, removed) = baselines::rus(ds, majority_class, cap, seed)?;
                        kept_map = (0..ds.n_rows())
                            .filter(|r| removed.binary_search(r).is_err())
                            .collect();
                        rejected = removed;
                        base = reduced;
                    }
                }
                let majority = base.class_counts().into_iter().max().unwrap_or(0);
                let mut provenance = Vec::new();
                let mut current = base.clone();
                for class in 0..base.n_classes() {
                    if !eligible(&base, class) || base.class_size(class) >= majority {
                        continue;
                    }
                    let out = baselines::adasyn(&base, class, baseline, seed)?;
                    let points: Vec<Vec<f64>> =
                        out.provenance.iter().map(|r| r.point.clone()).collect();
                    current = current.append_rows(&points, class);
                    provenance.extend(out.provenance);
                }
                for rec in &mut provenance {
                    rec.m_index = kept_map[rec.m_index];
                    rec.v_index = kept_map[rec.v_index];
                }
                Ok(ResampleOutcome {
                    dataset: current,
                    rejected_rows: rejected,
                    provenance,
                    audits: Vec::new(),
                    dropped: 0,
                })
            }

            ResamplerSpec::Ros { target } => {
                let target =
                    target.unwrap_or_else(|| ds.class_counts().into_iter().max().unwrap_or(0));
                let mut provenance = Vec::new();
                let mut current = ds.clone();
                for class in 0..ds.n_classes() {
                    if !eligible(ds, class) || ds.class_size(class) >= target {
                        continue;
                    }
                    let out = baselines::ros(ds, class, target, seed)?;
                    let points: Vec<Vec<f64>> =
                        out.provenance.iter().map(|r| r.point.clone()).collect();
                    current = current.append_rows(&points, class);
                    provenance.extend(out.provenance);
                }
                Ok(ResampleOutcome {
                    dataset: current,
                    rejected_rows: Vec::new(),
                    provenance,
                    audits: Vec::new(),
                    dropped: 0,
                })
            }

            ResamplerSpec::Rus { target } => {
                let target = target.unwrap_or_else(|| {
                    (0..ds.n_classes())
                        .map(|c| ds.class_size(c))
                        .filter(|&s| s >= 2)
                        .min()
                        .unwrap_or(1)
                });
                let mut keep = vec![true; ds.n_rows()];
                for class in 0..ds.n_classes() {
                    if ds.class_size(class) <= target {
                        continue;
                    }
                    let (_, removed) = baselines::rus(
                        ds,
                        class,
                        target,
                        seeding::derive_indexed(seed, "rus-pass", class as u64),
                    )?;
                    for row in removed {
                        keep[row] = false;
                    }
                }
                let kept_rows: Vec<usize> = (0..ds.n_rows()).filter(|&r| keep[r]).collect();
                let rejected: Vec<usize> = (0..ds.n_rows()).filter(|&r| !keep[r]).collect();
                Ok(ResampleOutcome {
                    dataset: ds.subset(&kept_rows),
                    rejected_rows: rejected,
                    provenance: Vec::new(),
                    audits: Vec::new(),
                    dropped: 0,
                })
            }
        }
    }
}

/// GMR settings used by the harness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierSpec {
    /// Component count; `None` sweeps 1..=8 by BIC on each training fold.
    pub gmr_k: Option<usize>,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        Self {
            gmr_k: Some(3),
            max_iter: 200,
            tol: 1e-6,
        }
    }
}

/// Cross-validated evaluation of one (dataset, method) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    /// Confusion counts summed over folds; rows = truth, cols = predicted.
    pub confusion: Vec<Vec<usize>>,
    pub oa: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub g_mean: f64,
    pub per_fold: Vec<Metrics>,
    /// Synthetic points dropped by jitter re-draws, summed over folds.
    pub dropped: usize,
}

pub const REPORT_SCHEMA: &str = "gicaps-report/1";

/// Run k-fold cross-validation: resample the training fold, fit GMR, and
/// score on the fold's test rows plus everything undersampling discarded
/// from the training fold.
///
/// Fold work runs in parallel; per-fold seeds derive from the run seed, so
/// results are identical however the folds are scheduled.
pub fn run_cv(
    ds: &Dataset,
    dataset_name: &str,
    resampler: &ResamplerSpec,
    classifier: &ClassifierSpec,
    k_folds: usize,
    seed: u64,
) -> Result<EvalReport> {
    let folds = dataset::stratified_kfold(ds, k_folds, seeding::derive(seed, "folds"))?;
    let c = ds.n_classes();

    let fold_results: Vec<(Vec<Vec<usize>>, usize)> = folds
        .par_iter()
        .enumerate()
        .map(|(f, (train_idx, test_idx))| -> Result<(Vec<Vec<usize>>, usize)> {
            let train = ds.subset(train_idx);
            let (train_norm, params) = dataset::normalize_minmax(&train)?;
            let fold_seed = seeding::derive_indexed(seed, "fold", f as u64);
            let resampled = resampler.apply(&train_norm, fold_seed)?;

            // rejected training rows join the test set
            let mut eval_rows: Vec<usize> = test_idx.clone();
            eval_rows.extend(resampled.rejected_rows.iter().map(|&local| train_idx[local]));
            if eval_rows.is_empty() {
                log::warn!("fold {f}: empty test set; skipped");
                return Ok((vec![vec![0; c]; c], 0));
            }
            let test = params.apply(&ds.subset(&eval_rows))?;

            let k = match classifier.gmr_k {
                Some(k) => k.min(resampled.dataset.n_rows().saturating_sub(1)).max(1),
                None => gmr::select_k_bic(
                    &resampled.dataset,
                    1,
                    8,
                    seeding::derive_indexed(seed, "fold-bic", f as u64),
                    classifier.max_iter,
                    classifier.tol,
                )?,
            };
            let (model, _trace) = gmr::fit(
                &resampled.dataset,
                k,
                seeding::derive_indexed(seed, "fold-fit", f as u64),
                classifier.max_iter,
                classifier.tol,
            )?;

            let predictions = model.predict_classes(&test);
            let mut confusion = vec![vec![0usize; c]; c];
            for (i, &pred) in predictions.iter().enumerate() {
                confusion[test.labels[i]][pred] += 1;
            }
            Ok((confusion, resampled.dropped))
        })
        .collect::<Result<_>>()?;

    let mut confusion = vec![vec![0usize; c]; c];
    let mut per_fold = Vec::with_capacity(k_folds);
    let mut dropped = 0;
    for (fold_confusion, fold_dropped) in &fold_results {
        dropped += fold_dropped;
        let total: usize = fold_confusion.iter().flatten().sum();
        if total == 0 {
            continue;
        }
        per_fold.push(compute_metrics(fold_confusion)?);
        for i in 0..c {
            for j in 0..c {
                confusion[i][j] += fold_confusion[i][j];
            }
        }
    }
    let mean = |f: fn(&Metrics) -> f64| -> f64 {
        per_fold.iter().map(f).sum::<f64>() / per_fold.len() as f64
    };
    let precision = mean(|m| m.precision);
    let recall = mean(|m| m.recall);
    Ok(EvalReport {
        schema: REPORT_SCHEMA.to_string(),
        dataset: dataset_name.to_string(),
        method: resampler.name().to_string(),
        seed,
        confusion,
        oa: mean(|m| m.oa),
        precision,
        recall,
        f_measure: mean(|m| m.f_measure),
        g_mean: g_mean(precision, recall),
        per_fold,
        dropped,
    })
}

/// Principal components of a point set (eigendecomposition of the covariance
/// of the centered data). Components are ordered by descending eigenvalue;
/// each is sign-fixed so its largest-magnitude loading is positive.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// n_components × D projection matrix.
    pub components: DMatrix<f64>,
}

impl Pca {
    pub fn fit(points: &Array2<f64>, n_components: usize) -> Result<Self> {
        let n = points.nrows();
        let d = points.ncols();
        if n_components == 0 || n_components > d {
            return Err(Error::InvalidConfig(format!(
                "n_components {n_components} outside 1..={d}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidConfig("need at least 2 points for PCA".into()));
        }
        let mean: Vec<f64> = (0..d)
            .map(|j| points.column(j).sum() / n as f64)
            .collect();
        let mut cov = DMatrix::zeros(d, d);
        for i in 0..n {
            let row = points.row(i);
            for a in 0..d {
                for b in a..d {
                    let v = (row[a] - mean[a]) * (row[b] - mean[b]);
                    cov[(a, b)] += v;
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                let v: f64 = cov[(a, b)] / (n as f64 - 1.0);
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        let eigen = SymmetricEigen::new(cov);
        let eigenvalues: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            eigenvalues[b]
                .partial_cmp(&eigenvalues[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut components = DMatrix::zeros(n_components, d);
        for (out, &e) in order.iter().take(n_components).enumerate() {
            let col = eigen.eigenvectors.column(e);
            // sign convention: largest-magnitude loading positive
            let lead = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
                .map(|(i, _)| i)
                .unwrap_or(0);
            let flip = if col[lead] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..d {
                components[(out, j)] = flip * col[j];
            }
        }
        Ok(Self { mean, components })
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        (0..self.components.nrows())
            .map(|c| {
                (0..centered.len())
                    .map(|j| self.components[(c, j)] * centered[j])
                    .sum()
            })
            .collect()
    }
}

/// Minimum cross-class pairwise distance after projecting both classes onto
/// the leading principal components of their union.
pub fn margin_ablation(
    ds: &Dataset,
    class_a: usize,
    class_b: usize,
    n_pca: usize,
) -> Result<f64> {
    let rows_a = &ds.class_index[class_a];
    let rows_b = &ds.class_index[class_b];
    if rows_a.is_empty() || rows_b.is_empty() {
        return Err(Error::EmptyClass {
            class: if rows_a.is_empty() { class_a } else { class_b },
        });
    }
    let union: Vec<usize> = rows_a.iter().chain(rows_b.iter()).copied().collect();
    let mut points = Array2::zeros((union.len(), ds.n_features()));
    for (out, &r) in union.iter().enumerate() {
        points.row_mut(out).assign(&ds.features.row(r));
    }
    let pca = Pca::fit(&points, n_pca)?;
    let proj_a: Vec<Vec<f64>> = rows_a.iter().map(|&r| pca.transform(ds.row(r))).collect();
    let proj_b: Vec<Vec<f64>> = rows_b.iter().map(|&r| pca.transform(ds.row(r))).collect();
    let mut best = f64::INFINITY;
    for a in &proj_a {
        for b in &proj_b {
            best = best.min(geometry::distance(a, b));
        }
    }
    Ok(best)
}

/// One line per report, machine-readable.
pub fn write_reports_jsonl(reports: &[EvalReport], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in reports {
        serde_json::to_writer(&mut f, r).map_err(std::io::Error::other)?;
        writeln!(f)?;
    }
    f.flush()?;
    Ok(())
}

/// Aligned plain-text table with the benchmark's metric columns.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:<10} {:>8} {:>10} {:>8} {:>10} {:>8}\n",
        "Dataset", "Method", "OA", "Precision", "Recall", "F-measure", "G-Mean"
    ));
    out.push_str(&"-".repeat(76));
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{:<16} {:<10} {:>8.2} {:>10.2} {:>8.2} {:>10.2} {:>8.2}\n",
            r.dataset, r.method, r.oa, r.precision, r.recall, r.f_measure, r.g_mean
        ));
    }
    out
}
