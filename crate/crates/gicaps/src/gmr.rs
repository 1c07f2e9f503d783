//! Gaussian-mixture-regression classifier.
//!
//! A K-component joint Gaussian mixture is fitted by EM over ξ = [x; y],
//! where y is a scalar encoding of the class id (0, 1, …, C−1 by default).
//! Prediction is the posterior mean
//!
//! ŷ = Σₖ h(k)·(μʸₖ + Σˣʸₖ (Σˣₖ)⁻¹ (x − μˣₖ)),
//!
//! with h(k) the responsibilities of the feature-space marginals, then ŷ is
//! snapped to the nearest class value. Densities are evaluated in log space
//! and every solve goes through a Cholesky factorization.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::dataset::Dataset;
use crate::{Error, Result};

/// Each M-step covariance gets `RIDGE_FACTOR · mean(diag(S))` added to its
/// diagonal, where `S` is the covariance of the whole joint dataset. The
/// ridge is a constant per fit: a per-component ridge would shrink together
/// with a collapsing component and let its density spike unboundedly.
pub const RIDGE_FACTOR: f64 = 1e-6;

const LN_2PI: f64 = 1.8378770664093453;

/// Fitted joint mixture with the partition blocks needed for regression.
#[derive(Debug, Clone)]
pub struct GmrModel {
    /// Mixing weights, a simplex.
    pub weights: Vec<f64>,
    /// Joint means in ℝ^(D+1): features first, class value last.
    pub means: Vec<DVector<f64>>,
    /// Joint covariances, (D+1)×(D+1), symmetric positive-definite.
    pub covariances: Vec<DMatrix<f64>>,
    /// Scalar encoding per class id, ascending.
    pub class_values: Vec<f64>,
    /// Relative ridge factor applied at fit time.
    pub reg: f64,
    /// Feature dimension D.
    pub dim: usize,
}

/// Per-iteration log of an EM run.
#[derive(Debug, Clone, Default)]
pub struct FitTrace {
    /// Data log-likelihood at each E-step.
    pub log_likelihood: Vec<f64>,
    pub warnings: Vec<String>,
}

impl GmrModel {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    /// Responsibilities h(k) of the feature-space marginals at `x`,
    /// computed in log space; sums to 1.
    pub fn responsibilities(&self, x: &[f64]) -> Vec<f64> {
        let parts = self.marginal_parts();
        responsibilities_from_parts(&parts, &self.weights, x, self.dim)
    }

    /// Posterior-mean estimate ŷ for a feature vector.
    pub fn predict_value(&self, x: &[f64]) -> f64 {
        let parts = self.marginal_parts();
        predict_with_parts(self, &parts, x)
    }

    /// Nearest class value to ŷ; ties go to the smaller class id.
    pub fn predict_class(&self, x: &[f64]) -> usize {
        nearest_class(&self.class_values, self.predict_value(x))
    }

    /// Batch prediction reusing one set of factorizations.
    pub fn predict_classes(&self, ds: &Dataset) -> Vec<usize> {
        let parts = self.marginal_parts();
        (0..ds.n_rows())
            .map(|i| {
                nearest_class(
                    &self.class_values,
                    predict_with_parts(self, &parts, ds.row(i)),
                )
            })
            .collect()
    }

    fn marginal_parts(&self) -> Vec<MarginalPart> {
        let d = self.dim;
        self.means
            .iter()
            .zip(&self.covariances)
            .map(|(mean, cov)| {
                let mu_x = mean.rows(0, d).into_owned();
                let sigma_x = cov.view((0, 0), (d, d)).into_owned();
                let chol = Cholesky::new(sigma_x).expect("model covariance blocks are PD");
                let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                MarginalPart {
                    mu_x,
                    mu_y: mean[d],
                    sigma_xy: cov.view((0, d), (d, 1)).into_owned(),
                    chol,
                    logdet,
                }
            })
            .collect()
    }
}

struct MarginalPart {
    mu_x: DVector<f64>,
    mu_y: f64,
    sigma_xy: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    logdet: f64,
}

fn nearest_class(class_values: &[f64], y_hat: f64) -> usize {
    let mut best = (0usize, f64::INFINITY);
    for (c, &v) in class_values.iter().enumerate() {
        let d = (y_hat - v).abs();
        if d < best.1 {
            best = (c, d);
        }
    }
    best.0
}

fn responsibilities_from_parts(
    parts: &[MarginalPart],
    weights: &[f64],
    x: &[f64],
    dim: usize,
) -> Vec<f64> {
    let xv = DVector::from_column_slice(x);
    let logs: Vec<f64> = parts
        .iter()
        .zip(weights)
        .map(|(p, &w)| {
            let centered = &xv - &p.mu_x;
            let solved = p.chol.solve(&centered);
            let quad = centered.dot(&solved);
            w.ln() - 0.5 * (p.logdet + quad + dim as f64 * LN_2PI)
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        // all densities underflow: nearest component by Mahalanobis distance
        log::warn!("all component densities vanished at a query; Mahalanobis fallback");
        let nearest = parts
            .iter()
            .map(|p| {
                let centered = &xv - &p.mu_x;
                centered.dot(&p.chol.solve(&centered))
            })
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .map(|(k, _)| k)
            .unwrap_or(0);
        let mut h = vec![0.0; parts.len()];
        h[nearest] = 1.0;
        return h;
    }
    let mut h: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = h.iter().sum();
    for v in &mut h {
        *v /= total;
    }
    h
}

fn predict_with_parts(model: &GmrModel, parts: &[MarginalPart], x: &[f64]) -> f64 {
    let h = responsibilities_from_parts(parts, &model.weights, x, model.dim);
    let xv = DVector::from_column_slice(x);
    let mut y_hat = 0.0;
    for (p, hk) in parts.iter().zip(h) {
        if hk == 0.0 {
            continue;
        }
        let centered = &xv - &p.mu_x;
        let solved = p.chol.solve(&centered);
        let conditional = p.mu_y + (p.sigma_xy.transpose() * &solved)[(0, 0)];
        y_hat += hk * conditional;
    }
    y_hat
}

/// Fit with class ids encoded as 0, 1, …, C−1.
pub fn fit(
    ds: &Dataset,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<(GmrModel, FitTrace)> {
    let values: Vec<f64> = (0..ds.n_classes()).map(|c| c as f64).collect();
    fit_with_encoding(ds, &values, k, seed, max_iter, tol)
}

/// Fit a joint mixture with custom class encodings (index = class id).
///
/// EM stops when the log-likelihood gain drops below `tol` or after
/// `max_iter` iterations. Initialization is k-means on the joint vectors
/// with seeded farthest-point seeding; each M-step re-adds the relative
/// ridge. Components whose weight collapses are re-seeded at the worst
/// modeled point.
pub fn fit_with_encoding(
    ds: &Dataset,
    class_values: &[f64],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<(GmrModel, FitTrace)> {
    let n = ds.n_rows();
    let d = ds.n_features();
    if k == 0 || k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    if class_values.len() != ds.n_classes() {
        return Err(Error::DimensionMismatch {
            expected: ds.n_classes(),
            got: class_values.len(),
        });
    }

    // joint data ξ = [x; y]
    let joint: Vec<DVector<f64>> = (0..n)
        .map(|i| {
            let mut v = DVector::zeros(d + 1);
            for (j, &f) in ds.row(i).iter().enumerate() {
                v[j] = f;
            }
            v[d] = class_values[ds.labels[i]];
            v
        })
        .collect();

    // init responsibilities from k-means hard assignments on the joint space
    let mut joint_matrix = ndarray::Array2::zeros((n, d + 1));
    for (i, v) in joint.iter().enumerate() {
        for (j, &val) in v.iter().enumerate() {
            joint_matrix[(i, j)] = val;
        }
    }
    let km = crate::clustering::kmeans(&joint_matrix, k, seed, 50)?;
    let mut resp = DMatrix::zeros(n, k);
    for (i, &a) in km.assignments.iter().enumerate() {
        resp[(i, a)] = 1.0;
    }

    // constant ridge from the data covariance diagonal
    let data_mean: DVector<f64> = joint.iter().sum::<DVector<f64>>() / n as f64;
    let data_diag_mean: f64 = joint
        .iter()
        .map(|xi| (xi - &data_mean).norm_squared())
        .sum::<f64>()
        / (n as f64 * (d + 1) as f64);
    let ridge = (RIDGE_FACTOR * data_diag_mean).max(1e-300);

    let mut trace = FitTrace::default();
    let mut weights = vec![0.0; k];
    let mut means: Vec<DVector<f64>> = vec![DVector::zeros(d + 1); k];
    let mut covs: Vec<DMatrix<f64>> = vec![DMatrix::zeros(d + 1, d + 1); k];

    let m_step = |resp: &DMatrix<f64>,
                  weights: &mut Vec<f64>,
                  means: &mut Vec<DVector<f64>>,
                  covs: &mut Vec<DMatrix<f64>>| {
        for c in 0..k {
            let nk: f64 = (0..n).map(|i| resp[(i, c)]).sum();
            weights[c] = nk / n as f64;
            if nk <= 0.0 {
                continue;
            }
            let mut mu = DVector::zeros(d + 1);
            for (i, xi) in joint.iter().enumerate() {
                mu += xi * resp[(i, c)];
            }
            mu /= nk;
            let mut cov = DMatrix::zeros(d + 1, d + 1);
            for (i, xi) in joint.iter().enumerate() {
                let centered = xi - &mu;
                cov += (&centered * centered.transpose()) * resp[(i, c)];
            }
            cov /= nk;
            // symmetrize and ridge
            cov = (&cov + cov.transpose()) * 0.5;
            for j in 0..d + 1 {
                cov[(j, j)] += ridge;
            }
            means[c] = mu;
            covs[c] = cov;
        }
    };

    m_step(&resp, &mut weights, &mut means, &mut covs);

    let mut last_ll = f64::NEG_INFINITY;
    for _iter in 0..max_iter {
        // E-step with per-component factorizations
        let factors: Vec<(Cholesky<f64, Dyn>, f64)> = covs
            .iter()
            .map(|cov| {
                let chol = Cholesky::new(cov.clone())
                    .ok_or(Error::NotPositiveDefinite)?;
                let logdet: f64 =
                    2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                Ok((chol, logdet))
            })
            .collect::<Result<_>>()?;

        let mut ll = 0.0;
        let mut point_ll = vec![0.0; n];
        for (i, xi) in joint.iter().enumerate() {
            let logs: Vec<f64> = (0..k)
                .map(|c| {
                    let centered = xi - &means[c];
                    let quad = centered.dot(&factors[c].0.solve(&centered));
                    weights[c].max(1e-300).ln()
                        - 0.5 * (factors[c].1 + quad + (d + 1) as f64 * LN_2PI)
                })
                .collect();
            let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
            let log_norm = max + sum.ln();
            for c in 0..k {
                resp[(i, c)] = (logs[c] - log_norm).exp();
            }
            point_ll[i] = log_norm;
            ll += log_norm;
        }
        trace.log_likelihood.push(ll);

        // collapsed components restart at the worst-modeled point
        for c in 0..k {
            let nk: f64 = (0..n).map(|i| resp[(i, c)]).sum();
            if nk / (n as f64) < 1e-8 {
                let worst = (0..n)
                    .min_by(|&a, &b| point_ll[a].partial_cmp(&point_ll[b]).unwrap())
                    .unwrap();
                let msg = format!("component {c} collapsed; re-seeded at point {worst}");
                log::warn!("{msg}");
                trace.warnings.push(msg);
                for i in 0..n {
                    resp[(i, c)] = if i == worst { 1.0 } else { 0.0 };
                }
            }
        }

        if ll - last_ll < tol {
            break;
        }
        last_ll = ll;
        m_step(&resp, &mut weights, &mut means, &mut covs);
    }

    let model = GmrModel {
        weights,
        means,
        covariances: covs,
        class_values: class_values.to_vec(),
        reg: RIDGE_FACTOR,
        dim: d,
    };
    Ok((model, trace))
}

/// Bayesian information criterion of a fitted model on a dataset.
pub fn bic(model: &GmrModel, ds: &Dataset) -> f64 {
    let d = model.dim + 1;
    let k = model.k() as f64;
    let params = (k - 1.0) + k * d as f64 + k * (d * (d + 1) / 2) as f64;
    let values = &model.class_values;
    // joint log-likelihood of the data under the model
    let mut ll = 0.0;
    let factors: Vec<(Cholesky<f64, Dyn>, f64)> = model
        .covariances
        .iter()
        .map(|cov| {
            let chol = Cholesky::new(cov.clone()).expect("model covariance PD");
            let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            (chol, logdet)
        })
        .collect();
    for i in 0..ds.n_rows() {
        let mut xi = DVector::zeros(d);
        for (j, &f) in ds.row(i).iter().enumerate() {
            xi[j] = f;
        }
        xi[d - 1] = values[ds.labels[i]];
        let logs: Vec<f64> = (0..model.k())
            .map(|c| {
                let centered = &xi - &model.means[c];
                let quad = centered.dot(&factors[c].0.solve(&centered));
                model.weights[c].max(1e-300).ln() - 0.5 * (factors[c].1 + quad + d as f64 * LN_2PI)
            })
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ll += max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    }
    -2.0 * ll + params * (ds.n_rows() as f64).ln()
}

/// Sweep K over an inclusive range and keep the BIC minimizer.
pub fn select_k_bic(
    ds: &Dataset,
    k_min: usize,
    k_max: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<usize> {
    if k_min == 0 || k_min > k_max {
        return Err(Error::InvalidConfig(format!(
            "invalid K range {k_min}..={k_max}"
        )));
    }
    let mut best = (k_min, f64::INFINITY);
    for k in k_min..=k_max.min(ds.n_rows().saturating_sub(1)) {
        let (model, _) = fit(ds, k, seed, max_iter, tol)?;
        let score = bic(&model, ds);
        if score < best.1 {
            best = (k, score);
        }
    }
    Ok(best.0)
}

/// Serialize to a versioned plain-text format; reals carry 17 significant
/// digits so reload is bit-exact.
pub fn save(model: &GmrModel, path: &Path) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "gicaps-gmr v1").expect("string write");
    writeln!(out, "dim {}", model.dim).expect("string write");
    writeln!(out, "components {}", model.k()).expect("string write");
    writeln!(out, "reg {:.17e}", model.reg).expect("string write");
    write!(out, "classes").expect("string write");
    for v in &model.class_values {
        write!(out, " {v:.17e}").expect("string write");
    }
    writeln!(out).expect("string write");
    for c in 0..model.k() {
        writeln!(out, "component {c}").expect("string write");
        writeln!(out, "weight {:.17e}", model.weights[c]).expect("string write");
        write!(out, "mean").expect("string write");
        for v in model.means[c].iter() {
            write!(out, " {v:.17e}").expect("string write");
        }
        writeln!(out).expect("string write");
        write!(out, "cov").expect("string write");
        for i in 0..model.dim + 1 {
            for j in 0..model.dim + 1 {
                write!(out, " {:.17e}", model.covariances[c][(i, j)]).expect("string write");
            }
        }
        writeln!(out).expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<GmrModel> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let mut expect = |prefix: &str| -> Result<(usize, String)> {
        let (no, line) = lines
            .next()
            .ok_or(Error::ModelParse {
                line: 0,
                message: "unexpected end of file".into(),
            })?;
        let rest = line.strip_prefix(prefix).ok_or_else(|| Error::ModelParse {
            line: no + 1,
            message: format!("expected {prefix:?}"),
        })?;
        Ok((no + 1, rest.trim().to_string()))
    };

    let (line, version) = expect("gicaps-gmr")?;
    if version != "v1" {
        return Err(Error::ModelParse {
            line,
            message: format!("unsupported version {version:?}"),
        });
    }
    let parse_usize = |line: usize, s: &str| -> Result<usize> {
        s.parse().map_err(|_| Error::ModelParse {
            line,
            message: format!("bad integer {s:?}"),
        })
    };
    let parse_floats = |line: usize, s: &str| -> Result<Vec<f64>> {
        s.split_whitespace()
            .map(|t| {
                t.parse().map_err(|_| Error::ModelParse {
                    line,
                    message: format!("bad real {t:?}"),
                })
            })
            .collect()
    };

    let (line, dim_s) = expect("dim")?;
    let dim = parse_usize(line, &dim_s)?;
    let (line, k_s) = expect("components")?;
    let k = parse_usize(line, &k_s)?;
    let (line, reg_s) = expect("reg")?;
    let reg = parse_floats(line, &reg_s)?[0];
    let (line, classes_s) = expect("classes")?;
    let class_values = parse_floats(line, &classes_s)?;

    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut covariances = Vec::with_capacity(k);
    for _ in 0..k {
        expect("component")?;
        let (line, w_s) = expect("weight")?;
        weights.push(parse_floats(line, &w_s)?[0]);
        let (line, mean_s) = expect("mean")?;
        let mean = parse_floats(line, &mean_s)?;
        if mean.len() != dim + 1 {
            return Err(Error::ModelParse {
                line,
                message: format!("mean has {} entries, expected {}", mean.len(), dim + 1),
            });
        }
        means.push(DVector::from_vec(mean));
        let (line, cov_s) = expect("cov")?;
        let flat = parse_floats(line, &cov_s)?;
        if flat.len() != (dim + 1) * (dim + 1) {
            return Err(Error::ModelParse {
                line,
                message: "covariance size mismatch".into(),
            });
        }
        covariances.push(DMatrix::from_row_slice(dim + 1, dim + 1, &flat));
    }
    Ok(GmrModel {
        weights,
        means,
        covariances,
        class_values,
        reg,
        dim,
    })
}
