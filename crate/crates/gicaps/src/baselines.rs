//! Reference resamplers: SMOTE, ADASYN, random over- and under-sampling.
//!
//! Synthetic points from SMOTE/ADASYN carry the same provenance records as
//! the geometric oversampler (with no forbidden intervals), so violation
//! audits can treat all methods uniformly.

use rand::Rng;

use crate::dataset::Dataset;
use crate::geometry;
use crate::oversample::{OversampleOutcome, SyntheticProvenance};
use crate::seeding;
use crate::undersample::largest_remainder;
use crate::{Error, Result};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BaselineConfig {
    pub k_neighbors: usize,
    /// SMOTE growth: each point spawns `percent/100` synthetics.
    pub smote_percent: usize,
    /// ADASYN balance level in (0, 1].
    pub adasyn_beta: f64,
    /// Optional cap on the majority size ADASYN balances toward.
    pub adasyn_major_cap: Option<usize>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            smote_percent: 300,
            adasyn_beta: 1.0,
            adasyn_major_cap: None,
        }
    }
}

fn k_nearest(ds: &Dataset, target: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&r| r != target)
        .map(|&r| (geometry::distance(ds.row(target), ds.row(r)), r))
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    scored.truncate(k);
    scored.into_iter().map(|(_, r)| r).collect()
}

/// Open-interval uniform draw; `u = 0` would clone the source point.
fn open_unit(rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.random_range(0.0..1.0);
        if u > 0.0 {
            return u;
        }
    }
}

fn interpolated(ds: &Dataset, from: usize, to: usize, u: f64) -> Vec<f64> {
    ds.row(from)
        .iter()
        .zip(ds.row(to))
        .map(|(a, b)| a + u * (b - a))
        .collect()
}

/// SMOTE: every class point spawns `percent/100` synthetics on open segments
/// toward uniformly chosen same-class nearest neighbors.
///
/// A `percent` remainder below 100 is honored by giving one extra synthetic
/// to a random subsample of the class. `k_neighbors` is reduced (with a
/// warning) when the class is too small.
pub fn smote(
    ds: &Dataset,
    class_i: usize,
    cfg: &BaselineConfig,
    seed: u64,
) -> Result<OversampleOutcome> {
    let rows = ds.class_index[class_i].clone();
    if rows.len() < 2 {
        return Err(Error::SingletonClass { class: class_i });
    }
    let k = if cfg.k_neighbors >= rows.len() {
        log::warn!(
            "class {class_i}: k_neighbors {} >= class size {}; using {}",
            cfg.k_neighbors,
            rows.len(),
            rows.len() - 1
        );
        rows.len() - 1
    } else {
        cfg.k_neighbors
    };

    let mut rng = seeding::rng(seeding::derive_indexed(seed, "smote-class", class_i as u64));
    let full_rounds = cfg.smote_percent / 100;
    let remainder = cfg.smote_percent % 100;
    let extra_count = (remainder * rows.len()) / 100;
    let mut extras = vec![false; rows.len()];
    if extra_count > 0 {
        // random subsample of seeds gets one extra synthetic
        let mut order: Vec<usize> = (0..rows.len()).collect();
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for &slot in order.iter().take(extra_count) {
            extras[slot] = true;
        }
    }

    let mut provenance = Vec::new();
    for (slot, &m) in rows.iter().enumerate() {
        let neighbors = k_nearest(ds, m, &rows, k);
        let n_here = full_rounds + usize::from(extras[slot]);
        for _ in 0..n_here {
            let v = neighbors[rng.random_range(0..neighbors.len())];
            let u = open_unit(&mut rng);
            provenance.push(SyntheticProvenance {
                class_id: class_i,
                m_index: m,
                v_index: v,
                param: u,
                nml: Vec::new(),
                point: interpolated(ds, m, v, u),
            });
        }
    }
    let points: Vec<Vec<f64>> = provenance.iter().map(|r| r.point.clone()).collect();
    Ok(OversampleOutcome {
        dataset: ds.append_rows(&points, class_i),
        provenance,
        dropped: 0,
    })
}

/// ADASYN: synthetic budget `G = β·(majority − class size)` distributed
/// toward points with many foreign-class neighbors.
///
/// The per-point ratio counts other-class members among the `k` nearest
/// neighbors over the whole dataset; generation then runs along same-class
/// neighbor segments. All-zero ratios fall back to uniform weights with a
/// warning. Per-point counts are rounded by largest remainder so exactly
/// `G` points are emitted.
pub fn adasyn(
    ds: &Dataset,
    class_i: usize,
    cfg: &BaselineConfig,
    seed: u64,
) -> Result<OversampleOutcome> {
    let rows = ds.class_index[class_i].clone();
    if rows.len() < 2 {
        return Err(Error::SingletonClass { class: class_i });
    }
    if !(cfg.adasyn_beta >= 0.0 && cfg.adasyn_beta <= 1.0) {
        return Err(Error::InvalidConfig("adasyn_beta must be in [0, 1]".into()));
    }
    let majority = ds
        .class_counts()
        .into_iter()
        .max()
        .expect("non-empty dataset");
    let majority = cfg.adasyn_major_cap.map_or(majority, |cap| majority.min(cap));
    let g_total = (cfg.adasyn_beta * majority.saturating_sub(rows.len()) as f64).round() as usize;
    if g_total == 0 {
        return Ok(OversampleOutcome {
            dataset: ds.clone(),
            provenance: Vec::new(),
            dropped: 0,
        });
    }

    let all_rows: Vec<usize> = (0..ds.n_rows()).collect();
    let k = cfg.k_neighbors.min(ds.n_rows() - 1).max(1);
    let ratios: Vec<f64> = rows
        .iter()
        .map(|&m| {
            let near = k_nearest(ds, m, &all_rows, k);
            near.iter().filter(|&&r| ds.labels[r] != class_i).count() as f64 / k as f64
        })
        .collect();
    let ratio_sum: f64 = ratios.iter().sum();
    let weights: Vec<f64> = if ratio_sum > 0.0 {
        ratios.iter().map(|r| r / ratio_sum).collect()
    } else {
        log::warn!("class {class_i}: no foreign neighbors anywhere; uniform ADASYN weights");
        vec![1.0 / rows.len() as f64; rows.len()]
    };
    let shares: Vec<f64> = weights.iter().map(|w| w * g_total as f64).collect();
    let per_point = largest_remainder(&shares, g_total);

    let gen_k = cfg.k_neighbors.min(rows.len() - 1).max(1);
    let mut rng = seeding::rng(seeding::derive_indexed(seed, "adasyn-class", class_i as u64));
    let mut provenance = Vec::new();
    for (slot, &m) in rows.iter().enumerate() {
        if per_point[slot] == 0 {
            continue;
        }
        let neighbors = k_nearest(ds, m, &rows, gen_k);
        for _ in 0..per_point[slot] {
            let v = neighbors[rng.random_range(0..neighbors.len())];
            let u = open_unit(&mut rng);
            provenance.push(SyntheticProvenance {
                class_id: class_i,
                m_index: m,
                v_index: v,
                param: u,
                nml: Vec::new(),
                point: interpolated(ds, m, v, u),
            });
        }
    }
    let points: Vec<Vec<f64>> = provenance.iter().map(|r| r.point.clone()).collect();
    Ok(OversampleOutcome {
        dataset: ds.append_rows(&points, class_i),
        provenance,
        dropped: 0,
    })
}

/// Random over-sampling: duplicate rows uniformly with replacement until the
/// class reaches `target`.
pub fn ros(ds: &Dataset, class_i: usize, target: usize, seed: u64) -> Result<OversampleOutcome> {
    let rows = ds.class_index[class_i].clone();
    if target < rows.len() {
        return Err(Error::InvalidConfig(format!(
            "ros target {target} below class size {}",
            rows.len()
        )));
    }
    let mut rng = seeding::rng(seeding::derive_indexed(seed, "ros-class", class_i as u64));
    let mut provenance = Vec::new();
    for _ in 0..target - rows.len() {
        let m = rows[rng.random_range(0..rows.len())];
        provenance.push(SyntheticProvenance {
            class_id: class_i,
            m_index: m,
            v_index: m,
            param: 0.0,
            nml: Vec::new(),
            point: ds.row(m).to_vec(),
        });
    }
    let points: Vec<Vec<f64>> = provenance.iter().map(|r| r.point.clone()).collect();
    Ok(OversampleOutcome {
        dataset: ds.append_rows(&points, class_i),
        provenance,
        dropped: 0,
    })
}

/// Random under-sampling: keep a uniform without-replacement sample of
/// `target` rows. Returns the reduced dataset and the removed original rows.
pub fn rus(ds: &Dataset, class_i: usize, target: usize, seed: u64) -> Result<(Dataset, Vec<usize>)> {
    let rows = ds.class_index[class_i].clone();
    if target > rows.len() {
        return Err(Error::InvalidConfig(format!(
            "rus target {target} above class size {}",
            rows.len()
        )));
    }
    let mut rng = seeding::rng(seeding::derive_indexed(seed, "rus-class", class_i as u64));
    let mut shuffled = rows.clone();
    for i in (1..shuffled.len()).rev() {
        let j = rng.random_range(0..=i);
        shuffled.swap(i, j);
    }
    let mut kept: Vec<usize> = shuffled[..target].to_vec();
    kept.sort_unstable();
    let mut removed: Vec<usize> = shuffled[target..].to_vec();
    removed.sort_unstable();

    let keep_rows: Vec<usize> = (0..ds.n_rows())
        .filter(|r| ds.labels[*r] != class_i || kept.binary_search(r).is_ok())
        .collect();
    Ok((ds.subset(&keep_rows), removed))
}
