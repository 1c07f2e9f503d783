//! Boundary-respecting oversampling of a minority class.
//!
//! For every minority point `x_m` a neighborhood of same-class interpolation
//! partners and nearby other-class interferers is built. Each candidate
//! segment `x_m → x_v` gets a no-man's-land: the span of estimated points
//! where lines between interferer pairs cross the segment with a small
//! crossing distance. Synthetic counts are allocated proportionally to each
//! segment's free space, and points are interpolated at uniform spacing over
//! the free sub-intervals, with a small Gaussian jitter that is re-drawn if
//! it would land inside the forbidden span.
//!
//! Every synthetic point carries a provenance record (generating pair,
//! segment parameter, forbidden intervals) so the zero-violation property is
//! checkable after the fact.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering;
use crate::dataset::Dataset;
use crate::geometry::{self, NoMansLand, SegmentFrame};
use crate::seeding;
use crate::undersample::largest_remainder;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OversampleConfig {
    /// Synthetic points to add per class id (H_i).
    pub h_target: BTreeMap<usize, usize>,
    /// Same-class interpolation partners per point.
    pub kappa_same: usize,
    /// Interferer-pool radius as a multiple of the class's median
    /// nearest-neighbor distance.
    pub lambda_v: f64,
    /// Other-class neighbors paired with each near-segment interferer.
    pub kappa_q: usize,
    /// Crossing-distance threshold as a fraction of the segment length.
    pub tau_cross_rel: f64,
    /// Free-space scale in (0, 1]; widens the forbidden span.
    pub rho: f64,
    /// Jitter std-dev as a fraction of the segment length.
    pub noise_rel: f64,
    /// Optional k-means split of the class before generation; synthetic
    /// budget is spread inversely to sub-cluster size.
    pub pre_cluster: Option<usize>,
}

impl Default for OversampleConfig {
    fn default() -> Self {
        Self {
            h_target: BTreeMap::new(),
            kappa_same: 5,
            lambda_v: 2.0,
            kappa_q: 3,
            tau_cross_rel: 0.1,
            rho: 0.9,
            noise_rel: 0.01,
            pre_cluster: None,
        }
    }
}

impl OversampleConfig {
    pub fn with_h(mut self, class: usize, h: usize) -> Self {
        self.h_target.insert(class, h);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.kappa_same == 0 || self.kappa_q == 0 {
            return Err(Error::InvalidConfig(
                "neighbor counts must be positive".into(),
            ));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidConfig("rho must be in (0, 1]".into()));
        }
        if self.lambda_v <= 0.0 || self.tau_cross_rel < 0.0 || self.noise_rel < 0.0 {
            return Err(Error::InvalidConfig(
                "radii and noise must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Segment-level generation plan.
#[derive(Debug, Clone)]
pub struct SegmentBudget {
    /// Global row indices of the pair in the input dataset.
    pub m_index: usize,
    pub v_index: usize,
    /// `S^(x_m x_v)`: ρ-scaled free length of this segment.
    pub free_length: f64,
    /// Points allocated to this segment.
    pub count: usize,
    pub nml: NoMansLand,
}

/// Interpolation partners and the other-class pool around one point.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    /// Same-class partner rows, nearest first.
    pub v_candidates: Vec<usize>,
    /// Other-class rows near the neighborhood, by class id.
    pub interferer_pool: BTreeMap<usize, Vec<usize>>,
}

/// One synthetic point's origin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticProvenance {
    pub class_id: usize,
    /// Generating pair: rows in the dataset the resampler was given.
    pub m_index: usize,
    pub v_index: usize,
    /// Final position along the segment as a fraction of its length.
    pub param: f64,
    /// Forbidden intervals of the generating segment (empty for baselines).
    pub nml: Vec<(f64, f64)>,
    pub point: Vec<f64>,
}

/// Result of one oversampling run.
#[derive(Debug, Clone)]
pub struct OversampleOutcome {
    pub dataset: Dataset,
    pub provenance: Vec<SyntheticProvenance>,
    /// Points abandoned after repeated jitter re-draws.
    pub dropped: usize,
}

pub fn write_provenance_jsonl(records: &[SyntheticProvenance], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r).map_err(std::io::Error::other)?;
        writeln!(f)?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_provenance_jsonl(path: &Path) -> Result<Vec<SyntheticProvenance>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut records = Vec::new();
    for line in f.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(std::io::Error::other)?);
    }
    Ok(records)
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// `k` nearest rows to `target` among `candidates` (excluding `target`
/// itself), ties toward the lower row id.
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

/// Median distance-to-nearest-same-class-neighbor over a class.
fn median_nn_distance(ds: &Dataset, class: usize) -> f64 {
    let rows = &ds.class_index[class];
    let dists: Vec<f64> = rows
        .iter()
        .map(|&r| {
            rows.iter()
                .filter(|&&o| o != r)
                .map(|&o| geometry::distance(ds.row(r), ds.row(o)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    median(dists)
}

/// Same-class partners of `x_m` and the other-class pool around the
/// neighborhood.
///
/// The pool holds, per class `j ≠ class_i`, the rows within
/// `lambda_v · median_nn` of the midpoint between `x_m` and its farthest
/// partner.
pub fn build_neighborhood(
    ds: &Dataset,
    class_i: usize,
    m_index: usize,
    cfg: &OversampleConfig,
) -> Result<Neighborhood> {
    if ds.class_size(class_i) < 2 {
        return Err(Error::SingletonClass { class: class_i });
    }
    let median_nn = median_nn_distance(ds, class_i);
    Ok(neighborhood_with_median(
        ds,
        class_i,
        m_index,
        &ds.class_index[class_i],
        median_nn,
        cfg,
    ))
}

fn neighborhood_with_median(
    ds: &Dataset,
    class_i: usize,
    m_index: usize,
    partners: &[usize],
    median_nn: f64,
    cfg: &OversampleConfig,
) -> Neighborhood {
    let v_candidates = k_nearest(ds, m_index, partners, cfg.kappa_same);
    let mut interferer_pool = BTreeMap::new();
    if let Some(&far) = v_candidates.last() {
        let mid: Vec<f64> = ds
            .row(m_index)
            .iter()
            .zip(ds.row(far))
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let radius = cfg.lambda_v * median_nn;
        for (j, rows) in ds.class_index.iter().enumerate() {
            if j == class_i {
                continue;
            }
            let near: Vec<usize> = rows
                .iter()
                .copied()
                .filter(|&r| geometry::distance(ds.row(r), &mid) <= radius)
                .collect();
            if !near.is_empty() {
                interferer_pool.insert(j, near);
            }
        }
    }
    Neighborhood {
        v_candidates,
        interferer_pool,
    }
}

/// No-man's-land of one segment against the pooled interferers.
///
/// Per class `j`: pool points whose perpendicular distance to the segment
/// line is at most the segment length form `R_j`; each pairs with its
/// `kappa_q` nearest class-`j` neighbors (`Q_j`). All pairs across classes
/// feed one crossing sweep with `τ = tau_cross_rel · ‖ab‖`.
pub fn segment_interference(
    ds: &Dataset,
    frame: &SegmentFrame,
    interferer_pool: &BTreeMap<usize, Vec<usize>>,
    cfg: &OversampleConfig,
) -> NoMansLand {
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (&class_j, pool) in interferer_pool {
        for &r in pool {
            let (_, perp) = geometry::project_on_segment(frame, ds.row(r));
            if perp > frame.len {
                continue;
            }
            for q in k_nearest(ds, r, &ds.class_index[class_j], cfg.kappa_q) {
                pairs.push((ds.row(q).to_vec(), ds.row(r).to_vec()));
            }
        }
    }
    geometry::build_no_mans_land(frame, &pairs, cfg.tau_cross_rel * frame.len, cfg.rho)
}

/// Fill in per-segment counts from the two-level proportional shares,
/// rounded by largest remainder so the class total is exact.
///
/// Level one splits `h_i` across the `x_m` groups by their summed free
/// space; level two splits each group's allotment across its segments.
/// Segments (and groups) with zero free space get zero.
pub fn allocate_counts(budgets: &mut [SegmentBudget], h_i: usize) -> Result<()> {
    if h_i == 0 {
        return Ok(());
    }
    let total_s: f64 = budgets.iter().map(|b| b.free_length).sum();
    if budgets.is_empty() || total_s <= 0.0 {
        return Err(Error::FullyEnclosed {
            class: 0,
            diagnostics: format!(
                "all {} candidate segments have zero free space",
                budgets.len()
            ),
        });
    }

    // group segment slots by x_m, ascending
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, b) in budgets.iter().enumerate() {
        groups.entry(b.m_index).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = groups.into_values().collect();
    let group_sums: Vec<f64> = groups
        .iter()
        .map(|idx| idx.iter().map(|&i| budgets[i].free_length).sum())
        .collect();

    let positive: Vec<usize> = (0..groups.len()).filter(|&g| group_sums[g] > 0.0).collect();
    let shares: Vec<f64> = positive
        .iter()
        .map(|&g| h_i as f64 * group_sums[g] / total_s)
        .collect();
    let group_counts = largest_remainder(&shares, h_i);

    for (&g, n_m) in positive.iter().zip(group_counts) {
        if n_m == 0 {
            continue;
        }
        let seg_positive: Vec<usize> = groups[g]
            .iter()
            .copied()
            .filter(|&i| budgets[i].free_length > 0.0)
            .collect();
        let seg_shares: Vec<f64> = seg_positive
            .iter()
            .map(|&i| n_m as f64 * budgets[i].free_length / group_sums[g])
            .collect();
        let seg_counts = largest_remainder(&seg_shares, n_m);
        for (&i, c) in seg_positive.iter().zip(seg_counts) {
            budgets[i].count = c;
        }
    }
    Ok(())
}

/// Interpolate `budget.count` points over the free sub-intervals of the
/// segment, jittered by isotropic Gaussian noise.
///
/// Points sit at uniform arc positions `i/(count+1)` of the total free
/// length (endpoints excluded). A jittered point whose projection parameter
/// falls inside a forbidden interval is re-drawn up to ten times, then
/// dropped with a warning. Returns `(param, point)` pairs plus the drop
/// count.
pub fn interpolate(
    frame: &SegmentFrame,
    budget: &SegmentBudget,
    cfg: &OversampleConfig,
    rng: &mut impl Rng,
) -> (Vec<(f64, Vec<f64>)>, usize) {
    if budget.count == 0 {
        return (Vec::new(), 0);
    }
    // free sub-intervals: complement of the forbidden spans within [0, 1]
    let clamped: Vec<(f64, f64)> = budget
        .nml
        .intervals
        .iter()
        .map(|&(lo, hi)| (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0)))
        .collect();
    let forbidden = geometry::merge_intervals(clamped);
    let mut free: Vec<(f64, f64)> = Vec::with_capacity(forbidden.len() + 1);
    let mut cursor = 0.0;
    for &(lo, hi) in &forbidden {
        if lo > cursor {
            free.push((cursor, lo));
        }
        cursor = cursor.max(hi);
    }
    if cursor < 1.0 {
        free.push((cursor, 1.0));
    }
    let total: f64 = free.iter().map(|&(lo, hi)| hi - lo).sum();
    if total <= 0.0 {
        log::warn!(
            "segment ({}, {}): forbidden span covers the whole segment; dropping {} point(s)",
            budget.m_index,
            budget.v_index,
            budget.count
        );
        return (Vec::new(), budget.count);
    }

    let arc_to_param = |arc: f64| -> f64 {
        let mut remaining = arc;
        for &(lo, hi) in &free {
            let span = hi - lo;
            if remaining <= span {
                return lo + remaining;
            }
            remaining -= span;
        }
        free.last().map(|&(_, hi)| hi).unwrap_or(1.0)
    };

    let noise_sd = cfg.noise_rel * frame.len;
    let mut out = Vec::with_capacity(budget.count);
    let mut dropped = 0;
    for i in 1..=budget.count {
        let param = arc_to_param(i as f64 * total / (budget.count + 1) as f64);
        let base = frame.point_at(param);
        if noise_sd == 0.0 {
            out.push((param, base));
            continue;
        }
        let mut placed = false;
        for _ in 0..10 {
            let candidate: Vec<f64> = base
                .iter()
                .map(|&v| v + noise_sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let t = frame.param_of(&candidate);
            if !budget.nml.contains(t) {
                out.push((t, candidate));
                placed = true;
                break;
            }
        }
        if !placed {
            dropped += 1;
            log::warn!(
                "segment ({}, {}): jitter re-draws exhausted for point {i}; dropped",
                budget.m_index,
                budget.v_index
            );
        }
    }
    (out, dropped)
}

/// Add `H_i` synthetic rows to one class.
///
/// Original rows are untouched; synthetic rows are appended in generation
/// order (by `x_m`, then partner, then slot). With pre-clustering, the
/// budget is first split across k-means sub-clusters inversely to their
/// size, and partners are drawn within each sub-cluster.
pub fn gicaps_oversample(
    ds: &Dataset,
    class_i: usize,
    cfg: &OversampleConfig,
    seed: u64,
) -> Result<OversampleOutcome> {
    cfg.validate()?;
    let h_i = cfg.h_target.get(&class_i).copied().unwrap_or(0);
    if h_i == 0 {
        return Ok(OversampleOutcome {
            dataset: ds.clone(),
            provenance: Vec::new(),
            dropped: 0,
        });
    }
    let class_rows = ds.class_index[class_i].clone();
    if class_rows.len() < 2 {
        return Err(Error::SingletonClass { class: class_i });
    }

    // sub-groups of the class with their budgets
    let groups: Vec<(Vec<usize>, usize)> = match cfg.pre_cluster {
        Some(k) if k >= 2 && class_rows.len() >= 4 => {
            let k = k.min(class_rows.len() / 2);
            let points = ds.class_matrix(class_i);
            let clus = clustering::kmeans(&points, k, seeding::derive(seed, "pre-cluster"), 100)?;
            let mut member_rows: Vec<Vec<usize>> = vec![Vec::new(); k];
            for (local, &global) in class_rows.iter().enumerate() {
                member_rows[clus.assignments[local]].push(global);
            }
            let usable: Vec<Vec<usize>> =
                member_rows.into_iter().filter(|g| g.len() >= 2).collect();
            if usable.is_empty() {
                log::warn!("pre-clustering left no usable sub-cluster; using the whole class");
                vec![(class_rows.clone(), h_i)]
            } else {
                let inv: Vec<f64> = usable.iter().map(|g| 1.0 / g.len() as f64).collect();
                let total: f64 = inv.iter().sum();
                let shares: Vec<f64> = inv.iter().map(|w| h_i as f64 * w / total).collect();
                let counts = largest_remainder(&shares, h_i);
                usable.into_iter().zip(counts).collect()
            }
        }
        Some(_) => {
            log::warn!("pre-cluster k too small for class size; using the whole class");
            vec![(class_rows.clone(), h_i)]
        }
        None => vec![(class_rows.clone(), h_i)],
    };

    let median_nn = median_nn_distance(ds, class_i);

    let mut all_budgets: Vec<SegmentBudget> = Vec::new();
    for (group_rows, group_h) in &groups {
        if *group_h == 0 {
            continue;
        }
        // phase A: segments and their no-man's-lands, parallel over x_m
        let mut budgets: Vec<SegmentBudget> = group_rows
            .par_iter()
            .map(|&m| {
                let hood = neighborhood_with_median(ds, class_i, m, group_rows, median_nn, cfg);
                let mut segs = Vec::with_capacity(hood.v_candidates.len());
                for &v in &hood.v_candidates {
                    let frame = match SegmentFrame::new(ds.row(m), ds.row(v)) {
                        Ok(f) => f,
                        Err(_) => continue, // coincident pair: nothing to span
                    };
                    let nml = segment_interference(ds, &frame, &hood.interferer_pool, cfg);
                    let usable = if nml.free_param_length() > 1e-12 { 1.0 } else { 0.0 };
                    segs.push(SegmentBudget {
                        m_index: m,
                        v_index: v,
                        free_length: nml.free_length * usable,
                        count: 0,
                        nml,
                    });
                }
                segs
            })
            .flatten()
            .collect();

        // phase B: exact count allocation
        allocate_counts(&mut budgets, *group_h).map_err(|e| match e {
            Error::FullyEnclosed { diagnostics, .. } => Error::FullyEnclosed {
                class: class_i,
                diagnostics,
            },
            other => other,
        })?;
        all_budgets.extend(budgets);
    }

    // phase C: interpolation, parallel over x_m with per-origin seed streams
    let mut by_m: BTreeMap<usize, Vec<&SegmentBudget>> = BTreeMap::new();
    for b in &all_budgets {
        by_m.entry(b.m_index).or_default().push(b);
    }
    let class_seed = seeding::derive_indexed(seed, "oversample-class", class_i as u64);
    let generated: Vec<(Vec<SyntheticProvenance>, usize)> = by_m
        .par_iter()
        .map(|(&m, segs)| {
            let mut rng = seeding::rng(seeding::derive_indexed(class_seed, "origin", m as u64));
            let mut records = Vec::new();
            let mut dropped = 0;
            for b in segs {
                let frame = SegmentFrame::new(ds.row(b.m_index), ds.row(b.v_index))
                    .expect("validated above");
                let (points, d) = interpolate(&frame, b, cfg, &mut rng);
                dropped += d;
                for (param, point) in points {
                    records.push(SyntheticProvenance {
                        class_id: class_i,
                        m_index: b.m_index,
                        v_index: b.v_index,
                        param,
                        nml: b.nml.intervals.clone(),
                        point,
                    });
                }
            }
            (records, dropped)
        })
        .collect();

    let mut provenance = Vec::with_capacity(h_i);
    let mut dropped = 0;
    for (records, d) in generated {
        provenance.extend(records);
        dropped += d;
    }
    let points: Vec<Vec<f64>> = provenance.iter().map(|r| r.point.clone()).collect();
    let dataset = ds.append_rows(&points, class_i);
    if dropped > 0 {
        log::warn!("class {class_i}: dropped {dropped} of {h_i} synthetic points");
    }
    Ok(OversampleOutcome {
        dataset,
        provenance,
        dropped,
    })
}
