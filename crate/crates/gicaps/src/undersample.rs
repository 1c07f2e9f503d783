//! Angular undersampling of a majority class.
//!
//! Each class is split by k-medoids; inside every cluster the points are
//! sorted by angle to the medoid and walked in order. A point survives the
//! walk when its angular gap to the last kept point exceeds the cluster
//! threshold `α_k = δ·σ_k`, or when its error vector `x − c_k` sits in a
//! different orthant than the last kept point's. Per-cluster quotas
//! (proportional to angular spread) are enforced by bisecting a multiplier
//! on `α_k` and refilling the closest rejected points, so the total retained
//! count is exact.
//!
//! Every decision is written to an audit trail; the walk invariant
//! (gap > effective α, or different orthant, for consecutive walk-kept
//! points) is checkable from the audit alone.

use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::clustering::{self, Clustering};
use crate::dataset::Dataset;
use crate::geometry::{self, OrthantCode};
use crate::{Error, Result};

/// Cluster-count choice for the undersampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KClusters {
    Fixed(usize),
    /// Elbow-rule selection over `2..=min(10, n, n_target)`.
    Auto,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UndersampleConfig {
    /// Total number of points to retain for the class (N_D).
    pub n_target: usize,
    pub k_clusters: KClusters,
    /// Multiplier on the per-cluster angular std-dev.
    pub delta: f64,
    /// Raw-angle threshold below which two points count as scaled/repeated.
    pub dedupe_angle_eps: f64,
}

impl UndersampleConfig {
    pub fn new(n_target: usize) -> Self {
        Self {
            n_target,
            k_clusters: KClusters::Auto,
            delta: 1.0,
            dedupe_angle_eps: 1e-9,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k_clusters = KClusters::Fixed(k);
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    fn validate(&self, n_points: usize) -> Result<usize> {
        if self.n_target == 0 {
            return Err(Error::InvalidConfig("n_target must be positive".into()));
        }
        if self.delta <= 0.0 {
            return Err(Error::InvalidConfig("delta must be positive".into()));
        }
        let k = match self.k_clusters {
            KClusters::Fixed(k) => {
                if k == 0 {
                    return Err(Error::InvalidConfig("k_clusters must be positive".into()));
                }
                if self.n_target < k {
                    return Err(Error::InvalidConfig(format!(
                        "n_target {} below cluster count {k}",
                        self.n_target
                    )));
                }
                k.min(n_points)
            }
            KClusters::Auto => 0, // resolved later
        };
        Ok(k)
    }
}

pub const ALPHA_FLOOR: f64 = 1e-6;

/// Angular summary of one cluster.
#[derive(Debug, Clone)]
pub struct ClusterAngularProfile {
    pub cluster_id: usize,
    pub medoid: Vec<f64>,
    /// Angle to the medoid per member, in member order.
    pub thetas: Vec<f64>,
    /// Population std-dev of the thetas.
    pub sigma: f64,
    /// δ·σ, floored at [`ALPHA_FLOOR`].
    pub alpha: f64,
    /// Retained-point allocation for this cluster.
    pub quota: usize,
}

/// Angle to the medoid on +1-shifted vectors.
///
/// Min-max normalized data lives in `[0,1]^D`, so a row can be the zero
/// vector and have no direction; shifting every coordinate by +1 (only for
/// angle computations in this module) makes all vectors nonzero.
fn shifted_theta(medoid: &[f64], x: &[f64]) -> f64 {
    let ms: Vec<f64> = medoid.iter().map(|v| v + 1.0).collect();
    let xs: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
    geometry::angle(&ms, &xs).expect("shifted vectors are nonzero")
}

/// Scaled/repeated test on raw (unshifted) vectors, so exact scalar copies
/// dedupe. A zero vector has no direction: two zeros are duplicates, a zero
/// against a nonzero is not.
fn is_scaled_copy(u: &[f64], v: &[f64], eps: f64) -> bool {
    match (geometry::norm(u) == 0.0, geometry::norm(v) == 0.0) {
        (true, true) => true,
        (true, false) | (false, true) => false,
        (false, false) => geometry::angle(u, v).expect("nonzero") < eps,
    }
}

fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Quotas proportional to angular spread: one guaranteed slot per cluster,
/// the rest split by largest remainder (ties toward the lower cluster id).
pub(crate) fn quotas_for_spreads(spreads: &[f64], n_target: usize) -> Vec<usize> {
    let k = spreads.len();
    assert!(n_target >= k, "n_target below cluster count");
    let extra = n_target - k;
    let total: f64 = spreads.iter().sum();
    let shares: Vec<f64> = if total > 0.0 {
        spreads.iter().map(|s| extra as f64 * s / total).collect()
    } else {
        vec![extra as f64 / k as f64; k]
    };
    largest_remainder(&shares, extra)
        .into_iter()
        .map(|q| q + 1)
        .collect()
}

/// Round non-negative shares to integers summing exactly to `total`.
pub(crate) fn largest_remainder(shares: &[f64], total: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in 0..total.saturating_sub(assigned) {
        counts[order[i % order.len()]] += 1;
    }
    counts
}

/// Build per-cluster angular profiles for an existing medoid clustering.
pub fn angular_profile(
    points: &Array2<f64>,
    clus: &Clustering,
    cfg: &UndersampleConfig,
) -> Result<Vec<ClusterAngularProfile>> {
    let members: Vec<Vec<usize>> = (0..clus.k()).map(|c| clus.members(c)).collect();
    Ok(profile_clusters(points, &members, &clus.centers, cfg))
}

fn profile_clusters(
    points: &Array2<f64>,
    members: &[Vec<usize>],
    medoids: &[Vec<f64>],
    cfg: &UndersampleConfig,
) -> Vec<ClusterAngularProfile> {
    let mut profiles: Vec<ClusterAngularProfile> = members
        .iter()
        .enumerate()
        .map(|(c, rows)| {
            let medoid = &medoids[c];
            let thetas: Vec<f64> = rows
                .iter()
                .map(|&r| shifted_theta(medoid, row(points, r)))
                .collect();
            let sigma = population_std(&thetas);
            ClusterAngularProfile {
                cluster_id: c,
                medoid: medoid.clone(),
                thetas,
                sigma,
                alpha: (cfg.delta * sigma).max(ALPHA_FLOOR),
                quota: 0, // rewritten below
            }
        })
        .collect();

    let spreads: Vec<f64> = profiles
        .iter()
        .map(|p| {
            if p.thetas.is_empty() {
                return 0.0;
            }
            let max = p.thetas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = p.thetas.iter().copied().fold(f64::INFINITY, f64::min);
            max - min
        })
        .collect();
    let quotas = quotas_for_spreads(&spreads, cfg.n_target.max(profiles.len()));
    for (p, q) in profiles.iter_mut().zip(quotas) {
        p.quota = q;
    }
    profiles
}

fn row(points: &Array2<f64>, i: usize) -> &[f64] {
    points.row(i).to_slice().expect("row-major matrix")
}

/// What happened to one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    /// Survived the angular walk.
    Kept,
    /// Rejected by the walk, restored to meet the quota.
    Refilled,
    Rejected,
    Deduped,
}

/// One audit line per point of the class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditRecord {
    /// Row index within the class point matrix.
    pub row: usize,
    pub cluster: usize,
    pub theta: f64,
    /// Hex orthant code of `x − medoid`.
    pub orthant: String,
    pub decision: Decision,
    /// θ-gap to the previous walk-kept point (absent for the medoid and for
    /// deduped points).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    /// Effective α (after the quota bisection) in force for this cluster.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_eff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prev_kept: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prev_orthant: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Full audit trail of one undersampling run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct UndersampleAudit {
    pub records: Vec<AuditRecord>,
}

impl UndersampleAudit {
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for r in &self.records {
            serde_json::to_writer(&mut f, r).map_err(std::io::Error::other)?;
            writeln!(f)?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut records = Vec::new();
        for line in f.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(std::io::Error::other)?);
        }
        Ok(Self { records })
    }
}

struct WalkOutcome {
    /// (member position, gap to previous kept, previous kept position)
    kept: Vec<(usize, Option<f64>, Option<usize>)>,
    /// (member position, gap, previous kept position)
    rejected: Vec<(usize, f64, usize)>,
}

/// Walk the θ-sorted survivors keeping a point iff its gap from the last
/// kept point exceeds `alpha` or its orthant differs from the last kept's.
/// The medoid (position 0) is always kept.
fn walk(thetas: &[f64], orthants: &[OrthantCode], alpha: f64) -> WalkOutcome {
    let mut kept = vec![(0usize, None, None)];
    let mut rejected = Vec::new();
    let mut last = 0usize;
    for i in 1..thetas.len() {
        let gap = thetas[i] - thetas[last];
        if gap > alpha || orthants[i] != orthants[last] {
            kept.push((i, Some(gap), Some(last)));
            last = i;
        } else {
            rejected.push((i, gap, last));
        }
    }
    WalkOutcome { kept, rejected }
}

/// Retain `cfg.n_target` informative rows of one class.
///
/// Returns the retained row indices (ascending, indices into `class_points`)
/// and the audit trail. Exactly `min(n_target, points surviving dedupe)`
/// rows are retained, each cluster keeps at least its medoid, and no row is
/// duplicated or synthesized.
pub fn gicaps_undersample(
    class_points: &Array2<f64>,
    cfg: &UndersampleConfig,
    seed: u64,
) -> Result<(Vec<usize>, UndersampleAudit)> {
    let n = class_points.nrows();
    if n == 0 {
        return Err(Error::EmptyClass { class: 0 });
    }
    let fixed_k = cfg.validate(n)?;
    let k = match cfg.k_clusters {
        KClusters::Fixed(_) => fixed_k,
        KClusters::Auto => {
            let hi = 10usize.min(n).min(cfg.n_target).max(1);
            if hi < 2 {
                1
            } else {
                clustering::select_k_elbow(class_points, 1, hi, seed)?
            }
        }
    };

    let clus = clustering::kmedoids(class_points, k, seed, 50)?;
    let mut audit = UndersampleAudit::default();

    // per-cluster dedupe: medoid first, then ascending row index; a point is
    // a duplicate if it is a scaled/repeated copy of an earlier-kept one
    let mut survivors: Vec<Vec<usize>> = Vec::with_capacity(k);
    for c in 0..k {
        let medoid_row = clus.center_indices[c];
        let mut order = vec![medoid_row];
        order.extend(clus.members(c).into_iter().filter(|&r| r != medoid_row));
        let mut kept: Vec<usize> = Vec::with_capacity(order.len());
        for &r in &order {
            let dup_of = kept
                .iter()
                .find(|&&p| {
                    is_scaled_copy(
                        row(class_points, p),
                        row(class_points, r),
                        cfg.dedupe_angle_eps,
                    )
                })
                .copied();
            match dup_of {
                Some(p) => audit.records.push(AuditRecord {
                    row: r,
                    cluster: c,
                    theta: shifted_theta(&clus.centers[c], row(class_points, r)),
                    orthant: geometry::orthant_code(&clus.centers[c], row(class_points, r))
                        .to_hex(),
                    decision: Decision::Deduped,
                    gap: None,
                    alpha_eff: None,
                    prev_kept: Some(p),
                    prev_orthant: None,
                    reason: Some("scaled_or_repeated".into()),
                }),
                None => kept.push(r),
            }
        }
        survivors.push(kept);
    }

    let available: usize = survivors.iter().map(Vec::len).sum();
    let target = cfg.n_target.min(available);
    let profiles = profile_clusters(class_points, &survivors, &clus.centers, cfg);

    let mut retained: Vec<usize> = Vec::with_capacity(target);
    // rejected candidates for the global refill: (gap, cluster, row)
    let mut leftover: Vec<(f64, usize, usize)> = Vec::new();

    for (c, rows) in survivors.iter().enumerate() {
        let profile = &profiles[c];
        let quota = profile.quota.min(rows.len());
        let medoid = &clus.centers[c];

        // sort by θ with the medoid first (row order breaks θ ties)
        let thetas_raw: Vec<f64> = rows
            .iter()
            .map(|&r| shifted_theta(medoid, row(class_points, r)))
            .collect();
        let mut order: Vec<usize> = (1..rows.len()).collect();
        order.sort_by(|&a, &b| {
            thetas_raw[a]
                .partial_cmp(&thetas_raw[b])
                .unwrap()
                .then(rows[a].cmp(&rows[b]))
        });
        let positions: Vec<usize> = std::iter::once(0).chain(order).collect();
        let sorted_rows: Vec<usize> = positions.iter().map(|&p| rows[p]).collect();
        let thetas: Vec<f64> = positions.iter().map(|&p| thetas_raw[p]).collect();
        let orthants: Vec<OrthantCode> = sorted_rows
            .iter()
            .map(|&r| geometry::orthant_code(medoid, row(class_points, r)))
            .collect();

        // bisection on the α multiplier until the walk fits the quota
        let mut mult = 1.0f64;
        let mut outcome = walk(&thetas, &orthants, profile.alpha);
        if outcome.kept.len() > quota {
            let mut lo = 1.0f64;
            let mut hi = 2.0f64;
            let mut hi_outcome = walk(&thetas, &orthants, profile.alpha * hi);
            let mut doubles = 0;
            while hi_outcome.kept.len() > quota && doubles < 60 {
                lo = hi;
                hi *= 2.0;
                hi_outcome = walk(&thetas, &orthants, profile.alpha * hi);
                doubles += 1;
            }
            if hi_outcome.kept.len() > quota {
                // orthant changes alone keep more than the quota: trim the
                // walk's tail (a prefix preserves the pairwise invariant)
                let mut trimmed = hi_outcome;
                for &(pos, gap, prev) in &trimmed.kept[quota..] {
                    trimmed
                        .rejected
                        .push((pos, gap.unwrap_or(0.0), prev.unwrap_or(0)));
                }
                trimmed.kept.truncate(quota);
                outcome = trimmed;
                mult = hi;
            } else {
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let mid_outcome = walk(&thetas, &orthants, profile.alpha * mid);
                    if mid_outcome.kept.len() > quota {
                        lo = mid;
                    } else {
                        hi = mid;
                        hi_outcome = mid_outcome;
                    }
                }
                outcome = hi_outcome;
                mult = hi;
            }
        }
        let alpha_eff = profile.alpha * mult;

        // refill the closest rejected (largest gap first) up to the quota
        let deficit = quota.saturating_sub(outcome.kept.len());
        let mut refill_order: Vec<usize> = (0..outcome.rejected.len()).collect();
        refill_order.sort_by(|&a, &b| {
            let (ra, ga, _) = outcome.rejected[a];
            let (rb, gb, _) = outcome.rejected[b];
            gb.partial_cmp(&ga)
                .unwrap()
                .then(sorted_rows[ra].cmp(&sorted_rows[rb]))
        });
        let refilled: Vec<usize> = refill_order.iter().take(deficit).copied().collect();

        for &(pos, gap, prev) in &outcome.kept {
            retained.push(sorted_rows[pos]);
            audit.records.push(AuditRecord {
                row: sorted_rows[pos],
                cluster: c,
                theta: thetas[pos],
                orthant: orthants[pos].to_hex(),
                decision: Decision::Kept,
                gap,
                alpha_eff: Some(alpha_eff),
                prev_kept: prev.map(|p| sorted_rows[p]),
                prev_orthant: prev.map(|p| orthants[p].to_hex()),
                reason: None,
            });
        }
        for (slot, &(pos, gap, prev)) in outcome.rejected.iter().enumerate() {
            if refilled.contains(&slot) {
                retained.push(sorted_rows[pos]);
                audit.records.push(AuditRecord {
                    row: sorted_rows[pos],
                    cluster: c,
                    theta: thetas[pos],
                    orthant: orthants[pos].to_hex(),
                    decision: Decision::Refilled,
                    gap: Some(gap),
                    alpha_eff: Some(alpha_eff),
                    prev_kept: Some(sorted_rows[prev]),
                    prev_orthant: Some(orthants[prev].to_hex()),
                    reason: Some("quota_refill".into()),
                });
            } else {
                leftover.push((gap, c, sorted_rows[pos]));
                audit.records.push(AuditRecord {
                    row: sorted_rows[pos],
                    cluster: c,
                    theta: thetas[pos],
                    orthant: orthants[pos].to_hex(),
                    decision: Decision::Rejected,
                    gap: Some(gap),
                    alpha_eff: Some(alpha_eff),
                    prev_kept: Some(sorted_rows[prev]),
                    prev_orthant: Some(orthants[prev].to_hex()),
                    reason: Some("gap_within_alpha_same_orthant".into()),
                });
            }
        }
    }

    // clusters smaller than their quota leave a global deficit: refill from
    // the remaining rejected points across clusters
    let deficit = target.saturating_sub(retained.len());
    if deficit > 0 {
        leftover.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        for &(_, cluster, r) in leftover.iter().take(deficit) {
            retained.push(r);
            if let Some(rec) = audit
                .records
                .iter_mut()
                .find(|rec| rec.row == r && rec.cluster == cluster)
            {
                rec.decision = Decision::Refilled;
                rec.reason = Some("global_refill".into());
            }
        }
    }

    retained.sort_unstable();
    debug_assert_eq!(retained.len(), target);
    Ok((retained, audit))
}

/// Pick N_D by cross-validated score (higher is better); ties go to the
/// smaller candidate.
///
/// Candidates must be strictly below the majority size and at least the
/// next-largest class size, mirroring the "intermediate value" guidance.
pub fn select_n_target_cv<F>(
    ds: &Dataset,
    majority_class: usize,
    candidates: &[usize],
    mut eval_fn: F,
) -> Result<usize>
where
    F: FnMut(usize) -> Result<f64>,
{
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("no N_D candidates".into()));
    }
    let majority_size = ds.class_size(majority_class);
    let next_largest = ds
        .class_counts()
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != majority_class)
        .map(|(_, &s)| s)
        .max()
        .unwrap_or(0);
    for &cand in candidates {
        if cand >= majority_size || cand < next_largest {
            return Err(Error::InvalidConfig(format!(
                "candidate N_D {cand} outside ({next_largest}..{majority_size})"
            )));
        }
    }
    let mut sorted: Vec<usize> = candidates.to_vec();
    sorted.sort_unstable();
    let mut best = (sorted[0], f64::NEG_INFINITY);
    for &cand in &sorted {
        let score = eval_fn(cand)?;
        if score > best.1 {
            best = (cand, score);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn quota_allocation_proportional_to_spread() {
        assert_eq!(quotas_for_spreads(&[0.2, 0.4], 30), vec![10, 20]);
        assert_eq!(quotas_for_spreads(&[0.0], 5), vec![5]);
        // zero spreads split evenly, largest-remainder ties to the lower id
        assert_eq!(quotas_for_spreads(&[0.0, 0.0], 7), vec![4, 3]);
        // every cluster gets at least one slot
        assert_eq!(quotas_for_spreads(&[0.0, 1.0], 2), vec![1, 1]);
    }

    #[test]
    fn largest_remainder_is_exact() {
        assert_eq!(largest_remainder(&[7.5, 2.5], 10), vec![8, 2]);
        assert_eq!(largest_remainder(&[1.2, 1.2, 1.6], 4), vec![1, 1, 2]);
    }

    #[test]
    fn profile_single_point_cluster() {
        let points = array![[0.5, 0.5]];
        let clus = clustering::kmedoids(&points, 1, 0, 10).unwrap();
        let cfg = UndersampleConfig::new(1).with_k(1);
        let profiles = angular_profile(&points, &clus, &cfg).unwrap();
        assert_eq!(profiles.len(), 1);
        assert_eq!(profiles[0].thetas, vec![0.0]);
        assert_eq!(profiles[0].quota, 1);
        assert_eq!(profiles[0].alpha, ALPHA_FLOOR);
    }

    #[test]
    fn profile_scaled_points_have_floored_alpha() {
        // rows share one direction after the +1 shift flattens differences
        let points = array![[0.1, 0.2], [0.2, 0.4], [0.3, 0.6]];
        let clus = clustering::kmedoids(&points, 1, 0, 10).unwrap();
        let cfg = UndersampleConfig::new(2).with_k(1);
        let profiles = angular_profile(&points, &clus, &cfg).unwrap();
        assert!(profiles[0].sigma < 0.05);
        assert!(profiles[0].alpha >= ALPHA_FLOOR);
    }

    #[test]
    fn scaled_copies_collapse_to_medoid() {
        let points = array![
            [0.1, 0.2],
            [0.2, 0.4],
            [0.4, 0.8],
            [0.05, 0.1],
            [0.3, 0.6]
        ];
        let cfg = UndersampleConfig::new(5).with_k(1);
        let (retained, audit) = gicaps_undersample(&points, &cfg, 0).unwrap();
        assert_eq!(retained.len(), 1);
        let deduped = audit
            .records
            .iter()
            .filter(|r| r.decision == Decision::Deduped)
            .count();
        assert_eq!(deduped, 4);
    }

    #[test]
    fn distinct_orthants_all_retained_up_to_quota() {
        // points in pairwise-distinct orthants of the medoid (none scalar
        // copies), so orthant changes keep them regardless of tiny gaps
        let points = array![
            [0.5, 0.5],
            [0.45, 0.62],
            [0.58, 0.41],
            [0.42, 0.40]
        ];
        let cfg = UndersampleConfig::new(4).with_k(1);
        let (retained, _) = gicaps_undersample(&points, &cfg, 0).unwrap();
        assert_eq!(retained, vec![0, 1, 2, 3]);
    }

    #[test]
    fn exact_count_and_walk_invariant() {
        // two noisy arcs around distinct centers
        let n = 240;
        let mut data = Vec::with_capacity(n * 2);
        for i in 0..n {
            let (cx, cy) = if i % 2 == 0 { (0.3, 0.3) } else { (0.8, 0.7) };
            let t = (i / 2) as f64 * 0.026;
            let r = 0.08 + 0.015 * ((i * 7 % 13) as f64 / 13.0);
            data.push(cx + r * t.cos());
            data.push(cy + r * t.sin());
        }
        let points = Array2::from_shape_vec((n, 2), data).unwrap();
        let cfg = UndersampleConfig::new(60).with_k(4).with_delta(0.5);
        let (retained, audit) = gicaps_undersample(&points, &cfg, 7).unwrap();
        assert_eq!(retained.len(), 60);

        // every cluster keeps at least one point (its medoid)
        let mut clusters_kept = std::collections::BTreeSet::new();
        for rec in &audit.records {
            if matches!(rec.decision, Decision::Kept | Decision::Refilled) {
                clusters_kept.insert(rec.cluster);
            }
        }
        assert_eq!(clusters_kept.len(), 4);

        // consecutive walk-kept pairs: gap > alpha_eff or orthant change
        for rec in &audit.records {
            if rec.decision == Decision::Kept {
                if let (Some(gap), Some(alpha), Some(prev)) =
                    (rec.gap, rec.alpha_eff, rec.prev_orthant.as_ref())
                {
                    assert!(
                        gap > alpha || &rec.orthant != prev,
                        "walk invariant violated at row {}",
                        rec.row
                    );
                }
            }
        }
    }

    #[test]
    fn retained_are_original_rows_no_duplicates() {
        let points =
            Array2::from_shape_fn((50, 3), |(i, j)| 0.01 * ((i * 17 + j * 5) % 97) as f64);
        let cfg = UndersampleConfig::new(20).with_k(3);
        let (retained, _) = gicaps_undersample(&points, &cfg, 1).unwrap();
        assert_eq!(retained.len(), 20);
        let mut sorted = retained.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 20);
        assert!(retained.iter().all(|&r| r < 50));
    }

    #[test]
    fn deterministic_per_seed() {
        let points =
            Array2::from_shape_fn((80, 3), |(i, j)| 0.01 * ((i * 13 + j * 7) % 89) as f64);
        let cfg = UndersampleConfig::new(30).with_k(3);
        let (a, _) = gicaps_undersample(&points, &cfg, 5).unwrap();
        let (b, _) = gicaps_undersample(&points, &cfg, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_class_errors() {
        let points = Array2::<f64>::zeros((0, 2));
        let cfg = UndersampleConfig::new(1).with_k(1);
        assert!(gicaps_undersample(&points, &cfg, 0).is_err());
    }

    #[test]
    fn audit_round_trips_through_jsonl() {
        let points = array![[0.5, 0.5], [0.6, 0.6], [0.4, 0.6], [0.1, 0.9]];
        let cfg = UndersampleConfig::new(3).with_k(1);
        let (_, audit) = gicaps_undersample(&points, &cfg, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.jsonl");
        audit.write_jsonl(&path).unwrap();
        let back = UndersampleAudit::read_jsonl(&path).unwrap();
        assert_eq!(back.records.len(), audit.records.len());
        assert_eq!(back.records[0].row, audit.records[0].row);
    }

    #[test]
    fn n_target_selection_prefers_higher_score_then_smaller() {
        let ds = Dataset::new(
            Array2::from_shape_fn((30, 2), |(i, j)| (i + j) as f64),
            (0..30).map(|i| usize::from(i >= 20)).collect(),
        )
        .unwrap();
        // majority = class 0 (20 rows), next largest = 10
        let picked =
            select_n_target_cv(&ds, 0, &[12, 15], |n| Ok(if n == 15 { 0.9 } else { 0.5 }))
                .unwrap();
        assert_eq!(picked, 15);
        let tied = select_n_target_cv(&ds, 0, &[12, 15], |_| Ok(0.7)).unwrap();
        assert_eq!(tied, 12);
        let single = select_n_target_cv(&ds, 0, &[11], |_| Ok(0.0)).unwrap();
        assert_eq!(single, 11);
        assert!(select_n_target_cv(&ds, 0, &[25], |_| Ok(0.0)).is_err());
    }
}
