//! K-medoids (PAM) under the L1 norm, K-means under L2, and elbow-rule
//! selection of the cluster count.

use ndarray::Array2;
use rand::Rng;

use crate::seeding;
use crate::{Error, Result};

/// Result of a clustering run.
#[derive(Debug, Clone)]
pub struct Clustering {
    /// Cluster id per point, each in `0..k`.
    pub assignments: Vec<usize>,
    /// Cluster centers; for medoids these are copies of data rows.
    pub centers: Vec<Vec<f64>>,
    /// Row indices of the medoids (empty for k-means).
    pub center_indices: Vec<usize>,
    /// Total cost: L1 for medoids, squared L2 for means.
    pub cost: f64,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    /// Member rows of cluster `c`, ascending.
    pub fn members(&self, c: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == c)
            .map(|(i, _)| i)
            .collect()
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn row(points: &Array2<f64>, i: usize) -> &[f64] {
    points.row(i).to_slice().expect("row-major matrix")
}

/// Above this size the PAM build/swap runs on a seeded uniform subsample
/// (with full reassignment of every point afterwards); PAM is O(N²).
pub const MEDOID_SUBSAMPLE_CAP: usize = 20_000;

const MATRIX_CACHE_LIMIT: usize = 4_000;

enum Distances<'a> {
    Matrix(Vec<f64>, usize),
    Lazy(&'a Array2<f64>, &'a [usize]),
}

impl Distances<'_> {
    fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Distances::Matrix(m, n) => m[i * n + j],
            Distances::Lazy(points, rows) => l1(row(points, rows[i]), row(points, rows[j])),
        }
    }
}

/// PAM k-medoids: greedy build followed by first-improvement swaps.
///
/// Medoids are actual data points; the total L1 cost never increases across
/// swap iterations. Ties always break toward the lowest row index, so the
/// result is deterministic (the seed only drives the large-N subsample).
pub fn kmedoids(points: &Array2<f64>, k: usize, seed: u64, max_iter: usize) -> Result<Clustering> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::KTooLarge { k, n });
    }

    // candidate rows the build/swap phases operate on
    let cand: Vec<usize> = if n > MEDOID_SUBSAMPLE_CAP {
        let mut rows: Vec<usize> = (0..n).collect();
        let mut rng = seeding::rng(seeding::derive(seed, "kmedoids-subsample"));
        for i in (1..rows.len()).rev() {
            let j = rng.random_range(0..=i);
            rows.swap(i, j);
        }
        rows.truncate(MEDOID_SUBSAMPLE_CAP);
        rows.sort_unstable();
        rows
    } else {
        (0..n).collect()
    };
    let m = cand.len();

    let dist = if m <= MATRIX_CACHE_LIMIT {
        let mut matrix = vec![0.0; m * m];
        for i in 0..m {
            for j in (i + 1)..m {
                let d = l1(row(points, cand[i]), row(points, cand[j]));
                matrix[i * m + j] = d;
                matrix[j * m + i] = d;
            }
        }
        Distances::Matrix(matrix, m)
    } else {
        Distances::Lazy(points, &cand)
    };

    // BUILD: greedy cost-minimizing selection
    let mut medoids: Vec<usize> = Vec::with_capacity(k); // indices into cand
    let mut best = vec![f64::INFINITY; m]; // distance to nearest chosen medoid
    for _ in 0..k {
        let mut best_gain = f64::NEG_INFINITY;
        let mut best_h = usize::MAX;
        for h in 0..m {
            if medoids.contains(&h) {
                continue;
            }
            let gain: f64 = (0..m)
                .map(|j| {
                    let d = dist.get(h, j);
                    if medoids.is_empty() {
                        -d
                    } else {
                        (best[j] - d).max(0.0)
                    }
                })
                .sum();
            if gain > best_gain {
                best_gain = gain;
                best_h = h;
            }
        }
        medoids.push(best_h);
        for j in 0..m {
            best[j] = best[j].min(dist.get(best_h, j));
        }
    }

    // nearest / second-nearest distances per point for O(1) swap deltas
    let mut near = vec![(0usize, f64::INFINITY); m]; // (medoid slot, dist)
    let mut second = vec![f64::INFINITY; m];
    let recompute = |medoids: &[usize], near: &mut [(usize, f64)], second: &mut [f64]| {
        for j in 0..m {
            let mut n1 = (0usize, f64::INFINITY);
            let mut n2 = f64::INFINITY;
            for (slot, &med) in medoids.iter().enumerate() {
                let d = dist.get(med, j);
                if d < n1.1 {
                    n2 = n1.1;
                    n1 = (slot, d);
                } else if d < n2 {
                    n2 = d;
                }
            }
            near[j] = n1;
            second[j] = n2;
        }
    };
    recompute(&medoids, &mut near, &mut second);

    // SWAP: take the first improving (medoid, candidate) pair, repeat
    let mut prev_cost = near.iter().map(|&(_, d)| d).sum::<f64>();
    'sweeps: for _ in 0..max_iter {
        for slot in 0..k {
            for h in 0..m {
                if medoids.contains(&h) {
                    continue;
                }
                let mut delta = 0.0;
                for j in 0..m {
                    let d_jh = dist.get(h, j);
                    let (nslot, d1) = near[j];
                    if nslot == slot {
                        delta += d_jh.min(second[j]) - d1;
                    } else if d_jh < d1 {
                        delta += d_jh - d1;
                    }
                }
                if delta < -1e-12 {
                    medoids[slot] = h;
                    recompute(&medoids, &mut near, &mut second);
                    let cost = near.iter().map(|&(_, d)| d).sum::<f64>();
                    debug_assert!(cost <= prev_cost + 1e-9, "swap increased cost");
                    prev_cost = cost;
                    continue 'sweeps;
                }
            }
        }
        break;
    }

    // full assignment of all n points (ties to the lowest medoid slot)
    let center_indices: Vec<usize> = medoids.iter().map(|&h| cand[h]).collect();
    let centers: Vec<Vec<f64>> = center_indices
        .iter()
        .map(|&r| row(points, r).to_vec())
        .collect();
    let mut assignments = vec![0usize; n];
    let mut cost = 0.0;
    for i in 0..n {
        let mut best_slot = 0;
        let mut best_d = f64::INFINITY;
        for (slot, c) in centers.iter().enumerate() {
            let d = l1(row(points, i), c);
            if d < best_d {
                best_d = d;
                best_slot = slot;
            }
        }
        assignments[i] = best_slot;
        cost += best_d;
    }
    // medoids anchor their own clusters even under distance ties
    for (slot, &r) in center_indices.iter().enumerate() {
        assignments[r] = slot;
    }

    Ok(Clustering {
        assignments,
        centers,
        center_indices,
        cost,
    })
}

/// Lloyd k-means with maximin (farthest-point) seeding.
///
/// The seed picks the first center; each further center is the point
/// farthest from the chosen set. Empty clusters are re-seeded from the point
/// farthest from its current center.
pub fn kmeans(points: &Array2<f64>, k: usize, seed: u64, max_iter: usize) -> Result<Clustering> {
    let n = points.nrows();
    let d = points.ncols();
    if k == 0 || k > n {
        return Err(Error::KTooLarge { k, n });
    }
    let mut rng = seeding::rng(seeding::derive(seed, "kmeans-init"));
    let first = rng.random_range(0..n);
    let mut centers: Vec<Vec<f64>> = vec![row(points, first).to_vec()];
    let mut min_d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(row(points, i), &centers[0]))
        .collect();
    while centers.len() < k {
        let far = (0..n)
            .max_by(|&a, &b| min_d2[a].partial_cmp(&min_d2[b]).unwrap())
            .unwrap();
        centers.push(row(points, far).to_vec());
        for i in 0..n {
            min_d2[i] = min_d2[i].min(sq_dist(row(points, i), centers.last().unwrap()));
        }
    }

    let mut assignments = vec![0usize; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for i in 0..n {
            let mut best = (0usize, f64::INFINITY);
            for (c, center) in centers.iter().enumerate() {
                let dd = sq_dist(row(points, i), center);
                if dd < best.1 {
                    best = (c, dd);
                }
            }
            if assignments[i] != best.0 {
                assignments[i] = best.0;
                changed = true;
            }
        }

        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assignments[i]] += 1;
            for (j, &v) in row(points, i).iter().enumerate() {
                sums[assignments[i]][j] += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(row(points, a), &centers[assignments[a]])
                            .partial_cmp(&sq_dist(row(points, b), &centers[assignments[b]]))
                            .unwrap()
                    })
                    .unwrap();
                centers[c] = row(points, far).to_vec();
                assignments[far] = c;
                changed = true;
            } else {
                for j in 0..d {
                    centers[c][j] = sums[c][j] / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }

    // final pass so every point sits with its nearest center
    let mut cost = 0.0;
    for i in 0..n {
        let mut best = (0usize, f64::INFINITY);
        for (c, center) in centers.iter().enumerate() {
            let dd = sq_dist(row(points, i), center);
            if dd < best.1 {
                best = (c, dd);
            }
        }
        assignments[i] = best.0;
        cost += best.1;
    }

    Ok(Clustering {
        assignments,
        centers,
        center_indices: Vec::new(),
        cost,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Elbow-rule choice of k over an inclusive range, using the k-medoids cost.
///
/// Picks the k maximizing the discrete second difference of cost-vs-k
/// (ties toward smaller k). Ranges too short for a second difference fall
/// back to the smallest k with a warning.
pub fn select_k_elbow(
    points: &Array2<f64>,
    k_min: usize,
    k_max: usize,
    seed: u64,
) -> Result<usize> {
    if k_min == 0 || k_min > k_max {
        return Err(Error::InvalidConfig(format!(
            "invalid k range {k_min}..={k_max}"
        )));
    }
    if k_max > points.nrows() {
        return Err(Error::KTooLarge {
            k: k_max,
            n: points.nrows(),
        });
    }
    if k_max - k_min < 2 {
        log::warn!("elbow range {k_min}..={k_max} too short for curvature; using k = {k_min}");
        return Ok(k_min);
    }
    let costs: Vec<f64> = (k_min..=k_max)
        .map(|k| kmedoids(points, k, seed, 50).map(|c| c.cost))
        .collect::<Result<_>>()?;
    let mut best_k = k_min + 1;
    let mut best_curv = f64::NEG_INFINITY;
    for i in 1..costs.len() - 1 {
        let curv = costs[i - 1] - 2.0 * costs[i] + costs[i + 1];
        if curv > best_curv {
            best_curv = curv;
            best_k = k_min + i;
        }
    }
    Ok(best_k)
}
