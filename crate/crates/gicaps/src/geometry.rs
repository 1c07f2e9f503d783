//! Vector geometry shared by both samplers.
//!
//! Everything here works on plain `&[f64]` slices in D dimensions:
//! angles between position vectors, orthant (sign-pattern) codes of
//! difference vectors, projections onto a segment, estimated crossing
//! points of interferer pairs, and the construction of "no man's land"
//! intervals along a candidate interpolation segment.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

pub fn sub(u: &[f64], v: &[f64]) -> Vec<f64> {
    u.iter().zip(v).map(|(a, b)| a - b).collect()
}

/// Euclidean distance between two points.
pub fn distance(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Angle between two vectors in radians, in `[0, π]`.
///
/// Evaluated as `2·atan2(‖û − v̂‖, ‖û + v̂‖)` on the normalized vectors
/// (Kahan's formulation) instead of `acos` of the clamped dot product:
/// `acos` amplifies rounding to ~1e-8 radians near 0 and π, which would
/// break both scale invariance at 1e-12 and the angular dedupe of
/// near-identical points. Scale-invariant, symmetric; errors on a
/// zero-length input.
pub fn angle(u: &[f64], v: &[f64]) -> Result<f64> {
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut diff2 = 0.0;
    let mut sum2 = 0.0;
    for (a, b) in u.iter().zip(v) {
        let (ua, vb) = (a / nu, b / nv);
        diff2 += (ua - vb) * (ua - vb);
        sum2 += (ua + vb) * (ua + vb);
    }
    Ok(2.0 * diff2.sqrt().atan2(sum2.sqrt()))
}

/// Sign-pattern code of the difference `x - ref` packed into 64-bit words.
///
/// Bit `b` is 1 iff component `b` of the difference is `>= 0` (zero counts
/// as positive). Feature 0 is the most significant bit of the decimal value
/// reported by [`OrthantCode::to_u128`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrthantCode {
    words: Vec<u64>,
    dim: usize,
}

impl OrthantCode {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Decimal value of the code, available for `dim <= 128`.
    pub fn to_u128(&self) -> Option<u128> {
        if self.dim > 128 {
            return None;
        }
        let mut value: u128 = 0;
        for b in 0..self.dim {
            value <<= 1;
            if self.words[b / 64] >> (b % 64) & 1 == 1 {
                value |= 1;
            }
        }
        Some(value)
    }

    /// Hex rendering (feature 0 first), usable at any dimension.
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(2 + self.dim.div_ceil(4));
        s.push_str("0x");
        let mut nibble = 0u8;
        let mut filled = 0;
        for b in 0..self.dim {
            nibble <<= 1;
            if self.words[b / 64] >> (b % 64) & 1 == 1 {
                nibble |= 1;
            }
            filled += 1;
            if filled == 4 {
                s.push(char::from_digit(u32::from(nibble), 16).unwrap());
                nibble = 0;
                filled = 0;
            }
        }
        if filled > 0 {
            s.push(char::from_digit(u32::from(nibble), 16).unwrap());
        }
        s
    }
}

/// Orthant code of `x` relative to `reference`.
pub fn orthant_code(reference: &[f64], x: &[f64]) -> OrthantCode {
    debug_assert_eq!(reference.len(), x.len());
    let dim = x.len();
    let mut words = vec![0u64; dim.div_ceil(64).max(1)];
    for (b, (xi, ri)) in x.iter().zip(reference).enumerate() {
        if xi - ri >= 0.0 {
            words[b / 64] |= 1 << (b % 64);
        }
    }
    OrthantCode { words, dim }
}

/// Oriented segment from `a` to `b` with its direction and length cached.
#[derive(Debug, Clone)]
pub struct SegmentFrame {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub ab: Vec<f64>,
    pub len: f64,
}

impl SegmentFrame {
    pub fn new(a: &[f64], b: &[f64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        let ab = sub(b, a);
        let len = norm(&ab);
        if len == 0.0 {
            return Err(Error::DegenerateSegment);
        }
        Ok(Self {
            a: a.to_vec(),
            b: b.to_vec(),
            ab,
            len,
        })
    }

    /// Point at parameter `t` (fraction of the segment length from `a`).
    pub fn point_at(&self, t: f64) -> Vec<f64> {
        self.a
            .iter()
            .zip(&self.ab)
            .map(|(ai, di)| ai + t * di)
            .collect()
    }

    /// Parameter of the projection of `p` onto the segment's line.
    pub fn param_of(&self, p: &[f64]) -> f64 {
        dot(&sub(p, &self.a), &self.ab) / (self.len * self.len)
    }
}

/// Project `t` onto the segment line.
///
/// Returns the projection as a D-vector in `a`-origin coordinates together
/// with the perpendicular distance of `t` from the line.
pub fn project_on_segment(frame: &SegmentFrame, t: &[f64]) -> (Vec<f64>, f64) {
    let at = sub(t, &frame.a);
    let scale = dot(&at, &frame.ab) / dot(&frame.ab, &frame.ab);
    let p: Vec<f64> = frame.ab.iter().map(|d| d * scale).collect();
    let perp = norm(&sub(&at, &p));
    (p, perp)
}

/// Estimated crossing of the interferer pair `(t1, t2)` with a segment.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CrossingResult {
    /// Position of the crossing point along `ab` as a fraction of the length.
    pub o_param: f64,
    /// Shortest distance from the crossing point to the line through `t1, t2`.
    pub c_dist: f64,
    /// Whether the crossing point lies strictly inside the segment.
    pub valid: bool,
}

/// Locate where the line joining `t1` and `t2` meets the segment line.
///
/// The crossing point `O` is the similar-triangles estimate: projections of
/// `t1` and `t2` onto the line, blended by their perpendicular distances
/// `d1, d2`. For a pair straddling the line this is the exact intersection
/// and `c_dist` is zero; for a pair on the same side it lands between the
/// projections and `c_dist` measures how far the pair's line stays from `O`.
///
/// Validity requires both `‖aO‖ < ‖ab‖` and `‖ab − aO‖ < ‖ab‖`, strictly;
/// boundary hits are discarded. If both interferers sit exactly on the
/// segment line (`d1 + d2 = 0`), the pair is treated as interference with
/// `c_dist = 0` at the midpoint of the two projections.
pub fn crossing(frame: &SegmentFrame, t1: &[f64], t2: &[f64]) -> CrossingResult {
    let (p1, d1) = project_on_segment(frame, t1);
    let (p2, d2) = project_on_segment(frame, t2);

    let ao: Vec<f64> = if d1 + d2 == 0.0 {
        p1.iter().zip(&p2).map(|(x, y)| 0.5 * (x + y)).collect()
    } else {
        let w = d1 / (d1 + d2);
        p1.iter().zip(&p2).map(|(x, y)| x + (y - x) * w).collect()
    };

    let o_param = dot(&ao, &frame.ab) / (frame.len * frame.len);
    let ao_norm = norm(&ao);
    let ab_minus_ao = norm(&sub(&frame.ab, &ao));
    let valid = ao_norm < frame.len && ab_minus_ao < frame.len;

    let c_dist = if d1 + d2 == 0.0 {
        0.0
    } else {
        // ‖Ot1‖·sin(θ₀) evaluated as the rejection of Ot1 from the t1t2
        // direction; sin(acos(·)) loses ~8 digits near collinearity.
        let o: Vec<f64> = frame.a.iter().zip(&ao).map(|(ai, pi)| ai + pi).collect();
        let ot1 = sub(t1, &o);
        let t12 = sub(t2, t1);
        let n_t12 = norm(&t12);
        if n_t12 == 0.0 {
            norm(&ot1)
        } else {
            let along = dot(&ot1, &t12) / (n_t12 * n_t12);
            let rej: Vec<f64> = ot1
                .iter()
                .zip(&t12)
                .map(|(oi, di)| oi - along * di)
                .collect();
            norm(&rej)
        }
    };

    CrossingResult {
        o_param,
        c_dist,
        valid,
    }
}

/// Forbidden parametric intervals along a segment, plus the free length used
/// for quota allocation.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NoMansLand {
    /// Disjoint, sorted `(lo, hi)` fractions of the segment length.
    pub intervals: Vec<(f64, f64)>,
    /// `ρ·(len − core length)` where the core spans the recorded crossings
    /// before the ρ-widening is applied.
    pub free_length: f64,
}

impl NoMansLand {
    pub fn contains(&self, t: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| t >= lo && t <= hi)
    }

    /// Total parametric length outside the intervals, within `[0, 1]`.
    pub fn free_param_length(&self) -> f64 {
        1.0 - self
            .intervals
            .iter()
            .map(|&(lo, hi)| hi.min(1.0) - lo.max(0.0))
            .sum::<f64>()
    }
}

/// Build the no-man's-land for a segment from interferer pairs.
///
/// Valid crossings with `c_dist < tau_cross` define a core interval
/// `[min o, max o]`. The recorded interval widens the core by
/// `(1 − ρ)/2` of the segment on each side (clamped to `[0, 1]`), while the
/// free length keeps the unwidened core: `ρ·(len − (o_max − o_min)·len)`.
/// With no qualifying crossing the segment is fully free: `ρ·len`.
pub fn build_no_mans_land(
    frame: &SegmentFrame,
    interferers: &[(Vec<f64>, Vec<f64>)],
    tau_cross: f64,
    rho: f64,
) -> NoMansLand {
    debug_assert!(rho > 0.0 && rho <= 1.0);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut any = false;
    for (t1, t2) in interferers {
        let c = crossing(frame, t1, t2);
        if c.valid && c.c_dist < tau_cross {
            lo = lo.min(c.o_param);
            hi = hi.max(c.o_param);
            any = true;
        }
    }
    if !any {
        return NoMansLand {
            intervals: Vec::new(),
            free_length: rho * frame.len,
        };
    }
    let pad = (1.0 - rho) / 2.0;
    NoMansLand {
        intervals: vec![((lo - pad).max(0.0), (hi + pad).min(1.0))],
        free_length: rho * (frame.len - (hi - lo) * frame.len),
    }
}

/// Merge overlapping intervals into a sorted disjoint list.
pub fn merge_intervals(mut intervals: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    intervals.retain(|&(lo, hi)| hi > lo);
    intervals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
    for (lo, hi) in intervals {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    merged
}
