//! Minimum-cost assignment and gated nearest-neighbour association.

use super::{DetectionWithCovariance, Track, TrackerConfig};

/// Cost used for forbidden pairs. Large enough to dominate any sum of
/// admissible costs, small enough to stay exact in `f64` arithmetic.
pub const FORBIDDEN_COST: f64 = 1e9;

/// Hungarian method (shortest augmenting paths with potentials).
///
/// `cost` is row-major `rows x cols`. Returns `min(rows, cols)` pairs
/// `(row, col)` sorted by row.
pub fn hungarian_assign(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    if cols == 0 {
        return Vec::new();
    }
    debug_assert!(cost.iter().all(|r| r.len() == cols), "ragged cost matrix");
    if rows > cols {
        let transposed: Vec<Vec<f64>> = (0..cols)
            .map(|c| (0..rows).map(|r| cost[r][c]).collect())
            .collect();
        let mut pairs: Vec<(usize, usize)> = hungarian_assign(&transposed)
            .into_iter()
            .map(|(c, r)| (r, c))
            .collect();
        pairs.sort_unstable();
        return pairs;
    }

    // 1-based indexing; column 0 is the virtual source
    let n = rows;
    let m = cols;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| owner[j] != 0)
        .map(|j| (owner[j] - 1, j - 1))
        .collect();
    pairs.sort_unstable();
    pairs
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Association {
    /// `(track index, detection index)`
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Global nearest neighbour on planar center distance.
///
/// Pairs farther apart than the gate, or of different class, are
/// forbidden; any forbidden pair the solver still returns is split back
/// into unmatched entries.
pub fn associate(
    tracks: &[Track],
    dets: &[DetectionWithCovariance],
    cfg: &TrackerConfig,
) -> Association {
    let cost: Vec<Vec<f64>> = tracks
        .iter()
        .map(|t| {
            dets.iter()
                .map(|d| {
                    let dist = (t.pose.x() - d.bbox.x).hypot(t.pose.y() - d.bbox.y);
                    if t.class != d.bbox.class || dist > cfg.gate_distance {
                        FORBIDDEN_COST
                    } else {
                        dist
                    }
                })
                .collect()
        })
        .collect();

    let mut out = Association::default();
    let mut track_used = vec![false; tracks.len()];
    let mut det_used = vec![false; dets.len()];
    if !tracks.is_empty() && !dets.is_empty() {
        for (ti, di) in hungarian_assign(&cost) {
            if cost[ti][di] <= cfg.gate_distance {
                out.matches.push((ti, di));
                track_used[ti] = true;
                det_used[di] = true;
            }
        }
    }
    out.unmatched_tracks = (0..tracks.len()).filter(|&i| !track_used[i]).collect();
    out.unmatched_detections = (0..dets.len()).filter(|&i| !det_used[i]).collect();
    out
}
