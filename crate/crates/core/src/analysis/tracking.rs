//! Frame-to-frame linking of vortex cores.

use serde::{Deserialize, Serialize};

use super::fidelity::SeriesStats;
use super::vortex::VortexCore;

/// Largest core count solved by exact assignment; above it, greedy nearest pairs.
pub const MAX_EXACT_ASSIGNMENT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub frame_index: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: usize,
    pub points: Vec<TrackPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDistances {
    pub frame_index: usize,
    /// `(id_a, id_b, distance)` with `id_a < id_b`, pixels.
    pub pairs: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackSet {
    pub trajectories: Vec<Trajectory>,
    pub inter_core_distances: Vec<FrameDistances>,
    /// Frames at which the core count changed and tracks were opened or closed.
    pub discontinuities: Vec<usize>,
}

impl TrackSet {
    /// Mean position of the cores present in each frame.
    pub fn centroid_series(&self) -> Vec<(usize, f64, f64)> {
        let mut frames: Vec<usize> = self
            .trajectories
            .iter()
            .flat_map(|t| t.points.iter().map(|p| p.frame_index))
            .collect();
        frames.sort_unstable();
        frames.dedup();
        frames
            .into_iter()
            .map(|f| {
                let pts: Vec<&TrackPoint> = self
                    .trajectories
                    .iter()
                    .filter_map(|t| t.points.iter().find(|p| p.frame_index == f))
                    .collect();
                let k = pts.len() as f64;
                (f, pts.iter().map(|p| p.x).sum::<f64>() / k, pts.iter().map(|p| p.y).sum::<f64>() / k)
            })
            .collect()
    }

    /// Standard deviation over time of each core-pair distance.
    pub fn pair_distance_stats(&self) -> Vec<((usize, usize), SeriesStats)> {
        let mut keys: Vec<(usize, usize)> = self
            .inter_core_distances
            .iter()
            .flat_map(|f| f.pairs.iter().map(|&(a, b, _)| (a, b)))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys.into_iter()
            .filter_map(|key| {
                let values: Vec<f64> = self
                    .inter_core_distances
                    .iter()
                    .filter_map(|f| f.pairs.iter().find(|p| (p.0, p.1) == key).map(|p| p.2))
                    .collect();
                SeriesStats::from_values(&values).map(|s| (key, s))
            })
            .collect()
    }

    /// RMS radial distance of the per-frame core centroid from its mean, pixels.
    pub fn centroid_wander_rms(&self) -> f64 {
        let series = self.centroid_series();
        let n = series.len().max(1) as f64;
        let mx = series.iter().map(|s| s.1).sum::<f64>() / n;
        let my = series.iter().map(|s| s.2).sum::<f64>() / n;
        (series.iter().map(|s| (s.1 - mx).powi(2) + (s.2 - my).powi(2)).sum::<f64>() / n).sqrt()
    }
}

fn sq_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// Minimum-cost matching of `rows` to distinct `cols` (requires
/// `rows.len() <= cols.len() <= 8`), by DP over column subsets.
fn exact_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, |r| r.len());
    let states = 1usize << cols;
    let mut best = vec![f64::INFINITY; states];
    let mut choice = vec![usize::MAX; states];
    best[0] = 0.0;
    for mask in 0..states {
        let row = mask.count_ones() as usize;
        if row >= rows || !best[mask].is_finite() {
            continue;
        }
        for col in 0..cols {
            if mask & (1 << col) != 0 {
                continue;
            }
            let next = mask | (1 << col);
            let c = best[mask] + cost[row][col];
            if c < best[next] {
                best[next] = c;
                choice[next] = col;
            }
        }
    }
    let end = (0..states)
        .filter(|m| m.count_ones() as usize == rows)
        .min_by(|&a, &b| best[a].total_cmp(&best[b]))
        .unwrap_or(0);
    let mut out = vec![0; rows];
    let mut mask = end;
    for row in (0..rows).rev() {
        let col = choice[mask];
        out[row] = col;
        mask &= !(1 << col);
    }
    out
}

/// Pairs `(row, col)` minimizing total cost.
fn assign(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    if rows.max(cols) <= MAX_EXACT_ASSIGNMENT {
        if rows <= cols {
            return exact_assignment(cost).into_iter().enumerate().collect();
        }
        let transposed: Vec<Vec<f64>> = (0..cols).map(|c| (0..rows).map(|r| cost[r][c]).collect()).collect();
        return exact_assignment(&transposed)
            .into_iter()
            .enumerate()
            .map(|(c, r)| (r, c))
            .collect();
    }
    let mut candidates: Vec<(f64, usize, usize)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .map(|(r, c)| (cost[r][c], r, c))
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut used_r, mut used_c) = (vec![false; rows], vec![false; cols]);
    let mut out = Vec::new();
    for (_, r, c) in candidates {
        if !used_r[r] && !used_c[c] {
            used_r[r] = true;
            used_c[c] = true;
            out.push((r, c));
        }
    }
    out
}

/// Links cores across frames by minimum total squared displacement.
///
/// `per_frame_cores[k]` holds the cores of the `k`-th frame; the frame index
/// is taken from the cores when present, else `k`.
pub fn track_cores(per_frame_cores: &[Vec<VortexCore>]) -> TrackSet {
    let mut set = TrackSet::default();
    // (trajectory slot, last position)
    let mut active: Vec<(usize, (f64, f64))> = Vec::new();
    for (k, cores) in per_frame_cores.iter().enumerate() {
        let frame_index = cores.first().map_or(k, |c| c.frame_index);
        let positions: Vec<(f64, f64)> = cores.iter().map(|c| c.position).collect();
        if k > 0 && positions.len() != active.len() {
            set.discontinuities.push(frame_index);
        }
        let cost: Vec<Vec<f64>> = active
            .iter()
            .map(|(_, last)| positions.iter().map(|&p| sq_dist(*last, p)).collect())
            .collect();
        let matches = assign(&cost);
        let mut next_active = Vec::with_capacity(positions.len());
        let mut taken = vec![false; positions.len()];
        for (r, c) in matches {
            let slot = active[r].0;
            taken[c] = true;
            set.trajectories[slot].points.push(TrackPoint {
                frame_index,
                x: positions[c].0,
                y: positions[c].1,
            });
            next_active.push((slot, positions[c]));
        }
        for (&p, _) in positions.iter().zip(&taken).filter(|(_, &t)| !t) {
            let slot = set.trajectories.len();
            set.trajectories.push(Trajectory {
                id: slot,
                points: vec![TrackPoint {
                    frame_index,
                    x: p.0,
                    y: p.1,
                }],
            });
            next_active.push((slot, p));
        }
        next_active.sort_by_key(|a| a.0);
        let mut pairs = Vec::new();
        for i in 0..next_active.len() {
            for j in i + 1..next_active.len() {
                let (a, pa) = next_active[i];
                let (b, pb) = next_active[j];
                pairs.push((a, b, sq_dist(pa, pb).sqrt()));
            }
        }
        set.inter_core_distances.push(FrameDistances { frame_index, pairs });
        active = next_active;
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cores(frame: usize, pts: &[(f64, f64)]) -> Vec<VortexCore> {
        pts.iter()
            .map(|&position| VortexCore {
                position,
                charge: 1,
                charge_sign_known: true,
                frame_index: frame,
            })
            .collect()
    }

    #[test]
    fn static_cores_stay_put() {
        let pts = [(10.0, 10.0), (20.0, 12.0), (15.0, 20.0)];
        let frames: Vec<_> = (0..5).map(|f| cores(f, &pts)).collect();
        let t = track_cores(&frames);
        assert_eq!(t.trajectories.len(), 3);
        for traj in &t.trajectories {
            assert!(traj.points.iter().all(|p| (p.x, p.y) == (traj.points[0].x, traj.points[0].y)));
        }
        assert!(t.discontinuities.is_empty());
        assert_eq!(t.centroid_wander_rms(), 0.0);
    }

    #[test]
    fn rigid_translation_with_shuffled_order() {
        let base = [(10.0, 10.0), (20.0, 12.0), (15.0, 20.0)];
        let frames: Vec<_> = (0..6)
            .map(|f| {
                let d = f as f64 * 0.7;
                let mut pts: Vec<_> = base.iter().map(|&(x, y)| (x + d, y - 0.3 * d)).collect();
                pts.rotate_left(f % 3);
                cores(f, &pts)
            })
            .collect();
        let t = track_cores(&frames);
        assert_eq!(t.trajectories.len(), 3);
        for traj in &t.trajectories {
            let p0 = traj.points[0];
            for (f, p) in traj.points.iter().enumerate() {
                assert_abs_diff_eq!(p.x - p0.x, f as f64 * 0.7, epsilon = 1e-12);
            }
        }
        for (_, stats) in t.pair_distance_stats() {
            assert!(stats.std < 1e-12);
        }
        assert!(t.centroid_wander_rms() > 1.0);
    }

    #[test]
    fn count_change_opens_and_closes_tracks() {
        let frames = vec![
            cores(0, &[(0.0, 0.0), (10.0, 0.0)]),
            cores(1, &[(0.2, 0.0), (10.1, 0.0), (30.0, 30.0)]),
            cores(2, &[(30.1, 30.0)]),
        ];
        let t = track_cores(&frames);
        assert_eq!(t.discontinuities, vec![1, 2]);
        assert_eq!(t.trajectories.len(), 3);
        assert_eq!(t.trajectories[2].points.len(), 2);
        assert_eq!(t.inter_core_distances[1].pairs.len(), 3);
    }

    #[test]
    fn exact_beats_greedy() {
        // greedy would pair (0,0) first and force a long second link
        let cost = vec![vec![1.0, 2.0], vec![2.0, 100.0]];
        let m = assign(&cost);
        let total: f64 = m.iter().map(|&(r, c)| cost[r][c]).sum();
        assert_eq!(total, 4.0);
    }
}
