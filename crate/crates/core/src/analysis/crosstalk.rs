use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::petals::OrientationResult;
use crate::modes::analytic_fidelity;

/// Projection probabilities of received states (rows) onto sent states (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkMatrix {
    pub sent_phases: Vec<f64>,
    pub received_phases: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl CrosstalkMatrix {
    /// `values[i][i]`, the state fidelities when rows and columns pair up.
    pub fn diagonal(&self) -> Vec<f64> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, row)| row.get(i).copied())
            .collect()
    }

    /// True when every row falls off monotonically (within `slack`) as the
    /// sent phase moves away from the row's own sent phase, on both sides.
    pub fn falls_off_monotonically(&self, slack: f64) -> bool {
        let m = self.sent_phases.len();
        self.values.iter().enumerate().take(m).all(|(i, row)| {
            let mut by_distance: Vec<(f64, f64)> = (0..m)
                .map(|j| (circular_distance(self.sent_phases[i], self.sent_phases[j]), row[j]))
                .collect();
            by_distance.sort_by(|a, b| a.0.total_cmp(&b.0));
            by_distance
                .windows(2)
                .all(|w| w[1].0 - w[0].0 < 1e-9 || w[1].1 <= w[0].1 + slack)
        })
    }
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// `values[i][j] = cos²((θ_sent[j] − θ_received[i])/2)`.
pub fn crosstalk(sent_phases: &[f64], received: &[OrientationResult]) -> CrosstalkMatrix {
    let values = received
        .iter()
        .map(|r| sent_phases.iter().map(|&s| analytic_fidelity(s, r.theta)).collect())
        .collect();
    CrosstalkMatrix {
        sent_phases: sent_phases.to_vec(),
        received_phases: received.iter().map(|r| r.theta).collect(),
        values,
    }
}

/// One row per received state, each row the mean projection over that
/// state's frames; `received_phases` holds the circular mean phase.
pub fn crosstalk_averaged(sent_phases: &[f64], received: &[Vec<OrientationResult>]) -> CrosstalkMatrix {
    let mut values = Vec::with_capacity(received.len());
    let mut phases = Vec::with_capacity(received.len());
    for group in received {
        let per_frame = crosstalk(sent_phases, group);
        let n = group.len().max(1) as f64;
        let row = (0..sent_phases.len())
            .map(|j| per_frame.values.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect();
        values.push(row);
        let (s, c) = group
            .iter()
            .fold((0.0, 0.0), |(s, c), r| (s + r.theta.sin(), c + r.theta.cos()));
        phases.push(if group.is_empty() { f64::NAN } else { s.atan2(c).rem_euclid(TAU) });
    }
    CrosstalkMatrix {
        sent_phases: sent_phases.to_vec(),
        received_phases: phases,
        values,
    }
}

/// `k·2π/count` for `k = 0..count`.
pub fn equally_spaced_phases(count: usize) -> Vec<f64> {
    (0..count).map(|k| k as f64 * TAU / count as f64).collect()
}

/// Indices `(i, j)` of sent pairs that are mutually orthogonal (`Δθ = π`).
pub fn orthogonal_pairs(sent_phases: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..sent_phases.len() {
        for j in 0..sent_phases.len() {
            if (circular_distance(sent_phases[i], sent_phases[j]) - PI).abs() < 1e-9 {
                out.push((i, j));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::petals::OrientationResult;
    use approx::assert_abs_diff_eq;

    fn perfect(theta: f64) -> OrientationResult {
        OrientationResult {
            angle: 0.0,
            theta,
            quality: 1.0,
            low_confidence: false,
        }
    }

    #[test]
    fn perfect_reception_of_eight_states() {
        let sent = equally_spaced_phases(8);
        let received: Vec<_> = sent.iter().map(|&t| perfect(t)).collect();
        let m = crosstalk(&sent, &received);
        for (i, row) in m.values.iter().enumerate() {
            assert_abs_diff_eq!(row[i], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(row[(i + 1) % 8], (PI / 8.0).cos().powi(2), epsilon = 1e-12);
            assert_abs_diff_eq!(row[(i + 4) % 8], 0.0, epsilon = 1e-12);
        }
        assert!(m.falls_off_monotonically(0.0));
        assert_eq!(orthogonal_pairs(&sent).len(), 8);
    }

    #[test]
    fn shuffled_rows_are_not_monotone() {
        let sent = equally_spaced_phases(4);
        let received: Vec<_> = [0.0, PI, PI / 2.0, 1.5 * PI].iter().map(|&t| perfect(t)).collect();
        assert!(!crosstalk(&sent, &received).falls_off_monotonically(0.0));
    }

    #[test]
    fn averaged_rows_and_phases() {
        let sent = vec![0.0, PI];
        let groups = vec![vec![perfect(0.1), perfect(TAU - 0.1)], vec![perfect(PI)]];
        let m = crosstalk_averaged(&sent, &groups);
        assert_abs_diff_eq!(m.values[0][0], (0.05f64).cos().powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(m.received_phases[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.values[1][1], 1.0, epsilon = 1e-12);
    }
}
