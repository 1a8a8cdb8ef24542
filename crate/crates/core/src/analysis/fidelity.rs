use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::petals::{angle_deviation, orientation, segment_petals_with, OrientationResult, SegmentError, SegmentOptions};
use crate::detector::Frame;
use crate::error::{Error, Result};
use crate::modes::{analytic_fidelity, SuperpositionSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFidelity {
    pub frame_index: usize,
    pub timestamp: f64,
    /// `None` when petal detection failed on this frame.
    pub orientation: Option<OrientationResult>,
    pub fidelity: Option<f64>,
    /// Orientation error against the sent state, degrees.
    pub deviation_deg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1).
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl SeriesStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(SeriesStats {
            count: values.len(),
            mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelitySeries {
    pub samples: Vec<FrameFidelity>,
    pub stats: SeriesStats,
    pub deviation_stats: SeriesStats,
    pub failures: usize,
}

impl FidelitySeries {
    pub fn orientations(&self) -> Vec<OrientationResult> {
        self.samples.iter().filter_map(|s| s.orientation).collect()
    }
}

pub fn analyze_frame(frame: &Frame, sent: &SuperpositionSpec, opts: &SegmentOptions) -> FrameFidelity {
    let found = match segment_petals_with(frame, sent.ell, opts) {
        Ok(petals) => Some(orientation(&petals)),
        Err(SegmentError::TooFewComponents { .. }) | Err(SegmentError::Invalid(_)) => None,
    };
    FrameFidelity {
        frame_index: frame.index,
        timestamp: frame.timestamp,
        orientation: found,
        fidelity: found.map(|o| analytic_fidelity(sent.theta, o.theta)),
        deviation_deg: found.map(|o| angle_deviation(sent.theta, &o, sent.ell)),
    }
}

/// Segment → orient → closed-form fidelity against the sent phase, per frame.
/// Failed detections stay in `samples` as gaps and are left out of the stats.
pub fn fidelity_series(frames: &[Frame], sent: &SuperpositionSpec, opts: &SegmentOptions) -> Result<FidelitySeries> {
    if frames.len() < 2 {
        return Err(Error::invalid(format!(
            "a fidelity series needs >= 2 frames, got {}",
            frames.len()
        )));
    }
    let samples: Vec<FrameFidelity> = frames.par_iter().map(|f| analyze_frame(f, sent, opts)).collect();
    let fidelities: Vec<f64> = samples.iter().filter_map(|s| s.fidelity).collect();
    let deviations: Vec<f64> = samples.iter().filter_map(|s| s.deviation_deg).collect();
    let failures = samples.len() - fidelities.len();
    let stats = SeriesStats::from_values(&fidelities).ok_or(Error::NoDetections { failed: failures })?;
    let deviation_stats = SeriesStats::from_values(&deviations).expect("same count as fidelities");
    Ok(FidelitySeries {
        samples,
        stats,
        deviation_stats,
        failures,
    })
}
