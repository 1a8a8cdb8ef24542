//! Angle recognition: segment the `2ℓ` petals of a superposition pattern,
//! take their intensity centroids, and read the pattern orientation.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::image;
use crate::detector::Frame;
use crate::modes::expected_orientation;

pub const DEFAULT_THRESHOLD_FRACTION: f64 = 0.5;
pub const DEFAULT_SMOOTHING_PASSES: usize = 2;
/// Orientation results with a resultant length below this are flagged.
pub const LOW_CONFIDENCE_QUALITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentOptions {
    pub threshold_fraction: f64,
    pub smoothing_passes: usize,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        SegmentOptions {
            threshold_fraction: DEFAULT_THRESHOLD_FRACTION,
            smoothing_passes: DEFAULT_SMOOTHING_PASSES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SegmentError {
    #[error("invalid segmentation input: {0}")]
    Invalid(String),
    /// The frame is flagged, not fatal for a sequence.
    #[error("found {found} petal candidates, need {expected}")]
    TooFewComponents { found: usize, expected: usize },
}

/// Centroids in pixel coordinates, `x` = column, `y` = row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PetalSet {
    pub centroids: Vec<(f64, f64)>,
    pub pattern_center: (f64, f64),
    pub ell: u32,
}

pub fn segment_petals(frame: &Frame, ell: u32, threshold_fraction: f64) -> Result<PetalSet, SegmentError> {
    segment_petals_with(
        frame,
        ell,
        &SegmentOptions {
            threshold_fraction,
            ..Default::default()
        },
    )
}

/// Box-smooth, threshold at a fraction of the peak, keep the `2ℓ` largest
/// 8-connected components, and centroid each on the raw counts.
pub fn segment_petals_with(frame: &Frame, ell: u32, opts: &SegmentOptions) -> Result<PetalSet, SegmentError> {
    if ell < 1 {
        return Err(SegmentError::Invalid("ell must be >= 1".into()));
    }
    if !(opts.threshold_fraction > 0.0 && opts.threshold_fraction < 1.0) {
        return Err(SegmentError::Invalid(format!(
            "threshold fraction must lie in (0, 1), got {}",
            opts.threshold_fraction
        )));
    }
    let expected = 2 * ell as usize;
    let (w, h) = (frame.width, frame.height);
    let raw = frame.as_f64();
    let smoothed = image::smooth(&raw, w, h, opts.smoothing_passes);
    let peak = smoothed.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(SegmentError::TooFewComponents { found: 0, expected });
    }
    let cut = opts.threshold_fraction * peak;
    let mask: Vec<bool> = smoothed.iter().map(|&v| v >= cut).collect();
    let mut components = image::label_components(&mask, w, h);
    if components.len() < expected {
        return Err(SegmentError::TooFewComponents {
            found: components.len(),
            expected,
        });
    }
    let mass = |c: &Vec<usize>| c.iter().map(|&p| smoothed[p]).sum::<f64>();
    components.sort_by(|a, b| b.len().cmp(&a.len()).then(mass(b).total_cmp(&mass(a))));
    components.truncate(expected);

    let mut centroids = Vec::with_capacity(expected);
    for comp in &components {
        // a thresholded blob of smoothed signal can hold zero raw counts
        let c = image::weighted_centroid(comp, &raw, w)
            .or_else(|| image::weighted_centroid(comp, &smoothed, w))
            .expect("component pixels lie above a positive threshold");
        centroids.push(c);
    }
    let union: Vec<usize> = components.concat();
    let pattern_center = image::weighted_centroid(&union, &raw, w)
        .or_else(|| image::weighted_centroid(&union, &smoothed, w))
        .expect("union lies above a positive threshold");
    Ok(PetalSet {
        centroids,
        pattern_center,
        ell,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationResult {
    /// Pattern orientation in `[0, π/ℓ)`, radians.
    pub angle: f64,
    /// Retrieved relative phase `(−2ℓ·angle) mod 2π`.
    pub theta: f64,
    /// Resultant length of the `2ℓ`-fold circular mean, in `[0, 1]`.
    pub quality: f64,
    pub low_confidence: bool,
}

/// Circular mean of the `2ℓ`-fold centroid bearings about the pattern center.
///
/// For `ℓ = 1` this is the direction of the line through the two centroids.
pub fn orientation(petals: &PetalSet) -> OrientationResult {
    let ell = petals.ell.max(1) as f64;
    let (cx, cy) = petals.pattern_center;
    let sum: Complex64 = petals
        .centroids
        .iter()
        .map(|&(x, y)| Complex64::from_polar(1.0, 2.0 * ell * (y - cy).atan2(x - cx)))
        .sum();
    let count = petals.centroids.len().max(1) as f64;
    let quality = (sum.norm() / count).clamp(0.0, 1.0);
    let angle = orientation_from_resultant(sum.arg(), petals.ell);
    OrientationResult {
        angle,
        theta: theta_from_angle(angle, petals.ell),
        quality,
        low_confidence: quality < LOW_CONFIDENCE_QUALITY,
    }
}

fn orientation_from_resultant(arg: f64, ell: u32) -> f64 {
    let period = PI / ell as f64;
    let a = (arg / (2.0 * ell as f64)).rem_euclid(period);
    if a >= period {
        0.0
    } else {
        a
    }
}

pub fn theta_from_angle(angle: f64, ell: u32) -> f64 {
    let t = (-2.0 * ell as f64 * angle).rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Orientation error in degrees, folded into `[0, 90°/ℓ]`.
pub fn angle_deviation(sent_theta: f64, result: &OrientationResult, ell: u32) -> f64 {
    orientation_error(expected_orientation(sent_theta, ell), result.angle, ell).to_degrees()
}

/// Distance between two orientations on the `π/ℓ` circle, radians.
pub fn orientation_error(expected: f64, measured: f64, ell: u32) -> f64 {
    let period = PI / ell.max(1) as f64;
    let d = (measured - expected).rem_euclid(period);
    d.min(period - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn petals_at(degrees: &[f64], ell: u32) -> PetalSet {
        let r = 20.0;
        PetalSet {
            centroids: degrees
                .iter()
                .map(|d| (50.0 + r * d.to_radians().cos(), 50.0 + r * d.to_radians().sin()))
                .collect(),
            pattern_center: (50.0, 50.0),
            ell,
        }
    }

    #[test]
    fn horizontal_pair_is_zero_orientation() {
        let o = orientation(&petals_at(&[0.0, 180.0], 1));
        assert_abs_diff_eq!(o.angle, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o.theta, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o.quality, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_pair_maps_to_quarter_phase() {
        let o = orientation(&petals_at(&[135.0, 315.0], 1));
        assert_abs_diff_eq!(o.angle.to_degrees(), 135.0, epsilon = 1e-9);
        assert_abs_diff_eq!(o.theta.to_degrees(), 90.0, epsilon = 1e-9);
    }

    #[test]
    fn second_order_four_petals() {
        let o = orientation(&petals_at(&[10.0, 100.0, 190.0, 280.0], 2));
        assert_abs_diff_eq!(o.angle.to_degrees(), 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(o.theta.to_degrees(), 320.0, epsilon = 1e-9);
    }

    #[test]
    fn scattered_centroids_flag_low_confidence() {
        let o = orientation(&petals_at(&[0.0, 45.0, 90.0, 135.0], 1));
        assert!(o.quality < 1e-9);
        assert!(o.low_confidence);
    }

    #[test]
    fn deviation_folding() {
        let at = |deg: f64| OrientationResult {
            angle: deg.to_radians(),
            theta: 0.0,
            quality: 1.0,
            low_confidence: false,
        };
        assert_abs_diff_eq!(angle_deviation(0.0, &at(0.0), 1), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(angle_deviation(0.0, &at(7.2), 1), 7.2, epsilon = 1e-9);
        assert_abs_diff_eq!(angle_deviation(0.0, &at(179.0), 1), 1.0, epsilon = 1e-9);
        // ℓ = 3: period 60°, fold at 30°
        assert_abs_diff_eq!(angle_deviation(0.0, &at(50.0), 3), 10.0, epsilon = 1e-9);
    }

    #[test]
    fn blank_frame_fails_with_zero_count() {
        let frame = Frame::new(64, 64, vec![0; 64 * 64], 0.03, 0).unwrap();
        assert_eq!(
            segment_petals(&frame, 1, 0.5),
            Err(SegmentError::TooFewComponents { found: 0, expected: 2 })
        );
        assert!(matches!(segment_petals(&frame, 0, 0.5), Err(SegmentError::Invalid(_))));
        assert!(matches!(segment_petals(&frame, 1, 1.5), Err(SegmentError::Invalid(_))));
    }
}
