use serde::{Deserialize, Serialize};

use crate::detector::Frame;
use crate::error::{Error, Result};

/// `arctan(Δ/L)`.
pub fn tilt_angle(displacement: f64, length: f64) -> f64 {
    (displacement / length).atan()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TipTilt {
    /// Per-sample tip angles about the series mean, radians.
    pub theta_x: Vec<f64>,
    pub theta_y: Vec<f64>,
    /// RMS radial deviation from the mean position, meters.
    pub radial_rms: f64,
    /// Mean radial deviation from the mean position, meters.
    pub mean_radial: f64,
    pub theta_x_rms: f64,
    pub theta_y_rms: f64,
}

/// Count-weighted spot position in meters, with pixel `(n/2, n/2)` at the
/// origin; `None` for an empty frame.
pub fn frame_centroid(frame: &Frame, pitch: f64) -> Option<(f64, f64)> {
    let (mut sx, mut sy, mut total) = (0.0, 0.0, 0.0);
    for (i, &c) in frame.counts.iter().enumerate() {
        let c = c as f64;
        sx += c * (i % frame.width) as f64;
        sy += c * (i / frame.width) as f64;
        total += c;
    }
    (total > 0.0).then(|| {
        (
            (sx / total - (frame.width / 2) as f64) * pitch,
            (sy / total - (frame.height / 2) as f64) * pitch,
        )
    })
}

/// Tip/tilt angles of a wandering spot observed `length` meters downstream.
pub fn tip_tilt(positions: &[(f64, f64)], length: f64) -> Result<TipTilt> {
    if positions.len() < 2 {
        return Err(Error::invalid("tip-tilt needs at least 2 positions"));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::invalid(format!("link length must be > 0, got {length}")));
    }
    let n = positions.len() as f64;
    let mx = positions.iter().map(|p| p.0).sum::<f64>() / n;
    let my = positions.iter().map(|p| p.1).sum::<f64>() / n;
    let dx: Vec<f64> = positions.iter().map(|p| p.0 - mx).collect();
    let dy: Vec<f64> = positions.iter().map(|p| p.1 - my).collect();
    let radial: Vec<f64> = dx.iter().zip(&dy).map(|(x, y)| x.hypot(*y)).collect();
    let rms = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() / n).sqrt();
    let theta_x: Vec<f64> = dx.iter().map(|&d| tilt_angle(d, length)).collect();
    let theta_y: Vec<f64> = dy.iter().map(|&d| tilt_angle(d, length)).collect();
    Ok(TipTilt {
        radial_rms: rms(&radial),
        mean_radial: radial.iter().sum::<f64>() / n,
        theta_x_rms: rms(&theta_x),
        theta_y_rms: rms(&theta_y),
        theta_x,
        theta_y,
    })
}
