//! Phase-singularity detection.
//!
//! From a complex field the charge is exact: the wrapped phase is summed
//! around every 2×2 plaquette. From an intensity frame only dark cores can be
//! located, so their charge sign is unknown.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::image;
use crate::detector::Frame;
use crate::modes::ComplexField;

/// Default fraction of the second-moment beam radius searched for dark cores.
pub const DEFAULT_BEAM_SUPPORT_FRACTION: f64 = 0.5;
/// Dark-core minima must sit below this fraction of the smoothed peak.
pub const CORE_DEPTH_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VortexCore {
    /// Sub-pixel `(x, y)` = `(column, row)`.
    pub position: (f64, f64),
    pub charge: i32,
    /// `false` for frame-based detections, where only `|charge| = 1` is known.
    pub charge_sign_known: bool,
    pub frame_index: usize,
}

fn wrap(d: f64) -> f64 {
    // odd in d, so shared plaquette edges cancel even at exactly ±π
    d - TAU * (d / TAU).round()
}

/// Winding of the plaquette with lower-left sample `(row, col)`, traversed
/// `+x → +y` (counter-clockwise under the module's axis convention).
fn plaquette_winding(phase: &[f64], n: usize, row: usize, col: usize) -> i32 {
    let p = |r: usize, c: usize| phase[r * n + c];
    let loop_ = [p(row, col), p(row, col + 1), p(row + 1, col + 1), p(row + 1, col)];
    let total: f64 = (0..4).map(|k| wrap(loop_[(k + 1) % 4] - loop_[k])).sum();
    (total / TAU).round() as i32
}

/// Zero of the least-squares plane `a + b·x + c·y` through the four corners,
/// in plaquette-local coordinates; `None` if degenerate or far outside.
fn plaquette_zero(v00: Complex64, v10: Complex64, v11: Complex64, v01: Complex64) -> Option<(f64, f64)> {
    let b = ((v10 - v00) + (v11 - v01)) * 0.5;
    let c = ((v01 - v00) + (v11 - v10)) * 0.5;
    let a = (v00 + v10 + v11 + v01) * 0.25 - b * 0.5 - c * 0.5;
    let det = b.re * c.im - c.re * b.im;
    let scale = b.norm() * c.norm();
    if !(det.abs() > 1e-9 * scale) || scale == 0.0 {
        return None;
    }
    let x = (-a.re * c.im + c.re * a.im) / det;
    let y = (-b.re * a.im + a.re * b.im) / det;
    ((-0.5..=1.5).contains(&x) && (-0.5..=1.5).contains(&y)).then_some((x, y))
}

/// Plaquette windings inside a circle of `aperture_radius` meters about the
/// intensity centroid. Each marked plaquette is a core, except that a
/// touching group with mixed signs collapses to one core carrying the net
/// charge.
pub fn find_vortices_field(field: &ComplexField, aperture_radius: f64) -> Vec<VortexCore> {
    let grid = field.grid();
    let n = grid.n();
    let data = field.data();
    let phase: Vec<f64> = data.iter().map(|v| v.arg()).collect();
    let (cx, cy) = field.centroid();
    let (ccol, crow) = (grid.index_of(cx), grid.index_of(cy));
    let radius_px = aperture_radius / grid.pitch();

    let m = n - 1;
    let mut winding = vec![0i32; m * m];
    for row in 0..m {
        for col in 0..m {
            let (px, py) = (col as f64 + 0.5, row as f64 + 0.5);
            if (px - ccol).hypot(py - crow) <= radius_px {
                winding[row * m + col] = plaquette_winding(&phase, n, row, col);
            }
        }
    }
    let mask: Vec<bool> = winding.iter().map(|&w| w != 0).collect();
    let locate = |p: usize| {
        let (row, col) = (p / m, p % m);
        let at = |r: usize, c: usize| data[r * n + c];
        let (lx, ly) = plaquette_zero(at(row, col), at(row, col + 1), at(row + 1, col + 1), at(row + 1, col))
            .unwrap_or((0.5, 0.5));
        (col as f64 + lx, row as f64 + ly)
    };
    let mut cores = Vec::new();
    for cluster in image::label_components(&mask, m, m) {
        let same_sign = cluster.iter().all(|&p| winding[p].signum() == winding[cluster[0]].signum());
        if same_sign {
            // neighbouring plaquettes of one sign are distinct cores
            for &p in &cluster {
                cores.push(VortexCore {
                    position: locate(p),
                    charge: winding[p],
                    charge_sign_known: true,
                    frame_index: 0,
                });
            }
            continue;
        }
        // mixed signs at pixel scale: a sampling artefact, keep only the net charge
        let charge: i32 = cluster.iter().map(|&p| winding[p]).sum();
        if charge == 0 {
            continue;
        }
        let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
        for &p in &cluster {
            let (x, y) = locate(p);
            let w = winding[p].unsigned_abs() as f64;
            sx += w * x;
            sy += w * y;
            sw += w;
        }
        cores.push(VortexCore {
            position: (sx / sw, sy / sw),
            charge,
            charge_sign_known: true,
            frame_index: 0,
        });
    }
    cores
}

pub fn total_charge(cores: &[VortexCore]) -> i32 {
    cores.iter().map(|c| c.charge).sum()
}

/// Sub-pixel offset of the extremum of the least-squares quadratic over a
/// 3×3 stencil centered on `(row, col)`.
fn paraboloid_offset(img: &[f64], width: usize, row: usize, col: usize) -> (f64, f64) {
    let at = |dr: isize, dc: isize| img[(row as isize + dr) as usize * width + (col as isize + dc) as usize];
    let col_sum = |dc: isize| (-1..=1).map(|dr| at(dr, dc)).sum::<f64>();
    let row_sum = |dr: isize| (-1..=1).map(|dc| at(dr, dc)).sum::<f64>();
    let bx = (col_sum(1) - col_sum(-1)) / 6.0;
    let by = (row_sum(1) - row_sum(-1)) / 6.0;
    let dxx = (col_sum(-1) - 2.0 * col_sum(0) + col_sum(1)) / 6.0;
    let dyy = (row_sum(-1) - 2.0 * row_sum(0) + row_sum(1)) / 6.0;
    let exy = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / 4.0;
    // gradient zero of bx·x + by·y + dxx·x² + exy·x·y + dyy·y²
    let (h11, h12, h22) = (2.0 * dxx, exy, 2.0 * dyy);
    let det = h11 * h22 - h12 * h12;
    if det > 0.0 && h11 > 0.0 {
        let x = -(h22 * bx - h12 * by) / det;
        let y = -(h11 * by - h12 * bx) / det;
        if x.abs() <= 1.0 && y.abs() <= 1.0 {
            return (x, y);
        }
    }
    let axis = |minus: f64, mid: f64, plus: f64| {
        let curv = minus - 2.0 * mid + plus;
        if curv > 0.0 {
            (0.5 * (minus - plus) / curv).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    };
    (axis(at(0, -1), at(0, 0), at(0, 1)), axis(at(-1, 0), at(0, 0), at(1, 0)))
}

pub fn find_vortices_frame(frame: &Frame, beam_support_fraction: f64) -> Vec<VortexCore> {
    find_vortices_frame_with(frame, beam_support_fraction, 1)
}

/// Dark cores: local minima of the smoothed frame that lie within
/// `beam_support_fraction` of the beam's second-moment radius from its
/// centroid and below [`CORE_DEPTH_FRACTION`] of the peak.
pub fn find_vortices_frame_with(frame: &Frame, beam_support_fraction: f64, smoothing_passes: usize) -> Vec<VortexCore> {
    let (w, h) = (frame.width, frame.height);
    if w < 3 || h < 3 {
        return Vec::new();
    }
    let img = image::smooth(&frame.as_f64(), w, h, smoothing_passes);
    let peak = img.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Vec::new();
    }
    let all: Vec<usize> = (0..img.len()).collect();
    let Some((cx, cy)) = image::weighted_centroid(&all, &img, w) else {
        return Vec::new();
    };
    let total: f64 = img.iter().sum();
    let r2: f64 = all
        .iter()
        .map(|&p| img[p] * (((p % w) as f64 - cx).powi(2) + ((p / w) as f64 - cy).powi(2)))
        .sum::<f64>()
        / total;
    let support = beam_support_fraction * (2.0 * r2).sqrt();
    let depth = CORE_DEPTH_FRACTION * peak;

    let mut minima: Vec<(f64, f64)> = Vec::new();
    for row in 1..h - 1 {
        for col in 1..w - 1 {
            let v = img[row * w + col];
            if v > depth || (col as f64 - cx).hypot(row as f64 - cy) > support {
                continue;
            }
            let mut strictly_below_one = false;
            let mut is_min = true;
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let u = img[(row as isize + dr) as usize * w + (col as isize + dc) as usize];
                    if u < v {
                        is_min = false;
                    } else if u > v {
                        strictly_below_one = true;
                    }
                }
            }
            if is_min && strictly_below_one {
                let (dx, dy) = paraboloid_offset(&img, w, row, col);
                minima.push((col as f64 + dx, row as f64 + dy));
            }
        }
    }

    // a flat-bottomed core yields several touching minima
    let mut merged: Vec<(f64, f64, usize)> = Vec::new();
    for (x, y) in minima {
        match merged.iter_mut().find(|m| (m.0 / m.2 as f64 - x).hypot(m.1 / m.2 as f64 - y) < 1.5) {
            Some(m) => {
                m.0 += x;
                m.1 += y;
                m.2 += 1;
            }
            None => merged.push((x, y, 1)),
        }
    }
    merged
        .into_iter()
        .map(|(x, y, k)| VortexCore {
            position: (x / k as f64, y / k as f64),
            charge: 1,
            charge_sign_known: false,
            frame_index: frame.index,
        })
        .collect()
}
