//! Photon-counting camera: pixel integration, quantum efficiency, uniform
//! background, and Poisson shot noise. Frames round-trip through 16-bit PGM.

use std::path::Path;

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::ComplexField;
use crate::seed;

pub const DEFAULT_EXPOSURE: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    /// Sensor side length, pixels.
    pub pixels: usize,
    /// Meters per pixel in the field plane.
    pub pitch: f64,
    /// Seconds.
    pub exposure: f64,
    pub qe: f64,
    /// Mean background counts per pixel per frame.
    pub background: f64,
    pub seed: u64,
}

impl DetectorSpec {
    pub const MIN_PIXELS: usize = 32;

    pub fn validate(&self) -> Result<()> {
        if self.pixels < Self::MIN_PIXELS {
            return Err(Error::invalid(format!(
                "sensor needs >= {} pixels per side, got {}",
                Self::MIN_PIXELS,
                self.pixels
            )));
        }
        if !(self.pitch > 0.0 && self.pitch.is_finite()) {
            return Err(Error::invalid("pixel pitch must be > 0"));
        }
        if !(self.exposure > 0.0 && self.exposure.is_finite()) {
            return Err(Error::invalid("exposure must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.qe) {
            return Err(Error::invalid(format!("qe must lie in [0, 1], got {}", self.qe)));
        }
        if !(self.background >= 0.0 && self.background.is_finite()) {
            return Err(Error::invalid("background must be >= 0"));
        }
        Ok(())
    }

    /// Physical coordinate of pixel center `i`, same centering as [`crate::modes::GridSpec`].
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.pixels / 2) as f64) * self.pitch
    }
}

/// Photon counts, row-major, with exposure metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub counts: Vec<u32>,
    pub exposure: f64,
    pub index: usize,
    /// Seconds from the start of the sequence.
    pub timestamp: f64,
}

impl Frame {
    pub fn new(width: usize, height: usize, counts: Vec<u32>, exposure: f64, index: usize) -> Result<Self> {
        if counts.len() != width * height || width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "frame of {width}x{height} cannot hold {} counts",
                counts.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            counts,
            exposure,
            index,
            timestamp: index as f64 * exposure,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn at(&self, row: usize, col: usize) -> u32 {
        self.counts[row * self.width + col]
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// 16-bit binary PGM (`P5`, maxval 65535, big-endian). Counts above
    /// 65535 saturate.
    pub fn to_pgm(&self) -> Vec<u8> {
        let header = format!("P5\n{} {}\n65535\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + 2 * self.counts.len());
        out.extend_from_slice(header.as_bytes());
        for &c in &self.counts {
            out.extend_from_slice(&(c.min(u16::MAX as u32) as u16).to_be_bytes());
        }
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }

    pub fn read_pgm(path: &Path, index: usize, exposure: f64) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let (width, height, counts) = decode_pgm(&bytes).map_err(|reason| Error::Pgm {
            path: path.to_path_buf(),
            reason,
        })?;
        Frame::new(width, height, counts, exposure, index)
    }
}

/// Parses binary PGM with 8- or 16-bit samples.
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<u32>), String> {
    let mut pos = 0;
    let mut token = || -> std::result::Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err("not a binary PGM (magic P5)".into());
    }
    let parse = |s: String, what: &str| s.parse::<usize>().map_err(|_| format!("bad {what} `{s}`"));
    let width = parse(token()?, "width")?;
    let height = parse(token()?, "height")?;
    let maxval = parse(token()?, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} out of range"));
    }
    // exactly one whitespace byte separates header from raster
    let data = &bytes[pos + 1..];
    let bytes_per = if maxval > 255 { 2 } else { 1 };
    let expected = width * height * bytes_per;
    if data.len() < expected {
        return Err(format!("raster has {} bytes, need {expected}", data.len()));
    }
    let counts = if bytes_per == 2 {
        data[..expected]
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as u32)
            .collect()
    } else {
        data[..expected].iter().map(|&b| b as u32).collect()
    };
    Ok((width, height, counts))
}

/// Fraction of the field's power landing on each sensor pixel.
///
/// Uses the field samples directly when the sensor matches the grid,
/// otherwise bilinear resampling of intensity at pixel centers.
pub fn power_fractions(field: &ComplexField, det: &DetectorSpec) -> Vec<f64> {
    let grid = field.grid();
    let norm = field.norm_sqr();
    let m = det.pixels;
    if !(norm > 0.0) {
        return vec![0.0; m * m];
    }
    let same = grid.n() == m && ((grid.pitch() - det.pitch) / det.pitch).abs() < 1e-12;
    if same {
        let p2 = det.pitch * det.pitch;
        return field.data().iter().map(|v| v.norm_sqr() * p2 / norm).collect();
    }
    let n = grid.n();
    let intensity = field.intensity();
    let sample = |fi: f64, fj: f64| -> f64 {
        if fi < 0.0 || fj < 0.0 || fi > (n - 1) as f64 || fj > (n - 1) as f64 {
            return 0.0;
        }
        let (i0, j0) = (fi.floor() as usize, fj.floor() as usize);
        let (i1, j1) = ((i0 + 1).min(n - 1), (j0 + 1).min(n - 1));
        let (ti, tj) = (fi - i0 as f64, fj - j0 as f64);
        let at = |i: usize, j: usize| intensity[i * n + j];
        (1.0 - ti) * ((1.0 - tj) * at(i0, j0) + tj * at(i0, j1)) + ti * ((1.0 - tj) * at(i1, j0) + tj * at(i1, j1))
    };
    let p2 = det.pitch * det.pitch;
    let mut out = Vec::with_capacity(m * m);
    for r in 0..m {
        let fi = grid.index_of(det.coord(r));
        for c in 0..m {
            let fj = grid.index_of(det.coord(c));
            out.push(sample(fi, fj) * p2 / norm);
        }
    }
    out
}

/// Per-pixel Poisson means `qe·expected·fraction + background`.
pub fn mean_counts(field: &ComplexField, det: &DetectorSpec, expected_photons: f64) -> Result<Vec<f64>> {
    det.validate()?;
    if !(expected_photons >= 0.0 && expected_photons.is_finite()) {
        return Err(Error::invalid(format!(
            "expected photons must be >= 0, got {expected_photons}"
        )));
    }
    let scale = det.qe * expected_photons;
    Ok(power_fractions(field, det)
        .into_iter()
        .map(|f| scale * f + det.background)
        .collect())
}

/// Shot-noise-limited frame, deterministic in `(det.seed, frame_index)`.
pub fn capture_frame(
    field: &ComplexField,
    det: &DetectorSpec,
    expected_photons: f64,
    frame_index: usize,
) -> Result<Frame> {
    let means = mean_counts(field, det, expected_photons)?;
    let mut rng = seed::rng(seed::derive(det.seed, frame_index as u64));
    let counts = means
        .iter()
        .map(|&mu| {
            if mu > 0.0 {
                Poisson::new(mu).expect("positive finite mean").sample(&mut rng) as u32
            } else {
                0
            }
        })
        .collect();
    Frame::new(det.pixels, det.pixels, counts, det.exposure, frame_index)
}

/// Noise-free frame: per-pixel means rounded to the nearest count.
pub fn render_mean(
    field: &ComplexField,
    det: &DetectorSpec,
    expected_photons: f64,
    frame_index: usize,
) -> Result<Frame> {
    let counts = mean_counts(field, det, expected_photons)?
        .into_iter()
        .map(|mu| mu.round().min(u32::MAX as f64) as u32)
        .collect();
    Frame::new(det.pixels, det.pixels, counts, det.exposure, frame_index)
}

/// Renders `n_frames` frames in parallel; `field_source(i)` supplies the
/// received field of frame `i` (typically a fresh channel realization).
pub fn capture_sequence<F>(
    field_source: F,
    det: &DetectorSpec,
    expected_photons: f64,
    n_frames: usize,
) -> Result<Vec<Frame>>
where
    F: Fn(usize) -> Result<ComplexField> + Sync,
{
    if n_frames == 0 {
        return Err(Error::invalid("a sequence needs at least one frame"));
    }
    (0..n_frames)
        .into_par_iter()
        .map(|i| capture_frame(&field_source(i)?, det, expected_photons, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{lg_field, GridSpec, LGModeSpec};

    fn setup() -> (ComplexField, DetectorSpec) {
        let grid = GridSpec::new(128, 0.08).unwrap();
        let field = lg_field(&LGModeSpec::new(1, 0, 5e-3, 532e-9).unwrap(), &grid, 0.0).unwrap();
        let det = DetectorSpec {
            pixels: 128,
            pitch: grid.pitch(),
            exposure: DEFAULT_EXPOSURE,
            qe: 0.5,
            background: 0.0,
            seed: 3,
        };
        (field, det)
    }

    #[test]
    fn dark_frame_without_light_or_background() {
        let (f, det) = setup();
        let frame = capture_frame(&f, &det, 0.0, 0).unwrap();
        assert_eq!(frame.total(), 0);
    }

    #[test]
    fn negative_flux_rejected() {
        let (f, det) = setup();
        assert!(capture_frame(&f, &det, -1.0, 0).is_err());
        let bad = DetectorSpec { pixels: 16, ..det };
        assert!(capture_frame(&f, &bad, 1.0, 0).is_err());
    }

    #[test]
    fn frames_are_deterministic() {
        let (f, det) = setup();
        let a = capture_frame(&f, &det, 5000.0, 9).unwrap();
        let b = capture_frame(&f, &det, 5000.0, 9).unwrap();
        let c = capture_frame(&f, &det, 5000.0, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn no_counts_where_there_is_no_light() {
        let (f, det) = setup();
        let frame = capture_frame(&f, &det, 1e6, 0).unwrap();
        let c = det.pixels / 2;
        assert_eq!(frame.at(c, c), 0);
    }

    #[test]
    fn resampled_fractions_sum_to_one() {
        let (f, _) = setup();
        let det = DetectorSpec {
            pixels: 48,
            pitch: 0.08 / 40.0,
            exposure: DEFAULT_EXPOSURE,
            qe: 1.0,
            background: 0.0,
            seed: 0,
        };
        let total: f64 = power_fractions(&f, &det).iter().sum();
        assert!((total - 1.0).abs() < 0.02, "total {total}");
    }

    #[test]
    fn sequence_timestamps() {
        let (f, det) = setup();
        let frames = capture_sequence(|_| Ok(f.clone()), &det, 100.0, 3).unwrap();
        let stamps: Vec<f64> = frames.iter().map(|fr| fr.timestamp).collect();
        assert_eq!(frames.iter().map(|fr| fr.index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!((stamps[2] - 0.06).abs() < 1e-12);
        assert!(capture_sequence(|_| Ok(f.clone()), &det, 100.0, 0).is_err());
    }

    #[test]
    fn pgm_golden_bytes() {
        let frame = Frame::new(2, 2, vec![0, 1, 258, 70000], 0.03, 0).unwrap();
        let mut golden = b"P5\n2 2\n65535\n".to_vec();
        golden.extend_from_slice(&[0, 0, 0, 1, 1, 2, 0xff, 0xff]);
        assert_eq!(frame.to_pgm(), golden);
        let (w, h, counts) = decode_pgm(&golden).unwrap();
        assert_eq!((w, h, counts), (2, 2, vec![0, 1, 258, 65535]));
    }

    #[test]
    fn pgm_decoder_handles_comments_and_8bit() {
        let mut bytes = b"P5\n# made by hand\n3 1\n255\n".to_vec();
        bytes.extend_from_slice(&[7, 8, 9]);
        assert_eq!(decode_pgm(&bytes).unwrap(), (3, 1, vec![7, 8, 9]));
        assert!(decode_pgm(b"P2\n1 1\n255\n1").is_err());
        assert!(decode_pgm(b"P5\n4 4\n65535\n\x00").is_err());
    }
}
