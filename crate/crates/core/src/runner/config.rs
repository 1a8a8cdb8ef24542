//! Experiment configuration: a sectioned TOML file in which every key has a
//! default mirroring the reference link.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::petals::{DEFAULT_SMOOTHING_PASSES, DEFAULT_THRESHOLD_FRACTION};
use crate::analysis::vortex::DEFAULT_BEAM_SUPPORT_FRACTION;
use crate::analysis::SegmentOptions;
use crate::channel::{self, ChannelSpec, TurbulenceSpec};
use crate::detector::{DetectorSpec, DEFAULT_EXPOSURE};
use crate::error::{Error, Result};
use crate::modes::{self, GridSpec, LGModeSpec, SuperpositionSpec};
use crate::seed;
use crate::source::{self, EmittedState, SourceSpec};

/// Beam waist at the transmitter, meters.
pub const DEFAULT_WAIST: f64 = 5e-3;
pub const DEFAULT_GRID_N: usize = 128;
/// Grid side in waists; wide enough for ℓ = 3 after 55 m.
pub const DEFAULT_EXTENT_WAISTS: f64 = 13.0;
/// Source power giving 0.508 photons per 1 ns slot at 532 nm.
pub const DEFAULT_POWER: f64 = 1.898e-10;
/// Receiver-side loss taking the 38.2 dB channel to the quoted ~40 dB system loss.
pub const DEFAULT_RECEIVER_LOSS_DB: f64 = 1.8;
pub const DEFAULT_FRAMES_PER_STATE: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub power: f64,
    pub wavelength: f64,
    pub slot: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        SourceSection {
            power: DEFAULT_POWER,
            wavelength: source::DEFAULT_WAVELENGTH,
            slot: source::DEFAULT_SLOT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    /// Side length, meters.
    pub extent: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            n: DEFAULT_GRID_N,
            extent: DEFAULT_EXTENT_WAISTS * DEFAULT_WAIST,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub length: f64,
    pub extinction: f64,
    pub cn2: f64,
    pub outer_scale: f64,
    pub inner_scale: f64,
    pub screen_count: usize,
    /// Per-axis RMS pointing jitter, radians.
    pub tilt_rms: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let t = TurbulenceSpec::calibrated();
        ChannelSection {
            length: channel::DEFAULT_LENGTH,
            extinction: channel::DEFAULT_EXTINCTION,
            cn2: t.cn2,
            outer_scale: t.outer_scale,
            inner_scale: t.inner_scale,
            screen_count: t.screen_count,
            tilt_rms: channel::calibrated_tilt_rms(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    /// Sensor side, pixels; defaults to the grid size.
    pub pixels: Option<usize>,
    /// Meters per pixel in the field plane; defaults to the grid pitch.
    pub pitch: Option<f64>,
    pub exposure: f64,
    pub qe: f64,
    pub background: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        DetectorSection {
            pixels: None,
            pitch: None,
            exposure: DEFAULT_EXPOSURE,
            qe: 1.0,
            background: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub threshold_fraction: f64,
    pub smoothing_passes: usize,
    pub vortex_support_fraction: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            threshold_fraction: DEFAULT_THRESHOLD_FRACTION,
            smoothing_passes: DEFAULT_SMOOTHING_PASSES,
            vortex_support_fraction: DEFAULT_BEAM_SUPPORT_FRACTION,
        }
    }
}

/// One sent state. Phases are given in degrees in the file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum StateEntry {
    Superposition {
        ell: u32,
        theta_deg: f64,
        #[serde(default = "half")]
        weight: f64,
    },
    Pure {
        ell: i32,
    },
}

fn half() -> f64 {
    0.5
}

impl StateEntry {
    pub fn emitted(&self) -> Result<EmittedState> {
        Ok(match *self {
            StateEntry::Superposition { ell, theta_deg, weight } => {
                EmittedState::Superposition(SuperpositionSpec::new(ell, theta_deg.to_radians(), weight)?)
            }
            StateEntry::Pure { ell } => EmittedState::Pure { ell },
        })
    }

    pub fn ell_magnitude(&self) -> u32 {
        match *self {
            StateEntry::Superposition { ell, .. } => ell,
            StateEntry::Pure { ell } => ell.unsigned_abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub frames_per_state: usize,
    pub output_dir: PathBuf,
    pub write_frames: bool,
    /// Transmitter waist, meters.
    pub waist: f64,
    pub receiver_loss_db: f64,
    /// Replaces the derived mean detected photons per frame when set.
    pub expected_photons: Option<f64>,
    pub source: SourceSection,
    pub grid: GridSection,
    pub channel: ChannelSection,
    pub detector: DetectorSection,
    pub analysis: AnalysisSection,
    pub states: Vec<StateEntry>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 1,
            frames_per_state: DEFAULT_FRAMES_PER_STATE,
            output_dir: PathBuf::from("oamsim-out"),
            write_frames: true,
            waist: DEFAULT_WAIST,
            receiver_loss_db: DEFAULT_RECEIVER_LOSS_DB,
            expected_photons: None,
            source: SourceSection::default(),
            grid: GridSection::default(),
            channel: ChannelSection::default(),
            detector: DetectorSection::default(),
            analysis: AnalysisSection::default(),
            states: (0..8)
                .map(|k| StateEntry::Superposition {
                    ell: 1,
                    theta_deg: k as f64 * 45.0,
                    weight: 0.5,
                })
                .collect(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// `k·360°/count` superposition states of order `ell`.
    pub fn with_equally_spaced_states(mut self, ell: u32, count: usize) -> Self {
        self.states = (0..count)
            .map(|k| StateEntry::Superposition {
                ell,
                theta_deg: k as f64 * 360.0 / count as f64,
                weight: 0.5,
            })
            .collect();
        self
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.n, self.grid.extent)
    }

    pub fn source_spec(&self, state: &StateEntry) -> Result<SourceSpec> {
        let spec = SourceSpec {
            power: self.source.power,
            wavelength: self.source.wavelength,
            slot: self.source.slot,
            state: state.emitted()?,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Channel with its screen seed derived from the master seed.
    pub fn channel_spec(&self) -> ChannelSpec {
        ChannelSpec {
            length: self.channel.length,
            extinction: self.channel.extinction,
            wavelength: self.source.wavelength,
            turbulence: TurbulenceSpec {
                cn2: self.channel.cn2,
                outer_scale: self.channel.outer_scale,
                inner_scale: self.channel.inner_scale,
                screen_count: self.channel.screen_count,
                seed: seed::derive(self.master_seed, seed::CHANNEL),
            },
            tilt_rms: self.channel.tilt_rms,
        }
    }

    /// Detector for one sent state; its noise seed is `derive(derive(master, state), DETECTOR)`.
    pub fn detector_spec(&self, state_index: usize) -> DetectorSpec {
        let pitch = self.detector.pitch.unwrap_or(self.grid.extent / self.grid.n.max(1) as f64);
        DetectorSpec {
            pixels: self.detector.pixels.unwrap_or(self.grid.n),
            pitch,
            exposure: self.detector.exposure,
            qe: self.detector.qe,
            background: self.detector.background,
            seed: seed::derive(seed::derive(self.master_seed, state_index as u64), seed::DETECTOR),
        }
    }

    pub fn segment_options(&self) -> SegmentOptions {
        SegmentOptions {
            threshold_fraction: self.analysis.threshold_fraction,
            smoothing_passes: self.analysis.smoothing_passes,
        }
    }

    /// Mean photons reaching the sensor per frame:
    /// `rate · exp(−cL) · 10^(−receiver_loss/10) · exposure`, unless overridden.
    pub fn expected_photons(&self) -> f64 {
        if let Some(n) = self.expected_photons {
            return n;
        }
        let rate = self.source.power / source::photon_energy(self.source.wavelength);
        rate * channel::transmittance(self.channel.extinction, self.channel.length)
            * 10f64.powf(-self.receiver_loss_db / 10.0)
            * self.detector.exposure
    }

    /// Checks every section and returns all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut check = |label: &str, r: std::result::Result<(), String>| {
            if let Err(e) = r {
                problems.push(format!("{label}: {e}"));
            }
        };
        let msg = |r: Result<()>| r.map_err(|e| e.to_string());
        if self.master_seed > i64::MAX as u64 {
            check("master_seed", Err(format!("must be <= {} to round-trip through TOML", i64::MAX)));
        }
        if self.frames_per_state < 1 {
            check("frames_per_state", Err("must be >= 1".into()));
        }
        if self.states.is_empty() {
            check("states", Err("at least one state is required".into()));
        }
        if !(self.waist > 0.0 && self.waist.is_finite()) {
            check("waist", Err(format!("must be > 0, got {}", self.waist)));
        }
        if !(self.receiver_loss_db >= 0.0 && self.receiver_loss_db.is_finite()) {
            check("receiver_loss_db", Err("must be >= 0".into()));
        }
        if let Some(n) = self.expected_photons {
            if !(n >= 0.0 && n.is_finite()) {
                check("expected_photons", Err(format!("must be >= 0, got {n}")));
            }
        }
        let th = self.analysis.threshold_fraction;
        if !(th > 0.0 && th < 1.0) {
            check("analysis.threshold_fraction", Err("must lie in (0, 1)".into()));
        }
        let grid = self.grid_spec();
        check("grid", grid.as_ref().map(|_| ()).map_err(|e| e.to_string()));
        check("channel", msg(self.channel_spec().validate()));
        check("detector", msg(self.detector_spec(0).validate()));
        for (i, state) in self.states.iter().enumerate() {
            let label = format!("states[{i}]");
            let src = self.source_spec(state);
            check(&label, src.as_ref().map(|_| ()).map_err(|e| e.to_string()));
            if let (Ok(grid), Ok(src)) = (&grid, &src) {
                let ell = state.ell_magnitude() as i32;
                match LGModeSpec::new(ell, 0, self.waist, src.wavelength) {
                    Ok(mode) => {
                        check(&label, msg(modes::check_sampling(&mode, grid, 0.0)));
                        check(&label, msg(modes::check_sampling(&mode, grid, self.channel.length)));
                    }
                    Err(e) => check(&label, Err(e.to_string())),
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}
