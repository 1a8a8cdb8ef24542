//! Canned recipes, one per reported statistic of the reference experiment.
//!
//! Each recipe runs a fixed configuration and compares what it measures with
//! the reference figure. The reference field results come from real seawater
//! and a real camera, so the turbulence-dependent recipes are calibrated
//! stand-ins rather than reproductions; their `basis` says so.

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use serde::Serialize;

use super::config::{ExperimentConfig, StateEntry};
use super::pipeline::{crosstalk_by_order, summarize, FrameOutcome, Session};
use crate::analysis::crosstalk::orthogonal_pairs;
use crate::analysis::petals::{orientation, orientation_error, segment_petals_with};
use crate::analysis::tiptilt::tilt_angle;
use crate::analysis::{find_vortices_field, track_cores, CrosstalkMatrix, VortexCore};
use crate::channel::{
    calibrated_tilt_rms, channel_loss_db, transmit, transmittance, ChannelSpec, TurbulenceSpec, CALIBRATED_CN2,
    OBSERVED_RADIAL_WANDER, TURBULENCE_WANDER_RMS,
};
use crate::detector::render_mean;
use crate::error::{Error, Result};
use crate::modes::{expected_orientation, lg_field, GridSpec, LGModeSpec};
use crate::source::{photon_budget, EmittedState, SourceSpec};

/// Frames per state for the cross-talk recipes.
pub const CROSSTALK_FRAMES: usize = 100;
/// 27 s of 30 ms frames.
pub const SERIES_FRAMES: usize = 900;
pub const VORTEX_REALIZATIONS: usize = 100;
/// Third-order run photon count; the reference third-order series used a
/// brighter source than the first-order one.
pub const HIGH_FLUX_PHOTONS: f64 = 15_000.0;
/// Weak-turbulence strength for the vortex recipe.
pub const WEAK_CN2: f64 = CALIBRATED_CN2 / 10.0;
/// Vortex search radius in units of the received Gaussian width `w(L)`.
pub const VORTEX_APERTURE_WIDTHS: f64 = 1.0;
/// Photons per frame for spot tracking, enough that shot noise on the
/// centroid is far below the wander being measured.
pub const TRACKING_PHOTONS: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    Info,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Info => "INFO",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub value: f64,
    /// Reference value or acceptance band, as text.
    pub target: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub name: &'static str,
    /// `derived` for closed-form arithmetic, `stand-in` for calibrated simulations.
    pub basis: &'static str,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Report {
    fn new(name: &'static str, basis: &'static str) -> Self {
        Report {
            name,
            basis,
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, label: &str, value: f64, target: impl Into<String>, ok: bool) {
        self.push(label, value, target, if ok { Verdict::Pass } else { Verdict::Fail });
    }

    fn info(&mut self, label: &str, value: f64, target: impl Into<String>) {
        self.push(label, value, target, Verdict::Info);
    }

    fn push(&mut self, label: &str, value: f64, target: impl Into<String>, verdict: Verdict) {
        self.checks.push(Check {
            label: label.to_string(),
            value,
            target: target.into(),
            verdict,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.verdict != Verdict::Fail)
    }

    pub fn value(&self, label: &str) -> Option<f64> {
        self.checks.iter().find(|c| c.label == label).map(|c| c.value)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} ({})", self.name, self.basis)?;
        for c in &self.checks {
            writeln!(f, "  [{}] {:<34} {:>14.6}   target {}", c.verdict, c.label, c.value, c.target)?;
        }
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        Ok(())
    }
}

pub struct Recipe {
    pub name: &'static str,
    pub summary: &'static str,
    pub run: fn() -> Result<Report>,
}

pub const REGISTRY: &[Recipe] = &[
    Recipe {
        name: "loss_budget",
        summary: "Beer-law channel loss vs the quoted ~40 dB system loss",
        run: loss_budget,
    },
    Recipe {
        name: "photon_rate",
        summary: "0.508 photons per second vs per nanosecond readings of the source power",
        run: photon_rate,
    },
    Recipe {
        name: "angle_deviation",
        summary: "noiseless orientation round trip and mean deviation under calibrated noise",
        run: angle_deviation,
    },
    Recipe {
        name: "crosstalk",
        summary: "8-state first-order cross-talk matrix, noiseless and calibrated",
        run: crosstalk,
    },
    Recipe {
        name: "orthogonal_pairs",
        summary: "leakage between mutually orthogonal (Δθ = π) states",
        run: orthogonal,
    },
    Recipe {
        name: "fidelity_fluctuation_l1",
        summary: "900-frame first-order fidelity spread",
        run: fidelity_l1,
    },
    Recipe {
        name: "fidelity_fluctuation_l3",
        summary: "900-frame third-order fidelity spread",
        run: fidelity_l3,
    },
    Recipe {
        name: "vortex_conservation",
        summary: "third-order vortex splitting, total charge, and core stability",
        run: vortex_conservation,
    },
    Recipe {
        name: "tip_tilt",
        summary: "pointing angle from the 0.64 mm spot wander",
        run: tip_tilt_recipe,
    },
    Recipe {
        name: "calibrate_cn2",
        summary: "scan of turbulence strength against the first-order fidelity band",
        run: calibrate_cn2,
    },
];

pub fn names() -> Vec<&'static str> {
    REGISTRY.iter().map(|r| r.name).collect()
}

pub fn reproduce(name: &str) -> Result<Report> {
    match REGISTRY.iter().find(|r| r.name == name) {
        Some(r) => (r.run)(),
        None => Err(Error::UnknownStatistic {
            name: name.to_string(),
            known: names().join(", "),
        }),
    }
}

fn loss_budget() -> Result<Report> {
    let mut r = Report::new("loss_budget", "derived");
    let db = channel_loss_db(0.16, 55.0);
    r.check("channel_loss_db", db, "38.2 ± 0.05 dB", (db - 38.2).abs() <= 0.05);
    r.info("residual_to_system_db", 40.0 - db, "about 40 dB overall");
    r.info("transmittance", transmittance(0.16, 55.0), "exp(-8.8)");
    r.notes
        .push("the ~1.8 dB residual is attributed to receiver optics and is the default receiver_loss_db".into());
    Ok(r)
}

fn photon_rate() -> Result<Report> {
    let mut r = Report::new("photon_rate", "derived");
    let low = SourceSpec::new(1.898e-19, EmittedState::Pure { ell: 1 })?;
    let per_second = photon_budget(&low).rate;
    r.check("rate_at_1.898e-19_W_per_s", per_second, "0.508 ± 0.005", (per_second - 0.508).abs() <= 0.005);
    let high = SourceSpec::new(1.898e-10, EmittedState::Pure { ell: 1 })?;
    let per_ns = photon_budget(&high).mean_per_slot;
    r.check("per_ns_at_1.898e-10_W", per_ns, "0.508 ± 0.005", (per_ns - 0.508).abs() <= 0.005);
    r.info("power_ratio", high.power / low.power, "1e9 between the two readings");
    r.notes.push(
        "the quoted power yields 0.508 photons per second, not per nanosecond; the default source uses 1.898e-10 W".into(),
    );
    Ok(r)
}

/// Sent state rendered without noise after diffraction and extinction only.
pub fn noiseless_orientation_error(ell: u32, theta: f64) -> Result<f64> {
    let mut cfg = ExperimentConfig::default();
    cfg.channel.cn2 = 0.0;
    cfg.channel.tilt_rms = 0.0;
    cfg.states = vec![StateEntry::Superposition {
        ell,
        theta_deg: theta.to_degrees(),
        weight: 0.5,
    }];
    let session = Session::new(&cfg)?;
    let field = session.received(0, 0)?;
    let frame = render_mean(&field, &session.detector(0), 1e6, 0)?;
    let petals = segment_petals_with(&frame, ell, &cfg.segment_options())
        .map_err(|e| Error::invalid(format!("noiseless frame: {e}")))?;
    let found = orientation(&petals);
    Ok(orientation_error(expected_orientation(theta, ell), found.angle, ell).to_degrees())
}

fn calibrated_config(ell: u32, states: usize, frames: usize) -> ExperimentConfig {
    ExperimentConfig {
        frames_per_state: frames,
        write_frames: false,
        ..Default::default()
    }
    .with_equally_spaced_states(ell, states)
}

fn run_all(cfg: &ExperimentConfig) -> Result<Vec<Vec<FrameOutcome>>> {
    let session = Session::new(cfg)?;
    (0..cfg.states.len())
        .map(|s| session.run_state(s, cfg.frames_per_state))
        .collect()
}

struct CrosstalkRun {
    matrix: CrosstalkMatrix,
    mean_deviation_deg: f64,
}

/// The calibrated 8-state run is shared by three recipes.
fn calibrated_crosstalk() -> Result<&'static CrosstalkRun> {
    static RUN: OnceLock<CrosstalkRun> = OnceLock::new();
    if let Some(run) = RUN.get() {
        return Ok(run);
    }
    let cfg = calibrated_config(1, 8, CROSSTALK_FRAMES);
    let outcomes = run_all(&cfg)?;
    let matrix = crosstalk_by_order(&cfg.states, &outcomes)
        .remove(&1)
        .expect("first-order states present");
    let deviations: Vec<f64> = outcomes
        .iter()
        .flatten()
        .filter_map(|o| o.fidelity.as_ref()?.deviation_deg)
        .collect();
    let mean_deviation_deg = deviations.iter().sum::<f64>() / deviations.len().max(1) as f64;
    Ok(RUN.get_or_init(|| CrosstalkRun {
        matrix,
        mean_deviation_deg,
    }))
}

fn angle_deviation() -> Result<Report> {
    let mut r = Report::new("angle_deviation", "stand-in");
    let mut worst: f64 = 0.0;
    for ell in 1..=3 {
        for k in 0..16 {
            worst = worst.max(noiseless_orientation_error(ell, k as f64 * PI / 8.0)?);
        }
    }
    r.check("noiseless_max_error_deg", worst, "< 1°", worst < 1.0);
    let dev = calibrated_crosstalk()?.mean_deviation_deg;
    r.push(
        "calibrated_mean_deviation_deg",
        dev,
        "reference 7.2°, band [2.4°, 11.0°]",
        if (2.4..=11.0).contains(&dev) { Verdict::Info } else { Verdict::Fail },
    );
    r.notes.push("the reference turbulence is uncharacterized; the deviation band is informational".into());
    Ok(r)
}

/// Cross-talk of 8 equally spaced first-order states rendered without noise.
pub fn noiseless_crosstalk() -> Result<CrosstalkMatrix> {
    let mut cfg = calibrated_config(1, 8, 1);
    cfg.channel.cn2 = 0.0;
    cfg.channel.tilt_rms = 0.0;
    let session = Session::new(&cfg)?;
    let outcomes = (0..cfg.states.len())
        .map(|s| {
            let frame = render_mean(&session.received(s, 0)?, &session.detector(s), 1e6, 0)?;
            Ok(vec![session.analyze(s, &frame)?])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(crosstalk_by_order(&cfg.states, &outcomes).remove(&1).expect("first-order states present"))
}

fn next_neighbour_mean(m: &CrosstalkMatrix) -> f64 {
    let k = m.sent_phases.len();
    let sum: f64 = (0..k)
        .map(|i| 0.5 * (m.values[i][(i + 1) % k] + m.values[i][(i + k - 1) % k]))
        .sum();
    sum / k as f64
}

fn crosstalk() -> Result<Report> {
    let mut r = Report::new("crosstalk", "stand-in");
    let clean = noiseless_crosstalk()?;
    let clean_diag = clean.diagonal().into_iter().fold(f64::INFINITY, f64::min);
    r.check("noiseless_min_diagonal", clean_diag, "> 0.999", clean_diag > 0.999);
    let clean_orth = orthogonal_pairs(&clean.sent_phases)
        .into_iter()
        .map(|(i, j)| clean.values[i][j])
        .fold(0.0, f64::max);
    r.check("noiseless_max_orthogonal", clean_orth, "< 1e-3", clean_orth < 1e-3);

    let run = calibrated_crosstalk()?;
    let diag = run.matrix.diagonal().into_iter().fold(f64::INFINITY, f64::min);
    r.check("calibrated_min_diagonal", diag, ">= 0.96 (all over 96%)", diag >= 0.96);
    let nn = next_neighbour_mean(&run.matrix);
    let expected = (PI / 8.0).cos().powi(2);
    r.check("calibrated_next_neighbour", nn, "0.854 ± 0.05", (nn - expected).abs() <= 0.05);
    let monotone = run.matrix.falls_off_monotonically(1e-9);
    r.check("monotone_falloff", monotone as u8 as f64, "1 (true)", monotone);
    Ok(r)
}

fn orthogonal() -> Result<Report> {
    let mut r = Report::new("orthogonal_pairs", "stand-in");
    let m = &calibrated_crosstalk()?.matrix;
    let worst = orthogonal_pairs(&m.sent_phases)
        .into_iter()
        .map(|(i, j)| m.values[i][j])
        .fold(0.0, f64::max);
    r.check("calibrated_max_orthogonal", worst, "< 0.04", worst < 0.04);
    Ok(r)
}

/// Fidelity standard deviation of one calibrated series at `θ = 0`.
pub fn fidelity_spread(ell: u32, frames: usize, photons: Option<f64>, cn2: f64) -> Result<(f64, f64)> {
    let mut cfg = calibrated_config(ell, 1, frames);
    cfg.expected_photons = photons;
    cfg.channel.cn2 = cn2;
    let outcomes = run_all(&cfg)?;
    let res = summarize(&outcomes[0], cfg.channel.length);
    let stats = res.fidelity.ok_or(Error::NoDetections { failed: res.failures })?;
    Ok((stats.std, stats.mean))
}

fn fidelity_l1() -> Result<Report> {
    let mut r = Report::new("fidelity_fluctuation_l1", "stand-in");
    let (std, mean) = fidelity_spread(1, SERIES_FRAMES, None, CALIBRATED_CN2)?;
    r.check("fidelity_std", std, "[0.005, 0.028]", (0.005..=0.028).contains(&std));
    r.info("fidelity_mean", mean, "-");
    Ok(r)
}

fn fidelity_l3() -> Result<Report> {
    let mut r = Report::new("fidelity_fluctuation_l3", "stand-in");
    let (std, mean) = fidelity_spread(3, SERIES_FRAMES, Some(HIGH_FLUX_PHOTONS), CALIBRATED_CN2)?;
    r.check("fidelity_std", std, "< 0.011 (less than 1.1%)", std < 0.011);
    r.info("fidelity_mean", mean, "-");
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VortexStats {
    pub realizations: usize,
    pub three_unit_cores: usize,
    pub total_charge_three: usize,
    pub pair_distance_std_px: f64,
    pub centroid_wander_px: f64,
}

/// Third-order vortex statistics over independent weak-turbulence realizations.
pub fn vortex_stats(realizations: usize, cn2: f64) -> Result<VortexStats> {
    let cfg = ExperimentConfig::default();
    let grid: GridSpec = cfg.grid_spec()?;
    let mode = LGModeSpec::new(3, 0, cfg.waist, cfg.source.wavelength)?;
    let sent = lg_field(&mode, &grid, 0.0)?;
    let ch = ChannelSpec {
        turbulence: TurbulenceSpec { cn2, ..cfg.channel_spec().turbulence },
        ..cfg.channel_spec()
    };
    let aperture = VORTEX_APERTURE_WIDTHS * mode.width_at(cfg.channel.length);
    let per_realization: Vec<Vec<VortexCore>> = (0..realizations)
        .map(|i| {
            let received = transmit(&sent, &ch, i as u64)?;
            Ok(find_vortices_field(&received, aperture)
                .into_iter()
                .map(|c| VortexCore { frame_index: i, ..c })
                .collect())
        })
        .collect::<Result<_>>()?;
    let is_three = |c: &Vec<VortexCore>| c.len() == 3 && c.iter().all(|v| v.charge == 1);
    let tracks = track_cores(&per_realization.iter().filter(|c| is_three(c)).cloned().collect::<Vec<_>>());
    let pair_stats = tracks.pair_distance_stats();
    let pair_std = pair_stats.iter().map(|(_, s)| s.std).sum::<f64>() / pair_stats.len().max(1) as f64;
    Ok(VortexStats {
        realizations,
        three_unit_cores: per_realization.iter().filter(|c| is_three(c)).count(),
        total_charge_three: per_realization
            .iter()
            .filter(|c| c.iter().map(|v| v.charge).sum::<i32>() == 3)
            .count(),
        pair_distance_std_px: pair_std,
        centroid_wander_px: tracks.centroid_wander_rms(),
    })
}

fn vortex_conservation() -> Result<Report> {
    let mut r = Report::new("vortex_conservation", "stand-in");
    let s = vortex_stats(VORTEX_REALIZATIONS, WEAK_CN2)?;
    let n = s.realizations as f64;
    let three = s.three_unit_cores as f64 / n;
    r.check("fraction_three_unit_cores", three, ">= 0.95", three >= 0.95);
    let total = s.total_charge_three as f64 / n;
    r.check("fraction_total_charge_3", total, "1.0", s.total_charge_three == s.realizations);
    r.check(
        "pair_distance_std_px",
        s.pair_distance_std_px,
        format!("< centroid wander {:.3} px", s.centroid_wander_px),
        s.pair_distance_std_px < s.centroid_wander_px,
    );
    r.info("centroid_wander_px", s.centroid_wander_px, "-");
    Ok(r)
}

/// Spot-centroid wander over calibrated frames of a first-order beam:
/// `(mean radial, RMS radial)` in meters. `tilt_rms` replaces the calibrated
/// pointing jitter when given.
pub fn simulated_wander(frames: usize, tilt_rms: Option<f64>) -> Result<(f64, f64)> {
    let mut cfg = ExperimentConfig {
        frames_per_state: frames,
        write_frames: false,
        expected_photons: Some(TRACKING_PHOTONS),
        ..Default::default()
    };
    if let Some(t) = tilt_rms {
        cfg.channel.tilt_rms = t;
    }
    cfg.states = vec![StateEntry::Pure { ell: 1 }];
    let outcomes = run_all(&cfg)?;
    summarize(&outcomes[0], cfg.channel.length)
        .tip_tilt
        .map(|t| (t.mean_radial, t.radial_rms))
        .ok_or(Error::NoDetections { failed: frames })
}

fn tip_tilt_recipe() -> Result<Report> {
    let mut r = Report::new("tip_tilt", "stand-in");
    let urad = tilt_angle(OBSERVED_RADIAL_WANDER, 55.0) * 1e6;
    r.check("tilt_from_0.64mm_urad", urad, "11.64 ± 0.01", (urad - 11.64).abs() <= 0.01);
    r.info(
        "calibrated_tilt_rms_urad",
        calibrated_tilt_rms() * 1e6,
        "per axis, net of turbulence wander",
    );
    let (wander, _) = simulated_wander(SERIES_FRAMES, None)?;
    let rel = (wander - OBSERVED_RADIAL_WANDER).abs() / OBSERVED_RADIAL_WANDER;
    r.check("recovered_mean_radial_mm", wander * 1e3, "0.64 ± 5%", rel <= 0.05);
    Ok(r)
}

/// Turbulence strengths tried by `calibrate_cn2`.
pub const CN2_SCAN: [f64; 5] = [5e-14, 1e-13, 2e-13, 3e-13, 5e-13];

fn calibrate_cn2() -> Result<Report> {
    let mut r = Report::new("calibrate_cn2", "stand-in");
    for cn2 in CN2_SCAN {
        let (std, _) = fidelity_spread(1, 300, None, cn2)?;
        let label = format!("l1_std_at_{cn2:e}");
        if cn2 == CALIBRATED_CN2 {
            r.check(&label, std, "[0.005, 0.028] (frozen value)", (0.005..=0.028).contains(&std));
        } else {
            r.info(&label, std, "[0.005, 0.028]");
        }
    }
    let (_, rms) = simulated_wander(SERIES_FRAMES, Some(0.0))?;
    let per_axis = rms / 2f64.sqrt();
    r.check(
        "turbulence_wander_per_axis_mm",
        per_axis * 1e3,
        format!("frozen {:.3} mm ± 10%", TURBULENCE_WANDER_RMS * 1e3),
        (per_axis - TURBULENCE_WANDER_RMS).abs() <= 0.1 * TURBULENCE_WANDER_RMS,
    );
    r.notes.push(format!("frozen cn2 = {CALIBRATED_CN2:e} m^-2/3"));
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::SuperpositionSpec;

    #[test]
    fn unknown_name_lists_registry() {
        match reproduce("nope") {
            Err(Error::UnknownStatistic { known, .. }) => {
                for n in names() {
                    assert!(known.contains(n));
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn closed_form_recipes_pass() {
        for name in ["loss_budget", "photon_rate"] {
            let r = reproduce(name).unwrap();
            assert!(r.passed(), "{r}");
        }
        assert!((reproduce("loss_budget").unwrap().value("channel_loss_db").unwrap() - 38.22).abs() < 0.01);
    }

    #[test]
    fn noiseless_first_order_round_trip() {
        assert!(noiseless_orientation_error(1, PI / 4.0).unwrap() < 1.0);
    }

    #[test]
    fn sent_superposition_orientation_matches() {
        let s = SuperpositionSpec::balanced(2, PI).unwrap();
        assert!((s.orientation() - expected_orientation(PI, 2)).abs() < 1e-12);
    }
}
