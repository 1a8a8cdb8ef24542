//! End-to-end runs: emit → transmit → capture → analyze, then aggregate into
//! PGM frames, CSV tables, and a manifest.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, StateEntry};
use super::manifest::{self, FailureRecord, RunManifest, RunInfo, SeedLedger, StateSummary};
use crate::analysis::fidelity::{analyze_frame, FrameFidelity};
use crate::analysis::vortex::find_vortices_frame_with;
use crate::analysis::{
    crosstalk_averaged, fidelity_series, frame_centroid, tip_tilt, track_cores, CrosstalkMatrix, FidelitySeries,
    SegmentOptions, SeriesStats, TipTilt, TrackSet, VortexCore,
};
use crate::channel::{transmit, ChannelSpec};
use crate::detector::{capture_frame, DetectorSpec, Frame, DEFAULT_EXPOSURE};
use crate::error::{Error, Result};
use crate::modes::{ComplexField, GridSpec};
use crate::seed;
use crate::source::{emit, EmittedState};

/// Everything measured on one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub state_index: usize,
    pub frame_index: usize,
    pub timestamp: f64,
    /// Superposition states only.
    pub fidelity: Option<FrameFidelity>,
    /// Dark cores; pure states only.
    pub cores: Vec<VortexCore>,
    /// Spot position, meters.
    pub centroid: Option<(f64, f64)>,
}

impl FrameOutcome {
    pub fn failure(&self) -> Option<&'static str> {
        if self.centroid.is_none() {
            return Some("empty frame");
        }
        match &self.fidelity {
            Some(f) if f.orientation.is_none() => Some("petal segmentation failed"),
            _ => None,
        }
    }
}

/// A validated configuration with its derived grid, channel, and photon budget.
#[derive(Debug, Clone)]
pub struct Session {
    pub config: ExperimentConfig,
    pub grid: GridSpec,
    pub channel: ChannelSpec,
    pub expected_photons: f64,
    pub segment: SegmentOptions,
    emitted: Vec<ComplexField>,
}

impl Session {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.grid_spec()?;
        let emitted = config
            .states
            .iter()
            .map(|s| emit(&config.source_spec(s)?, &grid, config.waist))
            .collect::<Result<Vec<_>>>()?;
        Ok(Session {
            config: config.clone(),
            grid,
            channel: config.channel_spec(),
            expected_photons: config.expected_photons(),
            segment: config.segment_options(),
            emitted,
        })
    }

    pub fn emitted(&self, state_index: usize) -> &ComplexField {
        &self.emitted[state_index]
    }

    pub fn detector(&self, state_index: usize) -> DetectorSpec {
        self.config.detector_spec(state_index)
    }

    /// Channel realization for `(state, frame)`, seeded by
    /// `derive(frame_seed(master, state, frame), CHANNEL)`.
    pub fn received(&self, state_index: usize, frame_index: usize) -> Result<ComplexField> {
        let fs = seed::frame_seed(self.config.master_seed, state_index, frame_index);
        transmit(&self.emitted[state_index], &self.channel, seed::derive(fs, seed::CHANNEL))
    }

    pub fn frame(&self, state_index: usize, frame_index: usize) -> Result<Frame> {
        let field = self.received(state_index, frame_index)?;
        capture_frame(&field, &self.detector(state_index), self.expected_photons, frame_index)
    }

    pub fn analyze(&self, state_index: usize, frame: &Frame) -> Result<FrameOutcome> {
        let state = &self.config.states[state_index];
        let (fidelity, cores) = match state.emitted()? {
            EmittedState::Superposition(spec) => (Some(analyze_frame(frame, &spec, &self.segment)), Vec::new()),
            EmittedState::Pure { .. } => (
                None,
                find_vortices_frame_with(
                    frame,
                    self.config.analysis.vortex_support_fraction,
                    self.config.analysis.smoothing_passes,
                ),
            ),
        };
        Ok(FrameOutcome {
            state_index,
            frame_index: frame.index,
            timestamp: frame.timestamp,
            fidelity,
            cores,
            centroid: frame_centroid(frame, self.detector(state_index).pitch),
        })
    }

    /// Renders and analyzes frames `0..n_frames` of one state in parallel,
    /// without touching the filesystem.
    pub fn run_state(&self, state_index: usize, n_frames: usize) -> Result<Vec<FrameOutcome>> {
        (0..n_frames)
            .into_par_iter()
            .map(|f| self.analyze(state_index, &self.frame(state_index, f)?))
            .collect()
    }
}

/// Aggregates of one state's frames.
#[derive(Debug, Clone, PartialEq)]
pub struct StateResult {
    pub fidelity: Option<SeriesStats>,
    pub deviation_deg: Option<SeriesStats>,
    pub tracks: Option<TrackSet>,
    pub tip_tilt: Option<TipTilt>,
    pub failures: usize,
}

pub fn summarize(outcomes: &[FrameOutcome], length: f64) -> StateResult {
    let fidelities: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.fidelity.as_ref()?.fidelity)
        .collect();
    let deviations: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.fidelity.as_ref()?.deviation_deg)
        .collect();
    let is_pure = outcomes.iter().all(|o| o.fidelity.is_none());
    let tracks = is_pure.then(|| track_cores(&outcomes.iter().map(|o| o.cores.clone()).collect::<Vec<_>>()));
    let positions: Vec<(f64, f64)> = outcomes.iter().filter_map(|o| o.centroid).collect();
    StateResult {
        fidelity: SeriesStats::from_values(&fidelities),
        deviation_deg: SeriesStats::from_values(&deviations),
        tracks,
        tip_tilt: tip_tilt(&positions, length).ok(),
        failures: outcomes.iter().filter(|o| o.failure().is_some()).count(),
    }
}

/// Cross-talk matrices of all superposition states, one per order `ℓ`.
pub fn crosstalk_by_order(states: &[StateEntry], outcomes: &[Vec<FrameOutcome>]) -> BTreeMap<u32, CrosstalkMatrix> {
    let mut groups: BTreeMap<u32, (Vec<f64>, Vec<Vec<_>>)> = BTreeMap::new();
    for (state, frames) in states.iter().zip(outcomes) {
        if let StateEntry::Superposition { ell, theta_deg, .. } = *state {
            let entry = groups.entry(ell).or_default();
            entry.0.push(theta_deg.to_radians().rem_euclid(TAU));
            entry.1.push(
                frames
                    .iter()
                    .filter_map(|o| o.fidelity.as_ref()?.orientation)
                    .collect(),
            );
        }
    }
    groups
        .into_iter()
        .map(|(ell, (sent, received))| (ell, crosstalk_averaged(&sent, &received)))
        .collect()
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_orientation_table(path: &Path, states: &[StateEntry], outcomes: &[Vec<FrameOutcome>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "state", "ell", "sent_theta_deg", "frame", "timestamp", "angle_deg", "theta_deg", "quality",
        "low_confidence", "fidelity", "deviation_deg",
    ])?;
    for (state, frames) in states.iter().zip(outcomes) {
        let StateEntry::Superposition { ell, theta_deg, .. } = *state else {
            continue;
        };
        for o in frames {
            let Some(f) = &o.fidelity else { continue };
            let orient = f.orientation;
            w.write_record([
                o.state_index.to_string(),
                ell.to_string(),
                fmt(theta_deg),
                o.frame_index.to_string(),
                fmt(o.timestamp),
                opt(orient.map(|r| r.angle.to_degrees())),
                opt(orient.map(|r| r.theta.to_degrees())),
                opt(orient.map(|r| r.quality)),
                orient.map(|r| r.low_confidence.to_string()).unwrap_or_default(),
                opt(f.fidelity),
                opt(f.deviation_deg),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_crosstalk(path: &Path, m: &CrosstalkMatrix) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["received_theta_deg".to_string()];
    header.extend(m.sent_phases.iter().map(|p| format!("sent_{:.3}", p.to_degrees())));
    w.write_record(&header)?;
    for (row, phase) in m.values.iter().zip(&m.received_phases) {
        let mut rec = vec![fmt(phase.to_degrees())];
        rec.extend(row.iter().map(|&v| fmt(v)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_trajectories(path: &Path, tracks: &[(usize, &TrackSet)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["state", "frame", "core_id", "x", "y"])?;
    for (state, set) in tracks {
        let mut rows: Vec<_> = set
            .trajectories
            .iter()
            .flat_map(|t| t.points.iter().map(move |p| (p.frame_index, t.id, p.x, p.y)))
            .collect();
        rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for (frame, id, x, y) in rows {
            w.write_record([state.to_string(), frame.to_string(), id.to_string(), fmt(x), fmt(y)])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_tip_tilt(path: &Path, results: &[StateResult]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "state", "frames", "theta_x_rms_urad", "theta_y_rms_urad", "radial_rms_mm", "mean_radial_mm",
    ])?;
    for (i, r) in results.iter().enumerate() {
        let Some(t) = &r.tip_tilt else { continue };
        w.write_record([
            i.to_string(),
            t.theta_x.len().to_string(),
            fmt(t.theta_x_rms * 1e6),
            fmt(t.theta_y_rms * 1e6),
            fmt(t.radial_rms * 1e3),
            fmt(t.mean_radial * 1e3),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Runs every sent state, writes outputs under `config.output_dir`, and
/// returns the manifest (also written as `manifest.toml`).
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunManifest> {
    let started = Instant::now();
    let session = Session::new(config)?;
    let out = &config.output_dir;
    let frames_dir = out.join("frames");
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;

    let pairs: Vec<(usize, usize)> = (0..config.states.len())
        .flat_map(|s| (0..config.frames_per_state).map(move |f| (s, f)))
        .collect();
    let flat: Vec<FrameOutcome> = pairs
        .par_iter()
        .map(|&(s, f)| {
            let frame = session.frame(s, f)?;
            if config.write_frames {
                frame.write_pgm(&frames_dir.join(format!("s{s:02}_f{f:05}.pgm")))?;
            }
            session.analyze(s, &frame)
        })
        .collect::<Result<_>>()?;
    let mut outcomes: Vec<Vec<FrameOutcome>> = vec![Vec::new(); config.states.len()];
    for o in flat {
        outcomes[o.state_index].push(o);
    }

    let results: Vec<StateResult> = outcomes.iter().map(|o| summarize(o, config.channel.length)).collect();
    let mut written: Vec<PathBuf> = Vec::new();

    let orientation_path = out.join("orientation.csv");
    write_orientation_table(&orientation_path, &config.states, &outcomes)?;
    written.push(orientation_path);
    for (ell, m) in crosstalk_by_order(&config.states, &outcomes) {
        let path = out.join(format!("crosstalk_l{ell}.csv"));
        write_crosstalk(&path, &m)?;
        written.push(path);
    }
    let tracks: Vec<(usize, &TrackSet)> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.tracks.as_ref().map(|t| (i, t)))
        .collect();
    let traj_path = out.join("trajectories.csv");
    write_trajectories(&traj_path, &tracks)?;
    written.push(traj_path);
    let tt_path = out.join("tiptilt.csv");
    write_tip_tilt(&tt_path, &results)?;
    written.push(tt_path);
    if config.write_frames {
        for &(s, f) in &pairs {
            written.push(frames_dir.join(format!("s{s:02}_f{f:05}.pgm")));
        }
    }

    let failures: Vec<FailureRecord> = outcomes
        .iter()
        .flatten()
        .filter_map(|o| {
            o.failure().map(|reason| FailureRecord {
                state: o.state_index,
                frame: o.frame_index,
                reason: reason.to_string(),
            })
        })
        .collect();
    for f in &failures {
        log::warn!("state {} frame {}: {}", f.state, f.frame, f.reason);
    }
    let states = config
        .states
        .iter()
        .zip(&results)
        .enumerate()
        .map(|(i, (s, r))| StateSummary::new(i, s, r, config.frames_per_state))
        .collect();
    let manifest = RunManifest {
        run: RunInfo {
            version: env!("CARGO_PKG_VERSION").to_string(),
            format: manifest::FORMAT_VERSION,
            wall_clock_s: started.elapsed().as_secs_f64(),
            expected_photons: session.expected_photons,
            photon_chain: if config.expected_photons.is_some() {
                "explicit expected_photons".to_string()
            } else {
                "power/(hc/λ) · exp(−cL) · 10^(−receiver_loss_db/10) · exposure".to_string()
            },
        },
        seeds: SeedLedger::new(config),
        config: config.clone(),
        states,
        failures,
        files: manifest::checksums(out, &written)?,
    };
    manifest.write(&out.join(manifest::MANIFEST_FILE))?;
    Ok(manifest)
}

/// Reads every `.pgm` in `dir` (sorted by name) as one frame sequence and
/// measures it against the sent superposition.
pub fn analyze_frames_dir(dir: &Path, ell: u32, sent_theta_deg: f64, opts: &SegmentOptions) -> Result<FidelitySeries> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
        .collect();
    paths.sort();
    let frames = paths
        .iter()
        .enumerate()
        .map(|(i, p)| Frame::read_pgm(p, i, DEFAULT_EXPOSURE))
        .collect::<Result<Vec<_>>>()?;
    let sent = crate::modes::SuperpositionSpec::balanced(ell, sent_theta_deg.to_radians())?;
    fidelity_series(&frames, &sent, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            frames_per_state: 3,
            output_dir: dir.to_path_buf(),
            ..Default::default()
        }
        .with_equally_spaced_states(1, 2);
        cfg.states.push(StateEntry::Pure { ell: 3 });
        cfg
    }

    #[test]
    fn run_writes_tables_frames_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = run_experiment(&small_config(dir.path())).unwrap();
        assert_eq!(m.states.len(), 3);
        for name in ["orientation.csv", "crosstalk_l1.csv", "trajectories.csv", "tiptilt.csv", "manifest.toml"] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        assert_eq!(m.files.iter().filter(|f| f.path.ends_with(".pgm")).count(), 9);
        assert!(manifest::verify(dir.path()).unwrap().is_empty());
        let table = fs::read_to_string(dir.path().join("orientation.csv")).unwrap();
        assert_eq!(table.lines().count(), 1 + 6);
        assert!(table.starts_with("state,ell,sent_theta_deg,frame,"));
    }

    #[test]
    fn invalid_config_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(&dir.path().join("out"));
        cfg.frames_per_state = 0;
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
        assert!(!dir.path().join("out").exists());
    }

    #[test]
    fn frames_round_trip_through_analyze() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.states.truncate(1);
        cfg.expected_photons = Some(20000.0);
        run_experiment(&cfg).unwrap();
        let series = analyze_frames_dir(&dir.path().join("frames"), 1, 0.0, &cfg.segment_options()).unwrap();
        assert_eq!(series.samples.len(), 3);
        assert!(series.stats.mean > 0.95, "{:?}", series.stats);
    }
}
