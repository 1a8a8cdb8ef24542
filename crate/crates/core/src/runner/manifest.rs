//! Run manifest: config echo, per-state summary, seed ledger, and a SHA-256
//! checksum of every output file.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, StateEntry};
use super::pipeline::StateResult;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub version: String,
    pub format: u32,
    pub wall_clock_s: f64,
    pub expected_photons: f64,
    pub photon_chain: String,
}

/// Seeds are written as hex strings; TOML integers stop at `i64::MAX`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedLedger {
    pub master: String,
    pub tree: String,
    pub turbulence: String,
    pub detector: Vec<String>,
}

impl SeedLedger {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        SeedLedger {
            master: format!("{:#018x}", cfg.master_seed),
            tree: "frame = derive(derive(master, state), frame); realization = derive(frame, CHANNEL); \
                   screens = derive(turbulence, realization), slab index; tilt = derive(realization, TILT); \
                   poisson = derive(detector[state], frame)"
                .to_string(),
            turbulence: format!("{:#018x}", cfg.channel_spec().turbulence.seed),
            detector: (0..cfg.states.len())
                .map(|s| format!("{:#018x}", cfg.detector_spec(s).seed))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub index: usize,
    pub kind: String,
    pub ell: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<f64>,
    pub frames: usize,
    pub failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity_std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_deviation_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviation_std_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_core_count: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_radial_wander_mm: Option<f64>,
}

impl StateSummary {
    pub fn new(index: usize, state: &StateEntry, r: &StateResult, frames: usize) -> Self {
        let (kind, ell, theta_deg) = match *state {
            StateEntry::Superposition { ell, theta_deg, .. } => ("superposition", ell as i32, Some(theta_deg)),
            StateEntry::Pure { ell } => ("pure", ell, None),
        };
        let mean_core_count = r.tracks.as_ref().map(|t| {
            let n = t.inter_core_distances.len().max(1) as f64;
            t.trajectories.iter().map(|tr| tr.points.len()).sum::<usize>() as f64 / n
        });
        StateSummary {
            index,
            kind: kind.to_string(),
            ell,
            theta_deg,
            frames,
            failures: r.failures,
            mean_fidelity: r.fidelity.map(|s| s.mean),
            fidelity_std: r.fidelity.map(|s| s.std),
            mean_deviation_deg: r.deviation_deg.map(|s| s.mean),
            deviation_std_deg: r.deviation_deg.map(|s| s.std),
            mean_core_count,
            mean_radial_wander_mm: r.tip_tilt.as_ref().map(|t| t.mean_radial * 1e3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub state: usize,
    pub frame: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run: RunInfo,
    pub seeds: SeedLedger,
    pub config: ExperimentConfig,
    pub states: Vec<StateSummary>,
    pub failures: Vec<FailureRecord>,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Config(vec![e.to_string()]))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(vec![e.to_string()]))
    }
}

pub fn sha256_file(path: &Path) -> Result<(u64, String)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok((bytes.len() as u64, hex::encode(Sha256::digest(&bytes))))
}

pub fn checksums(root: &Path, files: &[impl AsRef<Path>]) -> Result<Vec<FileRecord>> {
    files
        .iter()
        .map(|f| {
            let f = f.as_ref();
            let (bytes, sha256) = sha256_file(f)?;
            let rel = f.strip_prefix(root).unwrap_or(f);
            Ok(FileRecord {
                path: rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/"),
                bytes,
                sha256,
            })
        })
        .collect()
}

/// Files under `dir` whose checksum no longer matches its manifest.
pub fn verify(dir: &Path) -> Result<Vec<String>> {
    let manifest = RunManifest::read(&dir.join(MANIFEST_FILE))?;
    let mut bad = Vec::new();
    for rec in &manifest.files {
        match sha256_file(&dir.join(&rec.path)) {
            Ok((_, sum)) if sum == rec.sha256 => {}
            _ => bad.push(rec.path.clone()),
        }
    }
    Ok(bad)
}
