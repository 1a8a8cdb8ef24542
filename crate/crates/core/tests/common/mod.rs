#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use oamsim::runner::{ExperimentConfig, StateEntry};

/// Two first-order superpositions and one third-order pure mode, a few frames each.
pub fn small_config(output_dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        frames_per_state: 4,
        output_dir: output_dir.to_path_buf(),
        write_frames: true,
        ..Default::default()
    }
    .with_equally_spaced_states(1, 2);
    cfg.states.push(StateEntry::Pure { ell: 3 });
    cfg
}

pub fn write_config(cfg: &ExperimentConfig, path: &Path) {
    fs::write(path, cfg.to_toml()).unwrap();
}

pub fn oamsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oamsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Every `.pgm` and `.csv` under `root`, as sorted paths relative to it.
pub fn outputs(root: &Path) -> Vec<PathBuf> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<PathBuf>) {
        for entry in fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(&p, root, out);
            } else if matches!(p.extension().and_then(|e| e.to_str()), Some("pgm" | "csv")) {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

/// Runs `simulate` twice into separate directories and returns the first
/// differing output, if any, plus the number of files compared.
pub fn simulate_twice(work: &Path) -> Result<usize, String> {
    let mut dirs = Vec::new();
    for run in ["a", "b"] {
        let out = work.join(run);
        let cfg_path = work.join(format!("{run}.toml"));
        write_config(&small_config(&out), &cfg_path);
        let res = oamsim(&["simulate", cfg_path.to_str().unwrap()]);
        if !res.status.success() {
            return Err(format!("simulate failed: {}", String::from_utf8_lossy(&res.stderr)));
        }
        dirs.push(out);
    }
    let (a, b) = (outputs(&dirs[0]), outputs(&dirs[1]));
    if a != b {
        return Err(format!("file lists differ: {a:?} vs {b:?}"));
    }
    if !a.iter().any(|p| p.extension().is_some_and(|e| e == "pgm")) {
        return Err("no frames written".into());
    }
    for rel in &a {
        if fs::read(dirs[0].join(rel)).unwrap() != fs::read(dirs[1].join(rel)).unwrap() {
            return Err(format!("{} differs", rel.display()));
        }
    }
    Ok(a.len())
}
