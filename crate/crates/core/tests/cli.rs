mod common;

use std::fs;

use common::{oamsim, simulate_twice, small_config, write_config};
use oamsim::runner::manifest::{verify, RunManifest, MANIFEST_FILE};

#[test]
fn simulate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let files = simulate_twice(dir.path()).unwrap();
    // 3 states x 4 frames plus the tables
    assert!(files >= 12 + 3, "{files}");
}

#[test]
fn simulate_writes_a_verifiable_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg_path = dir.path().join("run.toml");
    write_config(&small_config(&out), &cfg_path);
    let res = oamsim(&["simulate", cfg_path.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let manifest = RunManifest::read(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.states.len(), 3);
    assert_eq!(manifest.seeds.detector.len(), 3);
    assert!(manifest.files.iter().any(|f| f.path == "orientation.csv"));
    assert!(verify(&out).unwrap().is_empty());

    let csv = fs::read_to_string(out.join("orientation.csv")).unwrap();
    assert!(csv.starts_with("state,ell,sent_theta_deg,frame,timestamp,"));
    assert_eq!(csv.lines().count(), 1 + 2 * 4);

    fs::write(out.join("orientation.csv"), "tampered\n").unwrap();
    assert_eq!(verify(&out).unwrap(), vec!["orientation.csv".to_string()]);
}

#[test]
fn analyze_reads_simulated_frames() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg_path = dir.path().join("run.toml");
    let mut cfg = small_config(&out);
    cfg.states.truncate(1);
    write_config(&cfg, &cfg_path);
    assert!(oamsim(&["simulate", cfg_path.to_str().unwrap()]).status.success());

    let res = oamsim(&["analyze", out.join("frames").to_str().unwrap(), "--ell", "1", "--sent-theta", "0"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.starts_with("frame,angle_deg,theta_deg,quality,fidelity"));
    assert_eq!(stdout.lines().count(), 1 + 4);
}

#[test]
fn validate_accepts_good_and_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    write_config(&small_config(&dir.path().join("out")), &good);
    let res = oamsim(&["validate", good.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let bad = dir.path().join("bad.toml");
    let text = fs::read_to_string(&good)
        .unwrap()
        .replace("frames_per_state = 4", "frames_per_state = 0");
    fs::write(&bad, text).unwrap();
    let res = oamsim(&["validate", bad.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("frames_per_state"));

    let typo = dir.path().join("typo.toml");
    fs::write(&typo, "frames_per_stat = 3\n").unwrap();
    assert_eq!(oamsim(&["validate", typo.to_str().unwrap()]).status.code(), Some(2));

    assert_eq!(oamsim(&["validate", "/nonexistent/config.toml"]).status.code(), Some(2));
}

#[test]
fn reproduce_lists_runs_and_rejects() {
    let res = oamsim(&["reproduce", "list"]);
    assert!(res.status.success());
    let listing = String::from_utf8(res.stdout).unwrap();
    for name in ["loss_budget", "photon_rate", "crosstalk", "tip_tilt"] {
        assert!(listing.contains(name), "{name}");
    }

    let res = oamsim(&["reproduce", "loss_budget"]);
    assert!(res.status.success());
    assert!(String::from_utf8_lossy(&res.stdout).contains("38.2"));

    let res = oamsim(&["reproduce", "no_such_statistic"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("loss_budget"));
}
