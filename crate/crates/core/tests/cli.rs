use std::path::{Path, PathBuf};
use std::process::Command;

use rso::driver::{Config, Mode, CSV_HEADER};

fn desk_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.json")
}

fn optimize() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_optimize"));
    cmd.env("RUST_LOG", "warn");
    for (key, _) in std::env::vars() {
        if key.starts_with("RSO_") {
            cmd.env_remove(key);
        }
    }
    cmd
}

fn written_config(dir: &Path) -> Config {
    let text = std::fs::read_to_string(dir.join("config.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn short_run_writes_artifacts_and_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let status = optimize()
        .arg("--config")
        .arg(desk_config())
        .args(["--max-iters", "2", "--out"])
        .arg(dir.path())
        .env("RSO_SNAPSHOT_EVERY", "1")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 3);
    assert!(lines[2].ends_with(",max-iterations"));
    for name in ["final_design.vtk", "final_level_set.vtk", "snapshot_1.vtk", "snapshot_2.vtk"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.starts_with("# vtk DataFile Version"), "{name}");
    }
    let cfg = written_config(dir.path());
    assert_eq!(cfg.max_iters, 2);
    assert_eq!(cfg.nx, 30);
}

#[test]
fn flags_override_environment_which_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let status = optimize()
        .arg("--config")
        .arg(desk_config())
        .args(["--max-iters", "1", "--seed", "7", "--mode", "fixed-mesh-full", "--out"])
        .arg(dir.path())
        .env("RSO_SEED", "99")
        .env("RSO_KAPPA_DEG", "0")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let cfg = written_config(dir.path());
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.kappa_deg, 0.0);
    assert_eq!(cfg.mode, Mode::FixedMeshFull);
}

#[test]
fn bad_input_aborts_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = optimize()
        .args(["--config", "/nonexistent/config.json"])
        .status()
        .unwrap();
    assert_eq!(missing.code(), Some(2));

    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"preset": "desk", "no_such_key": 1}"#).unwrap();
    let status = optimize().arg("--config").arg(&unknown).status().unwrap();
    assert_eq!(status.code(), Some(2));

    let invalid = dir.path().join("invalid.json");
    std::fs::write(&invalid, r#"{"preset": "desk", "volume_target": 1.5}"#).unwrap();
    let status = optimize().arg("--config").arg(&invalid).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn shipped_configs_load() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let paper = Config::load(&dir.join("paper.json")).unwrap();
    paper.validate().unwrap();
    assert_eq!((paper.nx, paper.ny, paper.m_max), (60, 120, 100));
    let desk = Config::load(&dir.join("desk.json")).unwrap();
    desk.validate().unwrap();
    assert_eq!((desk.nx, desk.ny, desk.mode), (30, 60, Mode::FullyAdaptive));
}
