use std::path::PathBuf;
use std::process::Command;

use nlslab::experiment::{parse_config, read_manifest, ExperimentKind, FAILURE_MARKER, MANIFEST_FILE};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nlslab"))
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn lists_every_experiment() {
    let out = bin().arg("--list-experiments").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for kind in ExperimentKind::ALL {
        assert!(text.contains(kind.name()), "{kind} missing from\n{text}");
    }
}

#[test]
fn shipped_configs_validate() {
    let mut seen = Vec::new();
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = parse_config(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(path.file_stem().unwrap().to_str().unwrap(), cfg.experiment.name());
        seen.push(cfg.experiment);

        let out = bin()
            .arg("--config")
            .arg(&path)
            .arg("--validate-only")
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let echoed = parse_config(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
        assert_eq!(echoed, cfg);
    }
    assert_eq!(seen.len(), ExperimentKind::ALL.len());
}

#[test]
fn bad_configs_exit_with_path() {
    let dir = tempfile::tempdir().unwrap();
    for (text, needle) in [
        (
            "experiment = \"linear-decay\"\n[initial.packet]\namplitude = 0.5\n",
            "0.2",
        ),
        ("experiment = \"linear-decay\"\n[evolution]\nstep = 0.1\n", "evolution"),
        (
            "experiment = \"linear-decay\"\n[grid]\npoints = \"many\"\n",
            "grid.points",
        ),
        ("experiment = \"free-fall\"\n", "free-fall"),
    ] {
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, text).unwrap();
        let out = bin()
            .arg("--config")
            .arg(&path)
            .arg("--validate-only")
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(2), "{text}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert!(err.contains(needle), "`{needle}` not in `{err}`");
    }
}

#[test]
fn run_writes_manifest_and_respects_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("branch");
    std::fs::create_dir_all(&out_dir).unwrap();
    std::fs::write(out_dir.join(FAILURE_MARKER), "stale").unwrap();
    let out = bin()
        .arg("--config")
        .arg(configs().join("boundstate-branch.toml"))
        .arg("--out-dir")
        .arg(&out_dir)
        .arg("--threads")
        .arg("1")
        .output()
        .unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.contains("criterion  6 [PASS]") && stdout.contains("criterion 12 [PASS]"));
    assert!(!out_dir.join(FAILURE_MARKER).exists());
    assert!(out_dir.join(MANIFEST_FILE).exists());
    let m = read_manifest(&out_dir).unwrap();
    assert_eq!(m.config.experiment, ExperimentKind::BoundstateBranch);
    assert!(m.passed());
    assert!(m.artifacts.iter().all(|a| out_dir.join(a).exists()));
}

#[test]
fn module_errors_leave_a_failure_marker() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    // A repulsive bump has no bound state, which the branch pipeline needs.
    std::fs::write(
        &cfg,
        "experiment = \"boundstate-branch\"\n[potential]\npreset = \"bump\"\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let marker = std::fs::read_to_string(out_dir.join(FAILURE_MARKER)).unwrap();
    assert!(!marker.is_empty());
    assert!(!out_dir.join(MANIFEST_FILE).exists());
}
