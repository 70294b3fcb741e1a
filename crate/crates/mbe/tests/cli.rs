use std::process::Command;

use mbe::persist::read_json;
use mbe::ExperimentConfig;

fn small_config(horizon: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json(
        r#"{"grid": {"dim": 1, "n": 64, "length": 40}, "model": {"kind": "power_law", "q": 4},
            "initial": {"family": "gaussian_bump", "amplitude": 0.2},
            "solver": {"scheme": "etd2", "step": 0.01}}"#,
    )
    .unwrap();
    cfg.horizon = horizon;
    cfg
}

#[test]
fn cli_simulate_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let run = dir.path().join("run");
    std::fs::write(&cfg_path, serde_json::to_string(&small_config(4.0)).unwrap()).unwrap();
    let bin = env!("CARGO_BIN_EXE_mbe");
    let out = Command::new(bin).args(["simulate"]).arg(&cfg_path).arg("--out").arg(&run).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = Command::new(bin).arg("verify-bounds").arg(&run).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("gradient") && text.contains("PASS"), "{text}");
    assert!(text.contains("q = 4 in (3, 5)"), "{text}");
    let out = Command::new(bin).args(["simulate", "/nonexistent.json"]).output().unwrap();
    assert!(!out.status.success());
    let lab = dir.path().join("lab.json");
    let out = Command::new(bin).args(["bounds-lab", "--seed", "2", "--out"]).arg(&lab).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = read_json(&lab).unwrap();
    assert_eq!(v["strauss"]["seed"], 2);
}
