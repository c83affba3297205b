use std::path::Path;
use std::process::{Command, Output};

fn ibreg(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ibreg"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("IBREG_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn certify_two_scale_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let out = ibreg(&["kernel", "certify", "--type", "two_scale", "--r", "0.35"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cert: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("certificate.json")).unwrap()).unwrap();
    assert!(cert["m1"].as_f64().unwrap().abs() < 1e-8);
    let c = cert["c"].as_f64().unwrap();
    assert!(c > 0.0 && c < 1.0);
    assert_eq!(manifest(dir.path())["files"][0], "certificate.json");
}

#[test]
fn rejects_unknown_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"theta": 0.5, "colour": "blue"}"#).unwrap();
    let out = ibreg(&["model-problem", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn rejects_out_of_range_values() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ibreg(&["static-error", "--theta", "1.5"], dir.path()).status.code(), Some(2));
    assert_eq!(ibreg(&["evolve", "--dt", "-1"], dir.path()).status.code(), Some(2));
    assert_eq!(ibreg(&["evolve", "--variant", "eps"], dir.path()).status.code(), Some(2));
}

#[test]
fn unreachable_tolerance_aborts_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"kernel": {"type": "two_scale", "r": 0.35, "tolerance": 1e-300, "nodes": 256}}"#).unwrap();
    let out = ibreg(&["kernel", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let m = manifest(dir.path());
    assert_eq!(m["files"][0], "diagnostics.json");
    assert!(dir.path().join("diagnostics.json").exists());
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"contour": {"type": "circle", "radius": 1.0, "k_max": 8}, "T": 0.2, "dt": 0.05}"#).unwrap();
    let out = ibreg(&["evolve", "--config", cfg.to_str().unwrap(), "--T", "0.1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert_eq!(m["config"]["T"], 0.1);
    assert_eq!(m["config"]["contour"]["type"], "circle");
    assert_eq!(m["results"]["steps"], 2);
}

#[test]
fn band_limited_evolution_is_deterministic_and_keeps_area() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["evolve", "--variant", "eps_n", "--eps", "0.1", "--n", "8", "--T", "0.2", "--dt", "0.02", "--k-max", "16", "--stride", "2", "--snapshots"];
    for d in [&a, &b] {
        let out = ibreg(&args, d.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let m = manifest(a.path());
    assert!(m["results"]["area_drift"].as_f64().unwrap() < 1e-6);
    let files: Vec<String> = m["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap().to_string()).collect();
    assert!(files.contains(&"trajectory.csv".to_string()));
    assert_eq!(files.len(), 1 + 6);
    for f in files {
        assert_eq!(std::fs::read(a.path().join(&f)).unwrap(), std::fs::read(b.path().join(&f)).unwrap(), "{f}");
    }
}

#[test]
fn model_problem_reports_rates() {
    let dir = tempfile::tempdir().unwrap();
    let out = ibreg(&["model-problem", "--eps", "0.04,0.02,0.01"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let m = manifest(dir.path());
    assert_eq!(m["passed"], true);
    assert!(dir.path().join("errors.csv").exists());
}
