use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hardyflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hardyflow"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const DISK: &str = r#"{"type": "disk", "radius": 1.0, "z0": [0.0, 0.0]}"#;

fn report_validator() -> jsonschema::Validator {
    let schema: Value = serde_json::from_str(include_str!("../schema/report.schema.json")).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid_report(report: &Value) {
    let validator = report_validator();
    let errors: Vec<String> = validator.iter_errors(report).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn malformed_and_invalid_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("syntax.json", "{ not json".to_string()),
        ("unknown.json", format!(r#"{{"domain": {DISK}, "colour": "red"}}"#)),
        ("steps.json", format!(r#"{{"domain": {DISK}, "t_steps": 3}}"#)),
        (
            "range.json",
            format!(r#"{{"domain": {DISK}, "t_min": 1.0, "t_max": 0.5}}"#),
        ),
    ];
    for (name, body) in cases {
        let cfg = write_config(dir.path(), name, &body);
        let out = hardyflow(&["--config", &cfg, "--out", dir.path().join("out").to_str().unwrap()]);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let missing = hardyflow(&["--config", dir.path().join("absent.json").to_str().unwrap()]);
    assert_ne!(missing.status.code(), Some(0));
}

#[test]
fn invalid_geometry_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{"domain": {"type": "circles", "outer": {"center": [0, 0], "radius": 1},
        "holes": [{"center": [0.9, 0], "radius": 0.3}], "z0": [0, 0]}}"#;
    let cfg = write_config(dir.path(), "bad.json", body);
    let out = hardyflow(&["--config", &cfg, "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_on_the_disk_passes_and_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        "disk.json",
        &format!(r#"{{"domain": {DISK}, "command": "verify", "t_max": 1.5, "t_steps": 24}}"#),
    );
    let out = hardyflow(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid_report(&report);
    let mut broken = report.clone();
    broken["exit_code"] = 7.into();
    assert!(!report_validator().is_valid(&broken));
    assert_eq!(report["exit_code"], 0);
    assert_eq!(report["checks"]["failed"].as_array().unwrap().len(), 0);
    for f in [
        "flow.csv",
        "flow_refined.csv",
        "checks.json",
        "khat_scaled.svg",
        "inv_bergman.svg",
        "hhat.svg",
        "report.json",
    ] {
        assert!(out_dir.join(f).is_file(), "{f} missing");
    }
    let cached = fs::read_dir(out_dir.join("cache")).unwrap().count();
    assert!(cached > 0);

    let flow = fs::read_to_string(out_dir.join("flow.csv")).unwrap();
    assert_eq!(flow.lines().count(), 25);
    let checks: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("checks.json")).unwrap()).unwrap();
    assert!(checks.as_array().unwrap().iter().all(|c| c["passed"] == true));

    // a warm run reads the cache and reproduces the tables
    let again = hardyflow(&["--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(fs::read_to_string(out_dir.join("flow.csv")).unwrap(), flow);
}

#[test]
fn kernel_commands_and_no_cache() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        "annulus.json",
        r#"{"domain": {"type": "annulus", "q": 0.5, "z0": [0.7, 0.0]}, "command": "bergman", "t": 0.0, "K": 12}"#,
    );
    let out = hardyflow(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "--no-cache", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_valid_report(&serde_json::from_slice(&out.stdout).unwrap());
    assert!(!out_dir.join("cache").exists());
    let k: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("kernels.json")).unwrap()).unwrap();
    let (b, khat) = (
        k["kernels"]["bergman"].as_f64().unwrap(),
        k["kernels"]["khat"].as_f64().unwrap(),
    );
    assert!(khat > std::f64::consts::PI * b);
    assert_eq!(k["holes"], 1);

    let cfg = write_config(
        dir.path(),
        "green.json",
        &format!(r#"{{"domain": {DISK}, "command": "green"}}"#),
    );
    let out = hardyflow(&["--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let sample = fs::read_to_string(out_dir.join("green.csv")).unwrap();
    assert!(sample.starts_with("x,y,G\n"));
    let crit: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("critical.json")).unwrap()).unwrap();
    assert_eq!(crit["critical_times"].as_array().unwrap().len(), 0);
}
