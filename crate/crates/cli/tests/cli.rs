use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fluxprobe"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL_SPHERE: &str = r#"
seed = 2
[band]
k_min = 0.5
k_max = 3.0
n = 3
[grid]
n_radial = 2
n_angular = 4
[medium]
kind = "voxel"
spacing = 0.1
depth = 0.4
sphere = { n = 8, radius = 0.35, contrast = 0.3 }
"#;

#[test]
fn lemma1_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["lemma1", "--p", "1", "--b", "1", "--n", "999", "--out", dir.path().to_str().unwrap()]);
    let r = report(&out);
    let i = r["rows"][0]["integral"].as_f64().unwrap();
    assert!((i - 1e-3).abs() < 1e-15, "{i}");
    let csv = std::fs::read_to_string(dir.path().join("lemma1.csv")).unwrap();
    assert!(csv.starts_with(&format!("# config_hash={}", r["config_hash"].as_str().unwrap())));
}

#[test]
fn validate_free_space() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["validate", "--config", config("free.toml").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("validate.json")).unwrap()).unwrap();
    assert_eq!(doc["delta"].as_f64(), Some(0.0));
    assert_eq!(doc["passed"].as_bool(), Some(true));
}

#[test]
fn probe_and_iterate_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (c, o) = (config("layered.toml"), dir.path().to_str().unwrap().to_string());
    let probe = report(&run(&["probe-1d", "--config", c.to_str().unwrap(), "--out", &o]));
    let iter = report(&run(&["iterate", "--config", c.to_str().unwrap(), "--out", &o]));
    let (a, b) = (probe["delta"].as_f64().unwrap(), iter["delta"].as_f64().unwrap());
    assert!((a - b).abs() < 0.01 * a, "{a} vs {b}");
    assert_eq!(probe["config_hash"], iter["config_hash"]);
    for f in ["reflection.csv", "trace.csv", "spectra.csv"] {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(text.starts_with("# config_hash="), "{f}");
    }
}

#[test]
fn runs_are_deterministic() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let c = config("synthetic.toml");
    for d in [&d1, &d2] {
        report(&run(&["iterate", "--config", c.to_str().unwrap(), "--out", d.path().to_str().unwrap()]));
    }
    for f in ["trace.csv", "spectra.csv", "iterate.json"] {
        let a = std::fs::read(d1.path().join(f)).unwrap();
        let b = std::fs::read(d2.path().join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let d3 = tempfile::tempdir().unwrap();
    let r = report(&run(&["iterate", "--config", c.to_str().unwrap(), "--seed", "12", "--out", d3.path().to_str().unwrap()]));
    let first: Value = serde_json::from_slice(&std::fs::read(d1.path().join("iterate.json")).unwrap()).unwrap();
    assert_ne!(r["config_hash"], first["config_hash"]);
}

#[test]
fn spectrum_finds_the_planted_peak() {
    let dir = tempfile::tempdir().unwrap();
    let c = config("synthetic.toml");
    let r = report(&run(&["spectrum", "--config", c.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]));
    assert!((r["max"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    assert!((r["maximizers"][0]["k"].as_f64().unwrap() - 1.7).abs() < 1e-9);
}

#[test]
fn assembly_is_cached() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "sphere.toml", SMALL_SPHERE);
    let out = dir.path().join("out");
    let args = ["assemble-3d", "--config", c.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let first = report(&run(&args));
    assert_eq!(first["cache"]["hit"], Value::Bool(false));
    assert!(first["max_operator_norm"].as_f64().unwrap() <= 1.0 + 1e-6);
    let second = report(&run(&args));
    assert_eq!(second["cache"]["hit"], Value::Bool(true));
    assert_eq!(first["max_residual"], second["max_residual"]);
    let spec = report(&run(&["spectrum", "--config", c.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    assert_eq!(spec["cache"]["hit"], Value::Bool(true));
}

#[test]
fn validate_small_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "sphere.toml", SMALL_SPHERE);
    let out = run(&["validate", "--config", c.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text}");
    assert!(text.contains("PASS reciprocity"));
}

#[test]
fn errors_are_json_documents() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "[band]\nk_min = 1.0\n");
    let out = run(&["iterate", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let doc: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(doc["status"], "error");
    assert_eq!(doc["error"]["kind"], "config");

    let c = config("synthetic.toml");
    let out = run(&["probe-1d", "--config", c.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let doc: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(doc["error"]["kind"], "unsupported");

    let text = std::fs::read_to_string(config("layered.toml")).unwrap().replace("margin = 0.02", "margin = 0.0");
    let c = write(dir.path(), "margin.toml", &text);
    let out = run(&["probe-1d", "--config", c.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    let doc: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(doc["error"]["kind"], "validation");
}
