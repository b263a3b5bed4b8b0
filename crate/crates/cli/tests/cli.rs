use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sgs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgs")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sgs-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn repo_config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).to_str().unwrap().to_string()
}

#[test]
fn exact_two_by_two() {
    let o = sgs(&["exact", "--config", &repo_config("exact_heisenberg_2x2.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!((v["e0"].as_f64().unwrap() + 8.0).abs() < 1e-8);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["config"]["rows"], 2);
}

#[test]
fn validate_exits_zero() {
    let dir = scratch("validate");
    let o = sgs(&["validate", "--config", &repo_config("validate_3x4.json"), "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.join("validation.json").exists());
}

#[test]
fn schema_error_exits_two() {
    let dir = scratch("schema");
    let cfg = write_config(&dir, r#"{"job": "optimize", "model": "heisenberg", "rows": 2, "cols": 2, "optimizer": {"delta0": "big"}}"#);
    let o = sgs(&["optimize", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("optimizer.delta0"));
    let o = sgs(&["exact", "--config", &repo_config("validate_3x4.json")]);
    assert_eq!(o.status.code(), Some(2), "job mismatch");
}

#[test]
fn large_run_without_ack_exits_three() {
    let o = sgs(&["optimize", "--config", &repo_config("optimize_heisenberg_8x8.json")]);
    assert_eq!(o.status.code(), Some(3));
    let o = sgs(&["reproduce-tables", "--model", "heisenberg", "--lattice", "8x8"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn non_convergence_exits_four_with_output() {
    let dir = scratch("noconv");
    let cfg = write_config(&dir, r#"{"job": "optimize", "model": "heisenberg", "rows": 2, "cols": 2, "optimizer": {"max_outer_iterations": 1}}"#);
    let o = sgs(&["optimize", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    for f in ["results.jsonl", "summary.csv", "trace.jsonl", "state.sgs"] {
        assert!(dir.join(f).exists(), "{f}");
    }
}

#[test]
fn single_thread_reruns_are_bit_exact() {
    let dir = scratch("det");
    let cfg = write_config(&dir, r#"{"job": "optimize", "model": "random2body", "rows": 2, "cols": 3, "seed": 4, "restarts": 2}"#);
    let a = stdout_json(&sgs(&["--threads", "1", "optimize", "--config", &cfg]));
    let b = stdout_json(&sgs(&["--threads", "1", "optimize", "--config", &cfg]));
    assert_eq!(a["e0"].as_f64().unwrap().to_bits(), b["e0"].as_f64().unwrap().to_bits());
    assert_eq!(a["config_hash"], b["config_hash"]);
    let c = stdout_json(&sgs(&["--threads", "1", "optimize", "--config", &cfg, "--seed", "5"]));
    assert_ne!(a["config_hash"], c["config_hash"]);
}

#[test]
fn correlations_and_export_write_files() {
    let dir = scratch("corr");
    let o = sgs(&["correlations", "--config", &repo_config("correlations_d2.json"), "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["horizontal.csv", "vertical.csv", "correlations.json"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(dir.join("horizontal.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    let o = sgs(&["export-peps", "--config", &repo_config("export_peps_3x3.json"), "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let peps: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("peps.json")).unwrap()).unwrap();
    assert_eq!(peps["tensors"].as_array().unwrap().len(), 9);
}
