//! End-to-end tests of the batch interface through the built binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fsde")
}

fn run_ok(args: &[&str]) -> Output {
    let out = Command::new(bin()).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "command {:?} failed\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn fbm_gen_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
command = "fbm-gen"
hurst = 0.7
t_end = 1.0
n_steps = 64
n_replicas = 3
seed = 99
"#,
    );
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    run_ok(&["run", &cfg, "--out", out_a.to_str().unwrap()]);
    run_ok(&["run", &cfg, "--out", out_b.to_str().unwrap()]);
    for name in ["paths.csv", "meta.json"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn reports_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
command = "moments"
hurst = 0.75
t_end = 1.0
n_steps = 32
n_replicas = 200
seed = 5
coefficient = "additive-unit"
p_list = [2.0]
beta = 0.675
"#,
    );
    let out_a = tmp.path().join("t1");
    let out_b = tmp.path().join("t2");
    run_ok(&["run", &cfg, "--out", out_a.to_str().unwrap(), "--threads", "1"]);
    run_ok(&["run", &cfg, "--out", out_b.to_str().unwrap(), "--threads", "2"]);
    let a = fs::read(out_a.join("report.json")).unwrap();
    let b = fs::read(out_b.join("report.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn moments_report_matches_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
command = "moments"
hurst = 0.75
t_end = 1.0
n_steps = 64
n_replicas = 3000
seed = 11
coefficient = "additive-unit"
p_list = [2.0]
beta = 0.675
"#,
    );
    let out = tmp.path().join("out");
    run_ok(&["run", &cfg, "--out", out.to_str().unwrap()]);
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let est = &doc["estimates"]["terminal_moment_p2"];
    let value = est["value"].as_f64().unwrap();
    let se = est["standard_error"].as_f64().unwrap();
    assert!((value - 1.0).abs() <= 3.0 * se, "{value} ± {se}");
    assert_eq!(doc["seed"], 11);
    assert!(doc["config_hash"].as_str().unwrap().len() == 16);
}

#[test]
fn kernel_validate_emits_factorization_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
command = "kernel-validate"
hurst = 0.75
t_end = 1.0
n_steps = 16
n_replicas = 1
seed = 0
"#,
    );
    let out = tmp.path().join("out");
    run_ok(&["run", &cfg, "--out", out.to_str().unwrap()]);
    let table = fs::read_to_string(out.join("factorization.csv")).unwrap();
    let mut found = false;
    for line in table.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let (t, s): (f64, f64) = (cols[0].parse().unwrap(), cols[1].parse().unwrap());
        if (t - 1.0).abs() < 1e-12 && (s - 0.5).abs() < 1e-12 {
            let fac: f64 = cols[2].parse().unwrap();
            let gate: f64 = cols[5].parse().unwrap();
            assert!((fac - 0.5).abs() <= gate, "entry {fac} off by more than {gate}");
            found = true;
        }
    }
    assert!(found, "no (1, 0.5) row in the table");
}

#[test]
fn seed_override_changes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
command = "fbm-gen"
hurst = 0.6
t_end = 1.0
n_steps = 32
n_replicas = 1
seed = 1
"#,
    );
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    run_ok(&["run", &cfg, "--out", out_a.to_str().unwrap()]);
    run_ok(&["run", &cfg, "--out", out_b.to_str().unwrap(), "--seed", "2"]);
    let a = fs::read(out_a.join("paths.csv")).unwrap();
    let b = fs::read(out_b.join("paths.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn invalid_config_yields_machine_readable_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
command = "moments"
hurst = 0.75
t_end = 1.0
n_steps = 32
n_replicas = 10
seed = 0
coefficient = "additive-unit"
mystery_knob = true
"#,
    );
    let out = Command::new(bin()).args(["run", &cfg]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().next().unwrap();
    let doc: serde_json::Value = serde_json::from_str(line).unwrap();
    assert_eq!(doc["error"], "config-validation");
    assert!(doc["message"].as_str().unwrap().contains("mystery_knob"));
}

#[test]
fn domain_violation_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
command = "moments"
hurst = 0.4
t_end = 1.0
n_steps = 32
n_replicas = 10
seed = 0
coefficient = "additive-unit"
"#,
    );
    let out = Command::new(bin()).args(["run", &cfg]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Hurst"));
}

#[test]
fn list_library_catalog() {
    let out = run_ok(&["list-library"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("additive-unit"));
    assert!(text.contains("drift functionals"));

    let out = run_ok(&["list-library", "--json"]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let arr = doc.as_array().unwrap();
    assert!(!arr.is_empty());
    // every entry's gamma respects the hypothesis at its default H
    for e in arr {
        let gamma = e["holder_order"].as_f64().unwrap();
        let h = e["default_h"].as_f64().unwrap();
        assert!(gamma > 1.0 / h - 1.0, "{e}");
    }
}
