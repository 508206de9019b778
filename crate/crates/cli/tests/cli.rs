use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn qbound(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qbound"));
    cmd.args(args).env_remove("QBOUND_PRECISION_BITS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn run(cmd: &str, dir: &TempDir, text: &str, env: &[(&str, &str)]) -> (i32, String) {
    let cfg = write_config(dir.path(), "run.conf", text);
    let out = dir.path().join("out");
    let o = qbound(&[cmd, "--config", &cfg, "--out", out.to_str().unwrap()], env);
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stderr).into_owned())
}

const MINIMAL: &str = "object.kind = gaussian\nobject.delta = 0.01\notf.beta = 1\ncompute.mu = 1, 2\ncompute.q_max = 16\n";

#[test]
fn minimal_bound_writes_schema() {
    let dir = TempDir::new().unwrap();
    let (code, _) = run("bound", &dir, MINIMAL, &[]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(dir.path().join("out/bound.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "delta,mu,k_tilde,leading_order,tail_estimate,norm_residual,b_mu_residual,verdict,qsnr,direct_fisher,convexity_bound,classical_sim_bound"
    );
    assert_eq!(csv.lines().count(), 3);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/bound.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    let k: f64 = json["rows"][0]["k_tilde"].to_string().parse().unwrap();
    assert!((k / 4.0 - 1.0).abs() < 0.01);
}

#[test]
fn zero_delta_is_an_error_record() {
    let dir = TempDir::new().unwrap();
    let (code, err) = run("bound", &dir, "object.delta = 0\n", &[]);
    assert_eq!(code, 1);
    let rec: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(rec["record"], "invalid_config: delta must be positive");
    assert_eq!(rec["error"], "invalid_config");
}

#[test]
fn scaling_needs_a_sweep() {
    let dir = TempDir::new().unwrap();
    let (code, err) = run("scaling", &dir, MINIMAL, &[]);
    assert_eq!(code, 1);
    assert!(err.contains("precondition"));
}

#[test]
fn scaling_slopes() {
    let dir = TempDir::new().unwrap();
    let text = "object.deltas = 0.04, 0.02, 0.01\ncompute.mu = 3, 6\ncompute.q_max = 24\n";
    let (code, _) = run("scaling", &dir, text, &[]);
    assert_eq!(code, 0);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/scaling.json")).unwrap()).unwrap();
    let reports = json["reports"].as_array().unwrap();
    for (r, target) in reports.iter().zip([-2.0, -6.0]) {
        let s = r["fitted_slope"].as_f64().unwrap();
        assert!((s - target).abs() < 0.15, "{r}");
        assert_eq!(r["target_slope"].as_f64().unwrap(), target);
        assert!(r["max_abs_deviation"].as_f64().is_some());
    }
}

#[test]
fn thermal_report_and_empty_ensemble() {
    let dir = TempDir::new().unwrap();
    let (code, _) = run("thermal", &dir, "object.delta = 1\nthermal.models = 10\n", &[]);
    assert_eq!(code, 0);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/thermal.json")).unwrap()).unwrap();
    for p in json["properties"].as_array().unwrap() {
        assert!(p["worst_margin"].as_f64().is_some());
        assert_eq!(p["passed"], true, "{p}");
    }
    let (code, _) = run("thermal", &dir, "object.delta = 1\nthermal.models = 0\n", &[]);
    assert_eq!(code, 1);
}

#[test]
fn precision_override_order() {
    let dir = TempDir::new().unwrap();
    let text = format!("{MINIMAL}compute.precision = 128\ncompute.direct = false\n");
    let bits = |dir: &TempDir| -> u64 {
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/bound.json")).unwrap()).unwrap();
        json["precision_bits"].as_u64().unwrap()
    };
    run("bound", &dir, &text, &[]);
    assert_eq!(bits(&dir), 128);
    run("bound", &dir, &text, &[("QBOUND_PRECISION_BITS", "192")]);
    assert_eq!(bits(&dir), 192);
    let cfg = write_config(dir.path(), "p.conf", &text);
    let out = dir.path().join("out");
    qbound(
        &["bound", "--config", &cfg, "--out", out.to_str().unwrap(), "--precision", "160"],
        &[("QBOUND_PRECISION_BITS", "192")],
    );
    assert_eq!(bits(&dir), 160);
    let (code, _) = run("bound", &dir, &text, &[("QBOUND_PRECISION_BITS", "32")]);
    assert_eq!(code, 1);
}

#[test]
fn validate_and_snr() {
    let dir = TempDir::new().unwrap();
    let (code, _) = run("validate", &dir, MINIMAL, &[]);
    assert_eq!(code, 0);
    let text = "object.kind = uniform\nobject.delta = 0.1\ncompute.mu = 2, 4\ncompute.q_max = 12\n";
    let (code, _) = run("snr", &dir, text, &[]);
    assert_eq!(code, 0);
    assert!(dir.path().join("out/snr.csv").exists());
}

#[test]
fn constellation_rows() {
    let dir = TempDir::new().unwrap();
    let text = "object.kind = points\nobject.positions = -1, 1\nobject.weights = 0.5, 0.5\nobject.delta = 0.2\ncompute.mu = 1, 2\ncompute.direct = false\n";
    let (code, _) = run("bound", &dir, text, &[]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(dir.path().join("out/bound.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert!(row[2].is_empty());
    let classical: f64 = row[11].parse().unwrap();
    assert!((classical - 0.04).abs() < 1e-15);
}
