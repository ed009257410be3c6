//! End-to-end checks of the command-line interface.

use std::path::Path;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lqrgap")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn predict_emits_all_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("eval.json");
    write(
        &cfg,
        r#"{"task":"eval","n":1,"d":1,"rho":0.5,"grid":[100],"trials":2,"seed":5}"#,
    );
    let out = Command::new(bin())
        .args(["predict", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let plugin = doc["predictions"]["plugin"]["value"].as_f64().unwrap();
    assert!((plugin - 2.370370).abs() < 1e-4);
    assert!(doc["predictions"]["lstd_lower"]["value"].as_f64().unwrap() > 0.0);
    assert!(doc["predictions"]["lstd_exact_trace"]["value"].as_f64().unwrap() > plugin);
}

#[test]
fn eval_risk_writes_contracted_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("eval.toml");
    write(
        &cfg,
        r#"
task = "eval"
n = 1
d = 1
rho = 0.5
methods = ["plugin", "lstd"]
grid = [200, 400]
trials = 20
seed = 11
"#,
    );
    let out_path = dir.path().join("report.csv");
    let out = Command::new(bin())
        .args(["eval-risk", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out_path)
        .args(["--threads", "2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "task,method,baseline,n,d,rho,sigma_w,sigma_u,horizon_T,rollouts_N,trials,failures,scaled_risk_mean,scaled_risk_stderr,prediction,prediction_kind,seed"
    );
    assert_eq!(lines.count(), 4); // 2 grid points x 2 methods
}

#[test]
fn opt_risk_json_format_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("opt.json");
    write(
        &cfg,
        r#"{"task":"opt","n":3,"d":2,"rho":0.5,"methods":["nominal"],
            "grid":[50],"horizon":6,"trials":5,"seed":1}"#,
    );
    let run = |seed: &str| -> serde_json::Value {
        let out = Command::new(bin())
            .args(["opt-risk", "--config"])
            .arg(&cfg)
            .args(["--format", "json", "--seed", seed])
            .output()
            .unwrap();
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice(&out.stdout).unwrap()
    };
    let a = run("1");
    let b = run("1");
    let c = run("2");
    assert_eq!(
        a["rows"][0]["scaled_risk_mean"],
        b["rows"][0]["scaled_risk_mean"]
    );
    assert_ne!(
        a["rows"][0]["scaled_risk_mean"],
        c["rows"][0]["scaled_risk_mean"]
    );
}

#[test]
fn sweep_runs_over_n_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    write(
        &cfg,
        r#"{"task":"eval","n":2,"d":2,"rho":0.5,"methods":["plugin"],
            "grid":[100],"trials":5,"seed":3,"n_grid":[2,4]}"#,
    );
    let out = Command::new(bin())
        .args(["sweep", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    // d tracks n when the base config has d == n.
    assert!(rows[0].starts_with("eval,plugin,,2,2,"));
    assert!(rows[1].starts_with("eval,plugin,,4,4,"));
}

#[test]
fn invalid_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write(
        &cfg,
        r#"{"task":"eval","n":1,"d":1,"rho":1.5,"grid":[100],"trials":2}"#,
    );
    let out = Command::new(bin())
        .args(["predict", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error"), "stderr: {err}");
}
