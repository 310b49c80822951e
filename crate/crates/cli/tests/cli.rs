//! Binary-level checks: subcommand wiring, flag handling and exit codes
//! (0 success, 1 validation error, 2 numerical failure).

use std::path::{Path, PathBuf};
use std::process::Command;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quantfolio"))
}

fn fixture_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/config.json")
}

#[test]
fn backtest_on_fixture_succeeds_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = binary()
        .args(["backtest", "--config"])
        .arg(fixture_config())
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for artifact in [
        "returns.csv",
        "rankings.csv",
        "views.json",
        "weights.csv",
        "policy_comparison.csv",
        "impact_params.json",
        "tca_pre.csv",
        "tca_post.csv",
        "tca_fx.csv",
        "attribution.json",
        "cycle_report.json",
    ] {
        assert!(out.join(artifact).exists(), "missing {artifact}");
    }
}

#[test]
fn rank_emits_one_row_per_date_and_asset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = binary()
        .args(["rank", "--config"])
        .arg(fixture_config())
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(out.join("rankings.csv")).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        // (date, asset) unique across the file.
        assert!(seen.insert((fields[0].to_string(), fields[3].to_string())), "{line}");
    }
    let dates: std::collections::BTreeSet<&str> =
        text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(seen.len(), dates.len() * 5, "every ranking covers all 5 assets");
}

#[test]
fn missing_config_is_a_validation_error() {
    let status = binary()
        .args(["backtest", "--config", "/nonexistent/config.json"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn unknown_config_key_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"freeform": true}"#).unwrap();
    let output = binary()
        .args(["backtest", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("error"), "{stderr}");
}

#[test]
fn unknown_stage_is_rejected() {
    let output = binary()
        .args(["backtest", "--stage", "warp", "--config"])
        .arg(fixture_config())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("unknown stage"));
}

#[test]
fn backtest_stage_flag_stops_early() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = binary()
        .args(["backtest", "--stage", "construct", "--config"])
        .arg(fixture_config())
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("weights.csv").exists());
    assert!(!out.join("attribution.json").exists(), "later stages must not run");
    assert!(!out.join("cycle_report.json").exists());
}

#[test]
fn numerical_failure_exits_with_code_2() {
    // A DP that cannot converge within one iteration at an impossible
    // tolerance reports a numerical failure.
    let dir = tempfile::tempdir().unwrap();
    let src = fixture_config();
    let base = src.parent().unwrap();
    let mut config: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&src).unwrap()).unwrap();
    for key in ["prices", "factors", "orders", "order_benchmarks", "segments", "currency", "fx"] {
        if let Some(path) = config.get(key).and_then(|v| v.as_str()) {
            config[key] = serde_json::json!(base.join(path).display().to_string());
        }
    }
    config["rebalance"] = serde_json::json!({
        "policy": "dp",
        "grid_points": 3,
        "cost_rate": 0.001,
        "paths": 8,
        "discount": 0.999,
        "convergence_tol": 1e-18,
        "max_iterations": 1
    });
    let path = dir.path().join("config.json");
    std::fs::write(&path, serde_json::to_string(&config).unwrap()).unwrap();
    let output = binary()
        .args(["rebalance", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(String::from_utf8_lossy(&output.stderr).contains("no convergence"));
}
