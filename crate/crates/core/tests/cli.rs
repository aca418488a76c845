//! End-to-end runs of the `bifkit` binary.

mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bifkit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bifkit"))
        .args(args)
        .current_dir(dir)
        .env("BIFKIT_THREADS", "1")
        .output()
        .expect("bifkit runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn config(model: &str, extra: &str) -> String {
    format!(r#"{{"schema": "bifurcate-kit/1", "model": {model}{extra}}}"#)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn all_numbers_finite(v: &Value) -> bool {
    match v {
        Value::Number(n) => n.as_f64().is_some_and(f64::is_finite),
        Value::Array(a) => a.iter().all(all_numbers_finite),
        Value::Object(o) => o.values().all(all_numbers_finite),
        _ => true,
    }
}

#[test]
fn list_models_text_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = bifkit(&["list-models"], dir.path());
    assert_eq!(code(&out), 0);
    for name in ["harmonic_forced", "center_contraction", "forced_vdp", "galerkin_heat_osc"] {
        assert!(stdout(&out).contains(name));
    }
    let out = bifkit(&["list-models", "--json"], dir.path());
    let models: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(models.as_array().unwrap().len(), 4);
    assert_ne!(code(&bifkit(&["frobnicate"], dir.path())), 0);
}

#[test]
fn analyze_harmonic_finds_the_forced_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "h.json", &config(r#"{"name": "harmonic_forced"}"#, r#", "chart": {"grid_resolution": 11}"#));
    let out = bifkit(&["analyze", "--config", &cfg, "--out", "run"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let run = dir.path().join("run");
    let report = read_json(&run.join("report.json"));
    assert_eq!(report["verdict"], "ExistencePredicted");
    let zeros = report["zeros"].as_array().unwrap();
    assert_eq!(zeros.len(), 1);
    let h: Vec<f64> = zeros[0]["h_star"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(h[0].abs() < 1e-6 && (h[1] - 1.0).abs() < 1e-6, "{h:?}");

    // index from the quadrature Jacobian at (0, 1)
    let oracle = common::harmonic_forced(1.0);
    let jac = oracle.jacobian(&bifurcate_kit::Vector::from_vec(vec![0.0, 1.0]));
    let want = if jac.determinant() > 0.0 { 1 } else { -1 };
    assert_eq!(zeros[0]["index"]["value"].as_i64().unwrap(), want);

    assert!(all_numbers_finite(&report));
    assert!(run.join("m_grid.csv").exists() && run.join("continuation.csv").exists());
}

#[test]
fn grid_csv_round_trips_at_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "v.json",
        &config(r#"{"name": "forced_vdp"}"#, r#", "chart": {"grid_resolution": 7}, "run_continuation": false"#),
    );
    assert_eq!(code(&bifkit(&["analyze", "--config", &cfg, "--out", "run"], dir.path())), 0);
    let file = fs::File::open(dir.path().join("run/m_grid.csv")).unwrap();
    let rows = bifurcate_kit::reduction::MGrid::read_csv_values(file).unwrap();
    assert!(!rows.is_empty());

    let (problem, chart) = bifurcate_kit::model::registry::get("forced_vdp").unwrap();
    let flow = bifurcate_kit::flow::Flow::new(&problem, Default::default());
    let reduction = bifurcate_kit::reduction::Reduction::new(flow, &chart, Default::default());
    for (h, m) in rows.iter().take(5) {
        let again = reduction.bifurcation_function(&bifurcate_kit::Vector::from_column_slice(h)).unwrap();
        assert_eq!(again.as_slice(), m.as_slice());
    }
}

#[test]
fn reports_are_deterministic_apart_from_the_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "v.json",
        &config(r#"{"name": "forced_vdp"}"#, r#", "chart": {"grid_resolution": 9}, "eps_ladder": [1e-2, 1e-3]"#),
    );
    for out in ["a", "b"] {
        assert_eq!(code(&bifkit(&["analyze", "--config", &cfg, "--out", out], dir.path())), 0);
    }
    let strip = |p: &str| {
        let mut v = read_json(&dir.path().join(p).join("report.json"));
        v.as_object_mut().unwrap().remove("timestamp");
        v
    };
    assert_eq!(strip("a"), strip("b"));
    for f in ["m_grid.csv", "continuation.csv"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap());
    }
}

#[test]
fn broken_period_is_an_assumption_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "h.json",
        &config(r#"{"name": "harmonic_forced", "params": {"period": 3.141592653589793}}"#, r#", "chart": {"grid_resolution": 7}"#),
    );
    let out = bifkit(&["analyze", "--config", &cfg, "--out", "run"], dir.path());
    assert_eq!(code(&out), 2, "{}", stdout(&out));
    let report = read_json(&dir.path().join("run/report.json"));
    assert_eq!(report["verdict"], "AssumptionFailure");
    assert!(stdout(&out).contains("FAILED"));
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let negative = write_config(dir.path(), "neg.json", &config(r#"{"name": "harmonic_forced"}"#, r#", "integrator": {"abs_tol": -1e-10}"#));
    let out = bifkit(&["analyze", "--config", &negative], dir.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("abs_tol"), "{}", stderr(&out));

    let typo = write_config(
        dir.path(),
        "typo.json",
        "{\n  \"schema\": \"bifurcate-kit/1\",\n  \"model\": {\"name\": \"harmonic_forced\"},\n  \"chart\": {\"radius\": 1.0}\n}\n",
    );
    let out = bifkit(&["analyze", "--config", &typo], dir.path());
    assert_eq!(code(&out), 1);
    let msg = stderr(&out);
    assert!(msg.contains("radius") && msg.contains("line 4"), "{msg}");

    let out = bifkit(&["analyze", "--config", "missing.json"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(!dir.path().join("bifkit-out").exists());
}

#[test]
fn sweep_over_the_forcing_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "h.json",
        &config(r#"{"name": "harmonic_forced"}"#, r#", "chart": {"r0": 3.0, "grid_resolution": 13}, "run_continuation": false"#),
    );
    let out = bifkit(&["sweep", "--config", &cfg, "--out", "sw", "--param", "lambda", "--values", "0.5,1,2"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for lambda in [0.5, 1.0, 2.0] {
        let report = read_json(&dir.path().join(format!("sw/lambda={lambda}/report.json")));
        let zeros = report["zeros"].as_array().unwrap();
        assert_eq!(zeros.len(), 1, "lambda = {lambda}");
        let h: Vec<f64> = zeros[0]["h_star"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert!(h[0].abs() < 1e-6 && (h[1] - lambda).abs() < 1e-6, "lambda = {lambda}: {h:?}");
    }
    let summary = fs::read_to_string(dir.path().join("sw/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);

    let out = bifkit(&["sweep", "--config", &cfg, "--param", "lambda", "--values"], dir.path());
    assert_eq!(code(&out), 1);
    let out = bifkit(&["sweep", "--config", &cfg, "--param", "omega", "--values", "1"], dir.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn sweep_logs_the_complement_operator() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &config(r#"{"name": "center_contraction"}"#, r#", "chart": {"grid_resolution": 5}, "run_continuation": false"#),
    );
    let out = bifkit(&["sweep", "--config", &cfg, "--out", "sw", "--param", "gamma", "--values", "0.5,2"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    for gamma in [0.5f64, 2.0] {
        let line = text
            .lines()
            .find(|l| l.starts_with(&format!("gamma = {gamma}: complement operator")))
            .unwrap_or_else(|| panic!("no D line for gamma = {gamma}:\n{text}"));
        let value: f64 = line.rsplit('[').next().unwrap().trim_end_matches(']').parse().unwrap();
        let want = (-2.0 * std::f64::consts::PI * gamma).exp() - 1.0;
        assert!((value - want).abs() < 1e-9, "{value} vs {want}");
    }
}

#[test]
fn verify_passes_on_registry_models_and_catches_a_sloppy_integrator() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["harmonic_forced", "forced_vdp"] {
        let cfg = write_config(dir.path(), &format!("{name}.json"), &config(&format!(r#"{{"name": "{name}"}}"#), r#", "chart": {"grid_resolution": 11}"#));
        let out = bifkit(&["verify", "--config", &cfg, "--out", name], dir.path());
        assert_eq!(code(&out), 0, "{name}:\n{}", stdout(&out));
        let report = read_json(&dir.path().join(name).join("verify.json"));
        assert_eq!(report["passed"], true);
    }
    let sloppy = write_config(
        dir.path(),
        "sloppy.json",
        &config(r#"{"name": "center_contraction"}"#, r#", "integrator": {"abs_tol": 1e-2, "rel_tol": 1e-2}, "chart": {"grid_resolution": 5}"#),
    );
    let out = bifkit(&["verify", "--config", &sloppy, "--out", "sloppy", "--json"], dir.path());
    assert_eq!(code(&out), 3, "{}", stdout(&out));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["passed"], false);
}

#[test]
fn mode_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "h.json",
        &config(r#"{"name": "harmonic_forced"}"#, r#", "chart": {"grid_resolution": 7}, "run_continuation": false"#),
    );
    let out = bifkit(&["analyze", "--config", &cfg, "--out", "lit", "--mode", "literal"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(read_json(&dir.path().join("lit/report.json"))["mode"], "literal");
    assert_eq!(code(&bifkit(&["analyze", "--config", &cfg, "--mode", "sideways"], dir.path())), 1);
}
