use std::path::Path;
use std::process::{Command, Output};

fn revsob(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_revsob"))
        .args(args)
        .env_remove("REVSOB_OUT_DIR")
        .env("RAYON_NUM_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("valid JSON on stdout")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn constants_report() {
    let out = revsob(&["constants", "--n", "2", "--s", "1.5"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["tool"], "revsob");
    assert_eq!(v["config"]["n"], 2);
    let lc = v["result"]["local_constant"].as_f64().unwrap();
    assert!((lc - 6.0 / 7.0).abs() < 1e-15);
    let out = revsob(&["constants", "--n", "2", "--s", "2.5"]);
    assert!(json(&out)["result"]["sobolev_constant"].as_f64().unwrap() > 0.0);
}

#[test]
fn excluded_parameters_exit_2() {
    let out = revsob(&["constants", "--n", "2", "--s", "2.0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid parameters"));
}

#[test]
fn verify_constants_and_tamper() {
    let out = revsob(&["verify", "--suite", "constants", "--n", "2", "--s", "1.5", "--single"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["result"]["passed"], true);
    let out = revsob(&["verify", "--suite", "constants", "--single", "--tamper-alpha", "1e-6"]);
    assert_eq!(out.status.code(), Some(4));
    let v = json(&out);
    let checks = v["result"]["reports"][0]["checks"].as_array().unwrap();
    assert!(checks.iter().any(|c| c["name"] == "sobolev_constant_routes" && c["passed"] == false));
}

#[test]
fn unknown_suite_exit_2() {
    let out = revsob(&["verify", "--suite", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn quotient_of_band_two_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "f.json", r#"{"type": "harmonic", "n": 2, "offset": 1.0, "coeffs": [[2, 0, 0.05]]}"#);
    let out = revsob(&["quotient", "--n", "2", "--s", "2.5", "--field", &f]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let q = json(&out)["result"]["quotient"].as_f64().unwrap();
    assert!((q - 10.0 / 9.0).abs() < 0.01);
}

#[test]
fn on_manifold_and_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let on = write(dir.path(), "on.json", r#"{"type": "bubble_sum", "n": 2, "terms": [{"c": 2.0, "zeta": [0, 0.3, 0]}]}"#);
    assert_eq!(revsob(&["decompose", "--field", &on]).status.code(), Some(4));
    let bad = write(dir.path(), "bad.json", r#"{"type": "harmonic", "n": 2, "coefs": []}"#);
    assert_eq!(revsob(&["decompose", "--field", &bad]).status.code(), Some(2));
    let neg = write(dir.path(), "neg.json", r#"{"type": "harmonic", "n": 2, "offset": 0.1, "coeffs": [[1, 0, 1.0]]}"#);
    assert_eq!(revsob(&["decompose", "--field", &neg]).status.code(), Some(2));
}

#[test]
fn strict_probe_goes_below_local_constant() {
    let out = revsob(&["probe", "strict", "--n", "2", "--s", "1.5", "--budget", "4"]);
    assert!(out.status.success());
    let v = json(&out);
    assert!(v["result"]["min_quotient"].as_f64().unwrap() < 6.0 / 7.0);
}

#[test]
fn probe_csv_schema() {
    let out = revsob(&["probe", "sharpness", "--n", "2", "--s", "2.5", "--ell-list", "2,4", "--format", "csv", "--budget", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "epsilon,ell,beta,quotient,predicted,deficit,distance,min_u,tail_ratio,converged");
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn reports_are_deterministic_and_honor_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_revsob"))
            .args(["bubble", "--n", "1", "--s", "2.0", "--beta-list", "0.5,0.95", "--budget", "4"])
            .env("REVSOB_OUT_DIR", dir.path())
            .env("RAYON_NUM_THREADS", "1")
            .output()
            .unwrap()
    };
    assert!(run().status.success());
    let first = std::fs::read(dir.path().join("bubble.json")).unwrap();
    assert!(run().status.success());
    let second = std::fs::read(dir.path().join("bubble.json")).unwrap();
    assert_eq!(first, second);
    let v: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["result"]["rows"][1]["critical_points"], 3);
}

#[test]
fn structured_commands_reject_csv() {
    assert_eq!(revsob(&["constants", "--format", "csv"]).status.code(), Some(2));
}
