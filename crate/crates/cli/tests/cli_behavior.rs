//! Black-box tests of the installed binary: exit codes, the JSON envelope,
//! flag parsing, and run-to-run determinism.

use holorealize_core::{CMatrix, DiffeoJet, Jet, C64};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::Command;
use tempfile::TempDir;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_holorealize"))
}

/// Run the binary, parse stdout as JSON when possible.
fn run(args: &[&str]) -> (i32, Option<Value>, String) {
    let out = bin().args(args).output().expect("binary failed to spawn");
    let code = out.status.code().expect("binary was killed");
    let stdout = String::from_utf8_lossy(&out.stdout).to_string();
    let stderr = String::from_utf8_lossy(&out.stderr).to_string();
    (code, serde_json::from_str(&stdout).ok(), stderr)
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_vec(value).unwrap()).unwrap();
    path
}

/// The canned obstructed pair: diag(-3/2, -1/4) with (-y1 + y2^2, -i*y2),
/// optionally shifted by a negative integer multiple of the identity.
fn canned_matrix(shift: f64) -> CMatrix {
    CMatrix::diag(&[c(-1.5 - shift, 0.0), c(-0.25 - shift, 0.0)])
}

fn canned_jet() -> DiffeoJet {
    let mut comp0 = Jet::monomial(2, 2, &[1, 0], c(-1.0, 0.0));
    comp0.add_term(&[0, 2], c(1.0, 0.0));
    let comp1 = Jet::monomial(2, 2, &[0, 1], c(0.0, -1.0));
    DiffeoJet::new(vec![comp0, comp1]).unwrap()
}

#[test]
fn analyze_reports_the_spectral_frame_and_resonances() {
    let dir = TempDir::new().unwrap();
    let mat = write_json(dir.path(), "mat.json", &canned_matrix(0.0));
    let (code, json, _) = run(&["analyze", "--matrix", mat.to_str().unwrap()]);
    assert_eq!(code, 0);
    let envelope = json.unwrap();

    let manifest = &envelope["manifest"];
    assert_eq!(manifest["command"], "analyze");
    assert_eq!(manifest["seed"], 7);
    let digest = manifest["inputs"][mat.to_str().unwrap()].as_str().unwrap();
    assert_eq!(digest.len(), 64, "inputs map holds a hex digest");
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(manifest["versions"]["core"].is_string());

    let result = &envelope["result"];
    assert_eq!(result["negative_degree_bound"], 2);
    let negatives: Vec<&Value> = result["resonances"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["class"] == "NegativeInteger")
        .collect();
    assert_eq!(negatives.len(), 1);
    assert_eq!(negatives[0]["j"], serde_json::json!([0, 2]));
}

#[test]
fn io_problems_exit_with_code_one() {
    let dir = TempDir::new().unwrap();
    let (code, _, stderr) = run(&["analyze", "--matrix", "/nonexistent/mat.json"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("cannot read"), "stderr was: {stderr}");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, b"not json").unwrap();
    let (code, _, stderr) = run(&["analyze", "--matrix", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stderr.contains("cannot parse"), "stderr was: {stderr}");

    // --out pointing into a missing directory is an I/O failure too.
    let mat = write_json(dir.path(), "mat.json", &canned_matrix(0.0));
    let (code, _, _) = run(&[
        "analyze",
        "--matrix",
        mat.to_str().unwrap(),
        "--out",
        "/nonexistent/dir/out.json",
    ]);
    assert_eq!(code, 1);
}

#[test]
fn usage_errors_exit_with_code_one() {
    let (code, _, _) = run(&["no-such-command"]);
    assert_eq!(code, 1, "unknown subcommands are usage errors, not verdicts");
    let (code, _, _) = run(&["--help"]);
    assert_eq!(code, 0);
    let (code, _, _) = run(&["--version"]);
    assert_eq!(code, 0);
    let (code, _, _) = run(&["analyze"]);
    assert_eq!(code, 1, "missing required flag");
}

#[test]
fn obstructed_realization_signals_the_verdict_in_the_exit_code() {
    let dir = TempDir::new().unwrap();
    let mat = write_json(dir.path(), "mat.json", &canned_matrix(0.0));
    let jet = write_json(dir.path(), "h.json", &canned_jet());
    let (code, json, _) = run(&[
        "realize",
        "--jet",
        jet.to_str().unwrap(),
        "--matrix",
        mat.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    let result = &json.unwrap()["result"];
    assert_eq!(result["verdict"], "Obstructed");
    assert_eq!(result["resonances"][0]["j"], serde_json::json!([0, 2]));
}

#[test]
fn counterexample_command_reproduces_and_resolves_the_obstruction() {
    let (code, json, _) = run(&["counterexample"]);
    assert_eq!(code, 0, "the obstruction is the expected verdict");
    let result = &json.unwrap()["result"];
    assert_eq!(result["verdict"], "Obstructed");
    assert_eq!(result["obstruction_reproduced"], true);
    assert_eq!(result["divisors_nonzero"], true);

    let (code, json, _) = run(&["counterexample", "--shift", "0", "--nu", "2"]);
    assert_eq!(code, 0, "a low-order attempt hits the same wall");
    assert_eq!(json.unwrap()["result"]["verdict"], "Obstructed");

    let (code, json, _) = run(&["counterexample", "--shift", "1"]);
    assert_eq!(code, 0, "the shifted spectrum is realizable");
    let result = &json.unwrap()["result"];
    assert_eq!(result["verdict"], "Realizable");
    assert!(result["holonomy_linear_error"].as_f64().unwrap() <= 1e-9);
}

/// Full pipeline over files: realize against the shifted matrix, feed the
/// certificate to verify, holonomy, and contraction.
#[test]
fn certificates_flow_from_realize_into_the_checking_commands() {
    let dir = TempDir::new().unwrap();
    let mat = write_json(dir.path(), "mat.json", &canned_matrix(1.0));
    let jet = write_json(dir.path(), "h.json", &canned_jet());
    let saved = dir.path().join("realize_out.json");
    let (code, json, _) = run(&[
        "realize",
        "--jet",
        jet.to_str().unwrap(),
        "--matrix",
        mat.to_str().unwrap(),
        "--out",
        saved.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let envelope = json.unwrap();
    assert_eq!(envelope["result"]["verdict"], "Realizable");

    // The --out file carries the same envelope that went to stdout.
    let on_disk: Value =
        serde_json::from_slice(&std::fs::read(&saved).unwrap()).unwrap();
    assert_eq!(on_disk["result"], envelope["result"]);

    let cert = &envelope["result"]["certificate"];
    let cert_path = write_json(dir.path(), "cert.json", cert);
    let sys_path = write_json(dir.path(), "sys.json", &cert["system"]);
    let sd_path = write_json(dir.path(), "sd.json", &cert["spectral"]);

    let cert_str = cert_path.to_str().unwrap();
    let (code, json, _) = run(&[
        "verify", "--cert", cert_str, "--cert", cert_str, "--jobs", "2",
    ]);
    assert_eq!(code, 0);
    let result = &json.unwrap()["result"];
    assert_eq!(result["pass"], true);
    assert_eq!(result["cases"].as_array().unwrap().len(), 2);
    assert!(result["max_coeff_error"].as_f64().unwrap() <= 1e-6);

    let nu = cert["nu"].as_u64().unwrap().to_string();
    let (code, json, _) = run(&[
        "holonomy",
        "--system",
        sys_path.to_str().unwrap(),
        "--nu",
        &nu,
        "--x0=-1,0",
    ]);
    assert_eq!(code, 0);
    let result = &json.unwrap()["result"];
    assert_eq!(result["basepoint"], serde_json::json!([-1.0, 0.0]));

    let (code, json, _) = run(&[
        "contraction",
        "--system",
        sys_path.to_str().unwrap(),
        "--spectral",
        sd_path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(json.unwrap()["result"]["pass"], true);
}

#[test]
fn verify_flags_a_corrupted_certificate() {
    let dir = TempDir::new().unwrap();
    let mat = write_json(dir.path(), "mat.json", &canned_matrix(1.0));
    let jet = write_json(dir.path(), "h.json", &canned_jet());
    let (code, json, _) = run(&[
        "realize",
        "--jet",
        jet.to_str().unwrap(),
        "--matrix",
        mat.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let mut cert = json.unwrap()["result"]["certificate"].clone();

    // Perturb one holonomy coefficient past any integration tolerance.
    cert["input_jet"]["components"][0]["terms"][0]["re"] = serde_json::json!(0.5);
    let cert_path = write_json(dir.path(), "cert.json", &cert);
    let (code, json, _) = run(&["verify", "--cert", cert_path.to_str().unwrap()]);
    assert_eq!(code, 2, "a contrary verdict, not an error");
    assert_eq!(json.unwrap()["result"]["pass"], false);
}

#[test]
fn identical_runs_are_identical_except_for_wall_time() {
    let mut first = None;
    for _ in 0..2 {
        let (code, json, _) = run(&["counterexample", "--shift", "1", "--seed", "123"]);
        assert_eq!(code, 0);
        let mut envelope = json.unwrap();
        envelope["manifest"]["wall_time_s"] = Value::Null;
        match &first {
            None => first = Some(envelope),
            Some(prev) => assert_eq!(prev, &envelope, "same inputs and seed, same JSON"),
        }
    }
}

#[test]
fn demo_command_accepts_negative_exponents_and_round_trips() {
    let (code, json, _) = run(&["demo-linearizable", "--mu2", "-2"]);
    assert_eq!(code, 0);
    let result = &json.unwrap()["result"];
    assert_eq!(result["verdict"], "Realizable");
    assert!(result["round_trip_error"].as_f64().unwrap() <= 1e-6);
    assert_eq!(result["normalized_system_is_linear"], true);

    // With the nonlinear coefficient off, the realized system is linear.
    let (code, json, _) = run(&["demo-linearizable", "--a-coeff", "0"]);
    assert_eq!(code, 0);
    let result = &json.unwrap()["result"];
    assert_eq!(result["certificate"]["system"]["G"].as_array().unwrap().len(), 0);
}
