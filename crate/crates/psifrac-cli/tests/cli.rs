//! End-to-end checks of the binary: JSON report schema, CSV contract, exit
//! codes, and the bundled demo runs.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_psifrac"))
}

fn problems_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

fn run_json(args: &[&str]) -> (Output, Value) {
    let out = bin().args(args).output().expect("binary runs");
    let stdout = String::from_utf8_lossy(&out.stdout);
    let v: Value = serde_json::from_str(&stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}):\n{stdout}"));
    (out, v)
}

fn results(v: &Value) -> &Value {
    &v["results"]
}

#[test]
fn schema_is_stable() {
    let (out, v) = run_json(&["reproduce", "example1"]);
    assert!(out.status.success());
    assert_eq!(v["version"], "psifrac-report/1");
    assert!(v["problem_hash"].is_string());
    assert!(v["grid_meta"]["n_cells"].is_number());
    assert!(v["window"]["lo"].is_number());
    assert!(v["results"].is_object());

    // every report carries the same five keys; window is null where no
    // residual window applies
    let problem = problems_dir().join("example1.prob");
    for args in [
        vec!["terminal-time", "--problem", problem.to_str().unwrap()],
        vec!["legendre", "--problem", problem.to_str().unwrap()],
        vec!["reproduce", "counterexample"],
    ] {
        let (out, v) = run_json(&args);
        assert!(out.status.success());
        for key in ["version", "problem_hash", "grid_meta", "window", "results"] {
            assert!(
                v.get(key).is_some(),
                "report for {args:?} is missing `{key}`"
            );
        }
    }
}

#[test]
fn reproduce_example1_values() {
    let (_, v) = run_json(&["reproduce", "example1"]);
    let r = results(&v);
    assert!((r["J_star"].as_f64().unwrap() + 2.0 / 3.0).abs() <= 1e-3);
    assert_eq!(r["T_star"].as_f64().unwrap(), 1.0);
    assert!(r["el_max"].as_f64().unwrap() <= 1e-2);
}

#[test]
fn reproduce_example3_psi1_alpha_star() {
    let (_, v) = run_json(&["reproduce", "example3", "--psi", "psi1"]);
    let r = results(&v);
    let alpha = r["alpha_star"].as_f64().unwrap();
    assert!((alpha - 0.2677215415754697).abs() <= 1e-3, "alpha = {alpha}");
}

#[test]
fn el_check_trivial_lagrangian_is_exactly_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trivial.prob");
    std::fs::write(
        &path,
        r#"
[problem]
kind = fundamental
alpha = 0.5
interval = 0 1.5
x_a = 0

[psi]
expr = "t"

[lagrangian]
L = "t^2 - 1"

[candidate]
x = "s"

[grid]
N = 256
"#,
    )
    .unwrap();
    let (out, v) = run_json(&[
        "el-check",
        "--problem",
        path.to_str().unwrap(),
        "--terminal",
        "1.2",
    ]);
    assert!(out.status.success());
    assert_eq!(results(&v)["el_max"].as_f64().unwrap(), 0.0);
}

#[test]
fn el_check_emits_node_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("nodes.csv");
    let problem = problems_dir().join("example1.prob");
    let (out, _) = run_json(&[
        "el-check",
        "--problem",
        problem.to_str().unwrap(),
        "--csv",
        csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,psi_t,el_residual,window_flag");
    // one row per work-grid node (N + 1)
    assert_eq!(lines.count(), 2049);
    // both in-window and out-of-window rows appear
    assert!(csv.contains(",1\n"));
    assert!(csv.contains(",,0\n"));
}

#[test]
fn bad_problem_file_exits_2_with_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.prob");
    std::fs::write(&path, "[problem]\nbogus = 1\n").unwrap();
    let out = bin()
        .args(["el-check", "--problem", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let v: Value = serde_json::from_str(&stderr).expect("stderr carries JSON");
    assert_eq!(v["error"]["class"], "validation");
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("no-root.prob");
    // L[x](t) = 1 never crosses zero: terminal-time solve must fail
    std::fs::write(
        &path,
        r#"
[problem]
kind = fundamental
alpha = 0.5
interval = 0 1.5
x_a = 0

[psi]
expr = "t"

[lagrangian]
L = "1 + 0*t"

[candidate]
x = "s"

[grid]
N = 128
"#,
    )
    .unwrap();
    let out = bin()
        .args(["terminal-time", "--problem", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let v: Value = serde_json::from_str(&stderr).unwrap();
    assert_eq!(v["error"]["class"], "numerical");
}

#[test]
fn terminal_time_and_legendre_on_example1() {
    let problem = problems_dir().join("example1.prob");
    let (_, v) = run_json(&["terminal-time", "--problem", problem.to_str().unwrap()]);
    assert!((results(&v)["t_star"].as_f64().unwrap() - 1.0).abs() <= 1e-9);

    let (_, v) = run_json(&["legendre", "--problem", problem.to_str().unwrap()]);
    assert_eq!(results(&v)["legendre_min"].as_f64().unwrap(), 2.0);
    assert_eq!(results(&v)["passes"], Value::Bool(true));
}

#[test]
fn iso_check_example2_file() {
    let problem = problems_dir().join("example2.prob");
    let (out, v) = run_json(&["iso-check", "--problem", problem.to_str().unwrap()]);
    assert!(out.status.success());
    let r = results(&v);
    assert_eq!(r["lambda"].as_f64().unwrap(), -2.0);
    assert!(r["constraint_defect"].as_f64().unwrap() <= 1e-6);
    assert!(r["el_max"].as_f64().unwrap() <= 1e-2);
}

#[test]
fn sweep_alpha_minimizer_is_near_the_root() {
    let problem = problems_dir().join("example3-psi1.prob");
    let (out, v) = run_json(&[
        "sweep-alpha",
        "--problem",
        problem.to_str().unwrap(),
        "--samples",
        "25",
    ]);
    assert!(out.status.success());
    let r = results(&v);
    let step = r["step"].as_f64().unwrap();
    let min_alpha = r["min_sample"]["alpha"].as_f64().unwrap();
    assert!(
        (min_alpha - 0.2677215415754697).abs() <= step,
        "min sample {min_alpha} not within one step ({step}) of the root"
    );
    assert_eq!(r["samples"].as_array().unwrap().len(), 25);
}

#[test]
fn delay_and_high_order_checks_run_clean() {
    let delay = problems_dir().join("delay-tracking.prob");
    let (out, v) = run_json(&[
        "delay-check",
        "--problem",
        delay.to_str().unwrap(),
        "--terminal",
        "1.0",
    ]);
    assert!(out.status.success());
    assert!(results(&v)["el_max"].as_f64().unwrap() <= 1e-2);

    let high = problems_dir().join("high-order.prob");
    let (out, v) = run_json(&[
        "highorder-check",
        "--problem",
        high.to_str().unwrap(),
        "--terminal",
        "1.0",
    ]);
    assert!(out.status.success());
    assert!(results(&v)["el_max"].as_f64().unwrap() <= 1e-2);
}

#[test]
fn thread_cap_env_is_accepted() {
    let out = bin()
        .env("PSIFRAC_THREADS", "1")
        .args(["reproduce", "counterexample"])
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn op_eval_power_rule() {
    let problem = problems_dir().join("example1.prob");
    let (_, v) = run_json(&[
        "op-eval",
        "--problem",
        problem.to_str().unwrap(),
        "--op",
        "caputo-left",
        "--at",
        "0.8",
    ]);
    // candidate x = s on the identity kernel: ᶜD^{0.5} x = t^{0.5}/Γ(1.5),
    // with Γ(1.5) = √π/2
    let expect = 0.8f64.sqrt() * 2.0 / std::f64::consts::PI.sqrt();
    let got = results(&v)["value"].as_f64().unwrap();
    assert!((got - expect).abs() <= 1e-6, "got {got}, expect {expect}");
}
