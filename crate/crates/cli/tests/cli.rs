use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn corpus(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "dsl", "corpus", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seldiff")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let out = run(&full);
    let v = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    });
    (out.status.code().unwrap(), v)
}

#[test]
fn demo_prints_the_five_golden_rows() {
    let out = run(&["demo", "figure1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(2).map(|l| l.split_whitespace().collect()).collect();
    let want = [
        ["relu", "0", "0", "0", "0"],
        ["relu2", "0", "1", "1", "1"],
        ["relu3", "0", "0.5", "0.5", "0.5"],
        ["zero", "0", "1", "1", "1"],
        ["id-zero", "0", "0", "0", "0"],
    ];
    assert_eq!(rows.len(), 5);
    for (r, w) in rows.iter().zip(want) {
        assert_eq!(r.as_slice(), w.as_slice());
    }
}

#[test]
fn relu_gradient_in_both_modes() {
    let (code, v) = json(&["grad", &corpus("valid/relu.sel"), "--fn", "relu", "--at", "0", "--mode", "both"]);
    assert_eq!(code, 0);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["status"], "pass");
    assert_eq!(v["result"]["forward"], serde_json::json!([0.0]));
    assert_eq!(v["result"]["backward"], serde_json::json!([0.0]));
    assert_eq!(v["result"]["discrepancy"], 0.0);
}

#[test]
fn backprop_identity_check_passes() {
    let (code, v) = json(&["check-lemma1", "--p", "3", "--m", "10", "--trials", "100"]);
    assert_eq!(code, 0);
    assert!(v["result"]["max_discrepancy"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn field_of_relu_at_the_kink() {
    let (code, v) = json(&["dfield", &corpus("valid/relu.sel"), "--fn", "relu", "--at", "0"]);
    assert_eq!(code, 0);
    let mut g: Vec<f64> = v["result"]["generators"].as_array().unwrap().iter().map(|g| g[0].as_f64().unwrap()).collect();
    g.sort_by(f64::total_cmp);
    assert_eq!(g, vec![0.0, 1.0]);
    assert_eq!(v["result"]["min_norm"]["norm"], 0.0);
}

#[test]
fn failed_expectation_exits_one_with_a_failure_record() {
    let file = corpus("valid/kink_family.sel");
    let ok = run(&["classify", &file, "--fn", "id_minus_zero", "--at", "0", "--expect", "artificial-critical"]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = run(&["classify", &file, "--fn", "id_minus_zero", "--at", "0", "--expect", "clarke-critical"]);
    assert_eq!(bad.status.code(), Some(1));
    let record: Value = serde_json::from_str(String::from_utf8_lossy(&bad.stderr).lines().last().unwrap()).unwrap();
    assert_eq!(record["schema_version"], 1);
    assert_eq!(record["status"], "fail");
    assert_eq!(record["command"], "classify");
    assert_eq!(record["failures"][0]["contract"], "expected classification");
}

#[test]
fn usage_and_file_errors_exit_two() {
    assert_eq!(run(&["grad", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["eval", "/nonexistent.sel", "--fn", "f", "--at", "0"]).status.code(), Some(2));
    let wrong_arity = run(&["eval", &corpus("valid/relu.sel"), "--fn", "relu", "--at", "0", "1"]);
    assert_eq!(wrong_arity.status.code(), Some(2));
}

#[test]
fn compile_errors_are_rendered_with_positions() {
    let file = corpus("invalid/dangling_plus.sel");
    let out = run(&["eval", &file, "--fn", "bad", "--at", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("dangling_plus.sel:2:"), "{err}");
    assert!(err.contains('^'), "{err}");
}

#[test]
fn verification_suites_pass_on_the_curved_guard() {
    for suite in ["ae", "chain", "closedgraph"] {
        let (code, v) = json(&["verify", &corpus("valid/curved.sel"), "--fn", "f", "--suite", suite, "--samples", "2000"]);
        assert_eq!(code, 0, "{suite}: {v}");
    }
}

#[test]
fn loop_integral_vanishes_for_every_rule() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("loop.json");
    std::fs::write(&path, "[[-1, 0.3], [1, -0.2], [0.5, 1], [-1, 0.3]]").unwrap();
    let (code, v) = json(&[
        "integrate",
        &corpus("valid/curved.sel"),
        "--fn",
        "f",
        "--path",
        path.to_str().unwrap(),
        "--rule",
        "all",
    ]);
    assert_eq!(code, 0);
    let reports = v["result"]["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 5);
    assert!(reports.iter().all(|r| r["estimate"].as_f64().unwrap().abs() <= 1e-8));
}

#[test]
fn full_batch_control_stays_at_the_trap_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv_dir = dir.path().join("out");
    let out = run(&[
        "--csv",
        csv_dir.to_str().unwrap(),
        "sgd",
        &corpus("valid/square_plus_zero.sel"),
        "--sum",
        "part1,part2",
        "--x0",
        "0",
        "--c",
        "1",
        "--iters",
        "500",
        "--stride",
        "1",
        "--full-batch",
    ]);
    assert!(out.status.success());
    let mut rdr = csv::Reader::from_path(csv_dir.join("sgd_trajectory.csv")).unwrap();
    let x: Vec<f64> = rdr.records().map(|r| r.unwrap()[2].parse().unwrap()).collect();
    assert_eq!(x.len(), 501);
    assert!(x.iter().all(|&v| v == 0.0));
}

#[test]
fn small_trap_experiment_avoids_the_artificial_point() {
    let (code, v) = json(&[
        "experiment",
        "traps",
        &corpus("valid/square_plus_zero.sel"),
        "--sum",
        "part1,part2",
        "--inits",
        "8",
        "--iters",
        "3000",
        "--target",
        "1",
        "--min-near-target",
        "0.99",
    ]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["summary"]["artificial_critical"], 0);
    assert_eq!(v["result"]["summary"]["runs"], 8);
}

#[test]
fn prescribed_shift_is_exact() {
    let (code, v) = json(&["prescribe", &corpus("valid/relu.sel"), "--fn", "relu", "--at", "0", "--shift", "3.5"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["derivative_before"], 0.0);
    assert_eq!(v["result"]["derivative_after"], 3.5);
    assert_eq!(v["result"]["values_changed"], 0);
}
