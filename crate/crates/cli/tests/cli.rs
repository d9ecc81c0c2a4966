use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stardmp"))
}

fn scratch(name: &str, contents: &Value) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("stardmp-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string(contents).unwrap()).unwrap();
    path
}

fn real(rows: usize, cols: usize, values: &[f64]) -> Value {
    json!({
        "rows": rows,
        "cols": cols,
        "data": values.iter().map(|&v| [v, 0.0]).collect::<Vec<_>>(),
    })
}

fn run(args: &[&str]) -> (i32, Value, Output) {
    let out = bin().args(args).output().expect("binary runs");
    let report: Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    (out.status.code().unwrap(), report, out)
}

fn entries(m: &Value) -> Vec<f64> {
    m["data"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|z| z.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()))
        .collect()
}

#[test]
fn compute_drazin_of_jordan_block_is_zero() {
    let f = scratch("j2.json", &real(2, 2, &[0.0, 1.0, 0.0, 0.0]));
    let (code, report, _) = run(&["compute", "drazin", f.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(entries(&report["result"]).iter().all(|&x| x == 0.0));
    assert_eq!(report["index"], json!(2));
    assert_eq!(report["certificate"]["pass"], json!(true));
}

#[test]
fn compute_group_of_jordan_block_has_no_inverse() {
    let f = scratch("j2g.json", &real(2, 2, &[0.0, 1.0, 0.0, 0.0]));
    let (code, report, out) = run(&["compute", "group", f.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(report["error"].is_string());
    assert!(!out.stderr.is_empty());
}

#[test]
fn compute_pseudo_core() {
    let f = scratch("p.json", &real(2, 2, &[1.0, 1.0, 0.0, 0.0]));
    let (code, report, _) = run(&["compute", "pcore", f.to_str().unwrap()]);
    assert_eq!(code, 0);
    let x = entries(&report["result"]);
    let want = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    assert!(x.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12), "{x:?}");
}

#[test]
fn malformed_input_is_a_usage_error_with_json_report() {
    let f = scratch("bad.json", &json!({"rows": 2, "cols": 2, "data": [[1.0, 0.0]]}));
    let (code, report, _) = run(&["compute", "mp", f.to_str().unwrap()]);
    assert_eq!(code, 64);
    assert_eq!(report["exit_code"], json!(64));
    let (code, _, _) = run(&["compute", "mp", "/nonexistent/file.json"]);
    assert_eq!(code, 64);
    let (code, report, _) = run(&["verify"]);
    assert_eq!(code, 64);
    assert!(report["error"].is_string());
    let (code, _, _) = run(&["verify", "T9.9", "--random", "1"]);
    assert_eq!(code, 64);
    let (code, _, _) = run(&["--eq-tol", "-1", "fuzz", "--count", "1"]);
    assert_eq!(code, 64);
}

#[test]
fn check_predicates() {
    let herm = scratch("h.json", &real(2, 2, &[2.0, 1.0, 1.0, 3.0]));
    let (code, report, _) = run(&["check", "stardmp", herm.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(report["verdict"], json!(true));
    assert_eq!(report["consistent"], json!(true));

    let p = scratch("p2.json", &real(2, 2, &[1.0, 1.0, 0.0, 0.0]));
    let (code, report, _) = run(&["check", "stardmp", p.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(report["verdict"], json!(false));

    let e = scratch("e.json", &real(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    let (code, report, _) = run(&["check", "projection", e.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(report["projection"], json!(true));
    let (code, _, _) = run(&["check", "ep", p.to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn verify_random_batches() {
    let (code, report, _) = run(&["verify", "T3.2", "--random", "100", "--dim", "4", "--seed", "1"]);
    assert_eq!(code, 0);
    assert_eq!(report["instances"], json!(100));
    assert_eq!(report["failed"], json!(0));
    let (code, report, _) = run(&["verify", "T4.6", "--random", "50", "--dim", "3", "--seed", "7"]);
    assert_eq!(code, 0);
    assert_eq!(report["failed"], json!(0));
}

#[test]
fn verify_file_with_orthogonal_hermitian_pair() {
    let pair = json!({
        "a": real(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        "b": real(2, 2, &[0.0, 0.0, 0.0, 2.0]),
    });
    let f = scratch("pair.json", &pair);
    let (code, report, _) = run(&["verify", "L2.1", "--file", f.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(report["passed"], json!(1));
    // a pair is not a block instance
    let (code, _, _) = run(&["verify", "T4.2", "--file", f.to_str().unwrap()]);
    assert_eq!(code, 64);
}

#[test]
fn gen_output_round_trips_through_verify() {
    for theorem in ["L2.2", "T2.3", "L4.1", "C4.5"] {
        let (code, report, _) = run(&["gen", theorem, "--dim", "3", "--seed", "4"]);
        assert_eq!(code, 0, "{theorem}");
        assert_eq!(report["hypotheses_verified"], json!(true));
        assert_eq!(report["theorem"], json!(theorem));
        assert_eq!(report["seed"], json!(4));
        let f = scratch(&format!("gen-{theorem}.json"), &report);
        let (code, report, _) = run(&["verify", theorem, "--file", f.to_str().unwrap()]);
        assert_eq!(code, 0, "{theorem}: {report}");
    }
}

#[test]
fn fuzz_on_scalars_is_trivially_consistent() {
    let (code, report, _) = run(&["fuzz", "--count", "1", "--dim", "1"]);
    assert_eq!(code, 0);
    assert_eq!(report["inconsistent"], json!(0));
    assert_eq!(report["near_miss"]["instances"], json!(0));
}

#[test]
fn reports_are_deterministic() {
    let args = ["fuzz", "--count", "60", "--dim", "3", "--seed", "9", "--near-miss", "5"];
    let (_, _, first) = run(&args);
    let (_, _, second) = run(&args);
    assert_eq!(first.stdout, second.stdout);
    let args = ["verify", "C2.4", "--random", "20", "--dim", "5", "--seed", "3"];
    let (_, _, first) = run(&args);
    let (_, _, second) = run(&args);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn exit_code_follows_from_report() {
    let tol = stardmp_core::Tolerance::default();
    let report = stardmp_cli::verify_random(stardmp_core::TheoremId::T23, 10, 3, 2, &tol);
    assert_eq!(report.passed + report.failed, report.instances);
    let v = serde_json::to_value(&report).unwrap();
    let derived = if v["inconsistent"].as_u64().unwrap() > 0 {
        3
    } else if v["failed"].as_u64().unwrap() > 0 {
        1
    } else {
        0
    };
    assert_eq!(report.exit_code(), derived);
    let out = stardmp_cli::run(["stardmp", "verify", "T2.3", "--random", "10", "--dim", "3", "--seed", "2"]);
    assert_eq!(out.report, v);
    assert_eq!(out.code, derived);
}
