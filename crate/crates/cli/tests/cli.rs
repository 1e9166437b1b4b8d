use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const STAMP: &str = "2024-01-01T00:00:00Z";

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_icp-lab"));
    cmd.args(args).args(["--timestamp", STAMP]).env_remove("ICP_LAB_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid json")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn f(v: &Value) -> f64 {
    v.as_f64().expect("number")
}

#[test]
fn catalog_lists_expected_entries() {
    let v = json(&run(&["catalog", "list"]));
    assert_eq!(v["kind"], "ledger");
    let rows = v["payload"].as_array().unwrap();
    let find = |id: &str| rows.iter().find(|r| r["id"] == id).unwrap_or_else(|| panic!("{id} missing"));
    assert_eq!(find("polygon:3")["observed_dimension"], 3);
    assert_eq!(find("sbit")["observed_dimension"], 2);
    assert_eq!(find("hbit")["measurements"].as_array().unwrap().len(), 2);
}

#[test]
fn demos_report_expected_values() {
    let sbit = json(&run(&["demo", "sbit"]));
    assert_eq!(sbit["kind"], "certificate");
    assert_eq!(f(&sbit["payload"]["report"]["extractable"]), 2.0);
    assert_eq!(sbit["payload"]["report"]["violated"], true);

    let classical = json(&run(&["demo", "classical"]));
    let r = &classical["payload"]["report"];
    assert!((f(&r["extractable"]) - 1.0).abs() < 1e-6);
    assert_eq!(r["violated"], false);

    let rac = json(&run(&["demo", "qubit-rac"]));
    assert!((f(&rac["payload"]["report"]["extractable"]) - 0.798).abs() < 1e-3);
}

#[test]
fn unknown_demo_exits_2() {
    assert_eq!(code(&run(&["demo", "pr-box"])), 2);
}

fn reports_match(a: &Value, b: &Value) {
    for k in ["redundancy", "extractable", "bound", "margin"] {
        assert!((f(&a[k]) - f(&b[k])).abs() <= 1e-12, "{k}: {} vs {}", a[k], b[k]);
    }
    let (ga, gb) = (a["gains"].as_array().unwrap(), b["gains"].as_array().unwrap());
    assert_eq!(ga.len(), gb.len());
    for (x, y) in ga.iter().zip(gb) {
        assert!((f(x) - f(y)).abs() <= 1e-12);
    }
    assert_eq!(a["violated"], b["violated"]);
}

#[test]
fn every_demo_round_trips_through_eval() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["sbit", "hbit", "classical", "qubit-rac"] {
        let cert_path = dir.path().join(format!("{name}.json"));
        let c = run(&["demo", name, "--out", cert_path.to_str().unwrap()]);
        assert_eq!(code(&c), 0);
        let cert: Value = serde_json::from_str(&std::fs::read_to_string(&cert_path).unwrap()).unwrap();

        let report_path = dir.path().join(format!("{name}-report.json"));
        let e = run(&["eval", "--ensemble", cert_path.to_str().unwrap(), "--out", report_path.to_str().unwrap()]);
        assert_eq!(code(&e), 0, "{}", String::from_utf8_lossy(&e.stderr));
        let rep: Value = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
        reports_match(&cert["payload"]["report"], &rep["payload"]["report"]);

        let again = json(&run(&["eval", "--ensemble", report_path.to_str().unwrap()]));
        reports_match(&rep["payload"]["report"], &again["payload"]["report"]);
    }
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn unnormalized_ensemble_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "bad.json",
        "{\n  \"theory\": \"classical-bit\",\n  \"entries\": [\n    {\"p\": 0.5, \"state\": [1.0, 0.0], \"registers\": [0, 0]},\n    {\"p\": 0.6, \"state\": [0.0, 1.0], \"registers\": [1, 1]}\n  ]\n}\n",
    );
    let out = run(&["eval", "--ensemble", &path, "--measurements", "X,Z"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");
}

#[test]
fn malformed_json_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "broken.json", "{\n  \"theory\": \"sbit\",\n  \"entries\": [,]\n}\n");
    let out = run(&["eval", "--ensemble", &path, "--measurements", "X,Z"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.json:3:"));
}

#[test]
fn missing_ensemble_file_exits_3() {
    assert_eq!(code(&run(&["eval", "--ensemble", "/nonexistent/e.json", "--measurements", "X,Z"])), 3);
}

#[test]
fn theory_flag_must_match_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.json");
    run(&["demo", "sbit", "--out", p.to_str().unwrap()]);
    assert_eq!(code(&run(&["eval", "--theory", "qubit", "--ensemble", p.to_str().unwrap()])), 2);
}

#[test]
fn qubit_rotated_pair_respects_bound() {
    let dir = tempfile::tempdir().unwrap();
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let mut entries = Vec::new();
    for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let (x, z) = (if i == 0 { c } else { -c }, if j == 0 { c } else { -c });
        let coords = [(1.0 + z) / 2.0, (1.0 - z) / 2.0, x / 2f64.sqrt(), 0.0];
        entries.push(serde_json::json!({"p": 0.25, "state": coords, "registers": [i, j]}));
    }
    let doc = serde_json::json!({"theory": "qubit", "entries": entries});
    let path = write(dir.path(), "q.json", &doc.to_string());
    let v = json(&run(&["eval", "--theory", "qubit", "--ensemble", &path, "--measurements", "X,Z(0.3)"]));
    let r = &v["payload"]["report"];
    assert_eq!(r["measurements"][1], "Z(0.3)");
    assert!(f(&r["extractable"]) <= 1.0 + 1e-9);
}

#[test]
fn polygon_scan_has_47_violating_rows() {
    let v = json(&run(&["scan", "polygon", "--n", "4:50"]));
    let rows = v["payload"].as_array().unwrap();
    assert_eq!(rows.len(), 47);
    assert!(rows.iter().all(|r| f(&r["extractable"]) > 1.0));
}

#[test]
fn mismatch_scan_flags_four_and_six() {
    let v = json(&run(&["scan", "mismatch", "--n", "4:13"]));
    let flagged: Vec<u64> = v["payload"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["mismatch"] == true)
        .map(|r| r["n"].as_u64().unwrap())
        .collect();
    assert_eq!(flagged, [4, 6]);
}

#[test]
fn composite_scan_first_violates_at_five() {
    let v = json(&run(&["scan", "composite", "--n", "1:8"]));
    let first = v["payload"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["violated"] == true)
        .map(|r| r["n"].as_u64().unwrap());
    assert_eq!(first, Some(5));
}

#[test]
fn pgnst_scan_rows_in_parameter_order() {
    let v = json(&run(&["scan", "pgnst", "--p", "2,3,inf", "--grid", "4000"]));
    let rows = v["payload"].as_array().unwrap();
    let ps: Vec<String> = rows.iter().map(|r| r["p"].to_string()).collect();
    assert_eq!(ps, ["2.0", "3.0", "\"inf\""]);
    assert!(f(&rows[2]["extractable"]) > 1.9);
}

#[test]
fn axioms_and_sweep_scans_run() {
    let v = json(&run(&["scan", "axioms", "--trials", "200"]));
    let rows = v["payload"].as_array().unwrap();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r["passed"] == true));

    let s = json(&run(&["scan", "sweep", "--points", "4", "--max-evals", "40000"]));
    let rows = s["payload"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| f(&r["extractable"]) <= 1.0 + 1e-9));
}

#[test]
fn invalid_range_exits_2() {
    assert_eq!(code(&run(&["scan", "polygon", "--n", "10:4"])), 2);
    assert_eq!(code(&run(&["scan", "polygon", "--n", "4:x"])), 2);
}

#[test]
fn unwritable_output_exits_3() {
    assert_eq!(code(&run(&["scan", "composite", "--out", "/nonexistent/dir/out.json"])), 3);
}

#[test]
fn csv_carries_versioned_header() {
    let out = run(&["scan", "composite", "--n", "1:3", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# icp-lab csv v1 scan/composite");
    assert!(lines[1].starts_with("# manifest: {"));
    assert_eq!(lines[2], "n,p_rec,encoded_bits,extractable,bound,violated");
    assert_eq!(lines.len(), 6);
}

#[test]
fn csv_rejected_for_certificates() {
    assert_eq!(code(&run(&["demo", "sbit", "--format", "csv"])), 2);
}

#[test]
fn output_is_byte_identical_across_runs_and_thread_counts() {
    let args = ["scan", "axioms", "--trials", "300", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    let serial = run_env(&args, &[("ICP_LAB_THREADS", "0")]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, serial.stdout);
}

#[test]
fn manifest_records_command_and_seed() {
    let v = json(&run(&["scan", "mismatch", "--n", "4:5", "--seed", "9"]));
    let m = &v["manifest"];
    assert_eq!(m["command"], "scan mismatch");
    assert_eq!(m["seed"], 9);
    assert_eq!(m["timestamp"], STAMP);
    assert_eq!(m["parameters"]["n"], "4:5");
}

#[test]
fn source_date_epoch_sets_timestamp() {
    let out = Command::new(env!("CARGO_BIN_EXE_icp-lab"))
        .args(["scan", "mismatch", "--n", "4:4"])
        .env("SOURCE_DATE_EPOCH", "0")
        .output()
        .unwrap();
    let v = json(&out);
    assert_eq!(v["manifest"]["timestamp"], "1970-01-01T00:00:00Z");
}
