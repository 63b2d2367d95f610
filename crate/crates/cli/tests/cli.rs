//! End-to-end runs of the `fbct` binary: documented outputs, exit codes and
//! JSON schema conformance.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fbct(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbct"))
        .args(args)
        .env_remove("FBCT_DEFAULT_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn assert_schema(schema: &str, v: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(schema);
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

fn json_out(args: &[&str]) -> Value {
    let o = fbct(args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn uniformity_lines() {
    let o = fbct(&["fbct", "--field", "2^6", "--fn", "swap:0,1"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("second_order_uniformity: 8\n"));
    let o = fbct(&["fbct", "--field", "29", "--fn", "swap:0,1"]);
    assert!(stdout(&o).contains("second_order_uniformity: 4\n"));
}

#[test]
fn small_inverse_matrix() {
    let o = fbct(&["fbct", "--field", "2^2", "--fn", "inv"]);
    let text = stdout(&o);
    let grid: Vec<&str> = text.lines().filter(|l| !l.contains(':')).collect();
    assert_eq!(grid, vec!["4 4 4 4"; 4]);
}

#[test]
fn spectrum_text_is_counts_object() {
    let o = fbct(&["spectrum", "--field", "2^5", "--fn", "swap:0,1"]);
    assert_eq!(stdout(&o), "{\"0\":870,\"4\":60}\n");
    let all = fbct(&["spectrum", "--field", "2^5", "--fn", "swap:0,1", "--scope", "all"]);
    let v: Value = serde_json::from_str(stdout(&all).trim()).unwrap();
    assert_eq!(v["32"], 3 * 32 - 2);
}

#[test]
fn json_outputs_match_schemas() {
    let v = json_out(&["fbct", "--field", "2^4", "--fn", "swap:1,g", "--gamma", "5", "--format", "json"]);
    assert_schema("fbct.schema.json", &v);
    assert_eq!(v["matrix"].as_array().unwrap().len(), 16);

    let v = json_out(&["spectrum", "--field", "2^6", "--fn", "swap:0,1", "--format", "json"]);
    assert_schema("spectrum.schema.json", &v);
    assert_eq!(v["counts"]["4"], 114);

    let v = json_out(&["ddt", "--field", "2^5", "--format", "json"]);
    assert_schema("ddt.schema.json", &v);
    assert_eq!(v["differential_uniformity"], 2);

    let v = json_out(&["closedform", "--field", "2^6", "--fn", "swap:1,g", "--gamma", "6", "--a", "6", "--b", "23", "--format", "json"]);
    assert_schema("closedform.schema.json", &v);
    assert_eq!((v["value"].clone(), v["oracle"].clone()), (Value::from(4), Value::from(4)));

    for field in ["2^5", "3^3"] {
        let v = json_out(&["closedform", "--field", field, "--list-gamma-classes", "--format", "json"]);
        assert_schema("gamma-classes.schema.json", &v);
    }

    let v = json_out(&["verify", "--experiment", "inv01-odd", "--field", "37", "--format", "json"]);
    assert_schema("report.schema.json", &v);
    assert_eq!(v["status"], "pass");
}

#[test]
fn verify_pass_and_claim_failure_codes() {
    let o = fbct(&["verify", "--experiment", "remark-conjecture", "--field", "2^7"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("status: pass"));

    let o = fbct(&["verify", "--experiment", "p3-conjecture", "--field", "3^3", "--format", "json"]);
    assert_eq!(code(&o), 4);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_schema("report.schema.json", &v);
    assert_eq!(v["status"], "fail");
}

#[test]
fn sweep_reports_small_fields() {
    let o = fbct(&["sweep", "--limit", "130", "--format", "json"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_schema("report.schema.json", &v);
    assert_eq!(v["data"]["per_field"]["11^2:7,1,1"]["7"], 1);
    assert_eq!(code(&o), if v["status"] == "pass" { 0 } else { 4 });
}

#[test]
fn exit_codes() {
    assert_eq!(code(&fbct(&["--help"])), 0);
    assert_eq!(code(&fbct(&["--version"])), 0);
    assert_eq!(code(&fbct(&["fbct", "--bogus"])), 1);
    assert_eq!(code(&fbct(&["fbct", "--field", "4^2"])), 1);
    assert_eq!(code(&fbct(&["fbct", "--field", "2^3", "--fn", "swap:3,3"])), 1);
    assert_eq!(code(&fbct(&["fbct", "--field", "2^3", "--fn", "swap:1,9"])), 1);
    assert_eq!(code(&fbct(&["fbct", "--field", "2^13"])), 2);
    assert_eq!(code(&fbct(&["fbct", "--field", "2^3", "--fn", "table:/definitely/missing"])), 3);
    assert_eq!(code(&fbct(&["fbct", "--field", "2^3", "--out", "/definitely/missing/dir/x.csv"])), 3);
}

#[test]
fn table_files_and_output_files() {
    let dir = tempfile::tempdir().unwrap();
    let sbox = dir.path().join("present.txt");
    let present = "# field: 2^4:1,1,0,0,1\n# PRESENT S-box\n12 5 6 11 9 0 10 13 3 14 15 8 4 7 1 2\n";
    std::fs::write(&sbox, present).unwrap();
    let csv = dir.path().join("m.csv");
    let table = format!("table:{}", sbox.display());
    let o = fbct(&["fbct", "--fn", &table, "--format", "csv", "--out", csv.to_str().unwrap(), "--nontrivial-only"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("a,b,value\n"));
    assert_eq!(text.lines().count(), 1 + 15 * 14);
    assert!(stdout(&o).contains("second_order_uniformity:"));
}

#[test]
fn workers_do_not_change_output() {
    let run = |w: &str| {
        let o = fbct(&["fbct", "--field", "2^6", "--fn", "swap:1,7", "--format", "csv", "--workers", w]);
        assert_eq!(code(&o), 0);
        o.stdout
    };
    let one = run("1");
    assert_eq!(run("4"), one);
    assert_eq!(run("8"), one);
}
