use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaudin-lab"))
        .args(args)
        .env_remove("GAUDIN_LAB_JOBS")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn records(v: &Value) -> &Vec<Value> {
    v["records"].as_array().unwrap()
}

#[test]
fn tensor_identities_are_exact() {
    let out = run(&["tensors", "--M", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = report(&out);
    assert_eq!(v["schemaVersion"], 1);
    assert_eq!(v["status"], "pass");
    assert!(records(&v).len() >= 6);
    for r in records(&v) {
        assert_eq!(r["exactZero"], true, "{r}");
    }
}

#[test]
fn zeroth_products_pass_for_two_sites() {
    let out = run(&["zeroth", "--M", "3", "--N", "2", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let v = report(&out);
    let recs = records(&v);
    assert_eq!(recs.len(), 4);
    assert!(recs.iter().all(|r| r["status"] == "pass"));
}

#[test]
fn corrupted_tensor_is_caught_first() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fault.json");
    std::fs::write(&cfg, r#"{"M": 3, "N": 2, "fault": {"t_entry": [0, 1, 2], "value": "7/3"}}"#).unwrap();
    let out = run(&["all", "--config", cfg.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(out.status.code(), Some(1));
    let v = report(&out);
    assert_eq!(v["status"], "fail");
    let first = records(&v).iter().find(|r| r["status"] == "fail").unwrap();
    assert!(first["name"].as_str().unwrap().starts_with("M=3:"), "{first}");
    assert!(first["anchor"].as_str().unwrap().contains("tensor"), "{first}");
}

#[test]
fn invalid_configs_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = [
        r#"{"M": 3, "bogus": 1}"#,
        r#"{"M": 2}"#,
        r#"{"N": 2, "levels": ["1", "-3"], "points": ["0", "1"]}"#,
        r#"{"N": 2, "levels": ["1", "2"], "points": ["0", "0"]}"#,
        r#"{"N": 2, "levels": ["x", "2"], "points": ["0", "1"]}"#,
        "not json",
    ];
    for (i, text) in bad.iter().enumerate() {
        let cfg = dir.path().join(format!("bad{i}.json"));
        std::fs::write(&cfg, text).unwrap();
        let out = run(&["tensors", "--config", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{text}");
        assert!(out.stdout.is_empty());
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(run(&["tensors", "--M", "9"]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
}

fn strip_runtime(mut v: Value) -> Value {
    for r in v["records"].as_array_mut().unwrap() {
        r.as_object_mut().unwrap().remove("runtimeMs");
    }
    v
}

#[test]
fn same_seed_same_report() {
    let args = ["oper", "--M", "3", "--N", "2", "--seed", "11", "--draws", "2"];
    let a = strip_runtime(report(&run(&args)));
    let b = strip_runtime(report(&run(&args)));
    assert_eq!(a, b);
    let c = Command::new(env!("CARGO_BIN_EXE_gaudin-lab"))
        .args(args)
        .env("GAUDIN_LAB_JOBS", "3")
        .output()
        .unwrap();
    assert_eq!(a, strip_runtime(report(&c)));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = run(&["stokes", "--M", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "stokes");
    assert_eq!(v["status"], "pass");
}

#[test]
fn known_false_statements_fail_honestly() {
    let out = run(&["bethe", "--M", "3", "--N", "2", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(1));
    let v = report(&out);
    for r in records(&v) {
        let name = r["name"].as_str().unwrap();
        if name.ends_with("c_2 = -M") {
            assert_eq!(r["status"], "fail");
        }
        if name.ends_with("off-shell control") {
            assert_eq!(r["status"], "pass");
        }
    }
}
