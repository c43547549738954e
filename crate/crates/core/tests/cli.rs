use std::path::Path;
use std::process::{Command, Output};

use qrc::harness::definition::parse;
use qrc::harness::io::{read_dataset, read_nmse, read_plot};

fn qrc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrc")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn reservoir_dump_parses_back() {
    let out = qrc(&["reservoir", "dump", "--preset", "vigo5", "--seed", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# vigo5 seed=4\n"));
    assert_eq!(parse(&text).unwrap().n_qubits(), 5);
}

#[test]
fn task_gen_writes_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("t.csv");
    assert!(qrc(&["task", "gen", "--id", "IV", "--seed", "2", "--out", path(&file)]).status.success());
    let rows = read_dataset(&file).unwrap();
    assert_eq!(rows.len(), 80);
    assert_eq!(rows.iter().filter(|r| r.segment == "test").count(), 7);

    let file = dir.path().join("e.csv");
    let args = ["task", "gen", "--id", "I", "--dim", "8", "--problem", "emulation", "--out", path(&file)];
    assert!(qrc(&args).status.success());
    for k in 0..3 {
        assert_eq!(read_dataset(&dir.path().join(format!("e_seq{k}.csv"))).unwrap().len(), 74);
    }
}

#[test]
fn run_writes_artifacts_and_seed_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"tasks": ["III", "IV"], "dims": {"III": 6}, "sampler": "exact", "seeds": {"circuit": 1}}"#).unwrap();
    let out = dir.path().join("o");
    let res = qrc(&["run", "--config", path(&cfg), "--out", path(&out), "--seed", "9"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let nmse = read_nmse(&out.join("nmse.csv")).unwrap();
    assert_eq!(nmse.len(), 2);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seeds"]["circuit"], 9);
    let plot = read_plot(&out.join("plot_vigo5_taskIV_seq0.csv")).unwrap();
    assert_eq!(plot.len(), 30);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"eps": 2.0}"#).unwrap();
    let res = qrc(&["run", "--config", path(&bad)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("eps"));

    let res = qrc(&["run", "--config", path(&dir.path().join("missing.json"))]);
    assert_eq!(res.status.code(), Some(2));

    let zero = dir.path().join("zero.json");
    std::fs::write(&zero, r#"{"tasks": ["I"], "dims": {"I": 0}}"#).unwrap();
    assert_eq!(qrc(&["run", "--config", path(&zero)]).status.code(), Some(2));

    let out = dir.path().join("x.csv");
    assert_eq!(qrc(&["task", "gen", "--id", "I", "--dim", "0", "--out", path(&out)]).status.code(), Some(4));
    assert_eq!(qrc(&["check", "--suite", "bogus"]).status.code(), Some(2));
}

#[test]
fn check_suite_prints_csv() {
    let res = qrc(&["check", "--suite", "separation"]);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("suite,check,measured,relation,bound,margin,status"));
    assert!(lines.all(|l| l.starts_with("separation,") && l.ends_with(",pass")));
}
