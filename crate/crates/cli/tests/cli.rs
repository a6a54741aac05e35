use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpf-lab"))
        .current_dir(dir)
        .env_remove("RPF_LAB_WORKERS")
        .args(args)
        .output()
        .expect("rpf-lab runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn sample_is_reproducible_and_embeds_its_config() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sample", "--n", "8", "--replicas", "3", "--seed", "5", "--out", "a.csv"];
    assert!(lab(dir.path(), &args).status.success());
    let first = read(dir.path(), "a.csv");
    assert!(lab(dir.path(), &args).status.success());
    assert_eq!(first, read(dir.path(), "a.csv"));

    let mut lines = first.lines();
    let cfg: Value = serde_json::from_str(lines.next().unwrap().strip_prefix("# config: ").unwrap()).unwrap();
    assert_eq!(cfg["command"], "sample");
    assert_eq!(cfg["params"]["n"], 8);
    assert_eq!(cfg["params"]["seed"], 5);
    assert_eq!(lines.next(), Some("replica,index,x"));
    assert_eq!(lines.count(), 24);
}

#[test]
fn config_round_trip_reproduces_output() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let cases: [&[&str]; 3] = [
        &[
            "sample",
            "--n",
            "6",
            "--replicas",
            "2",
            "--scaling",
            "softedge",
            "--out",
            "s.csv",
        ],
        &[
            "correlate",
            "--n",
            "40",
            "--replicas",
            "20",
            "--lo",
            "-2",
            "--hi",
            "2",
            "--width",
            "0.5",
            "--format",
            "json",
            "--out",
            "c.json",
        ],
        &[
            "simulate",
            "--n",
            "4",
            "--t-end",
            "0.05",
            "--record-every",
            "5",
            "--out",
            "sim.csv",
        ],
    ];
    for args in cases {
        let out = args.last().unwrap();
        assert!(lab(p, args).status.success(), "{args:?}");
        let original = read(p, out);
        std::fs::rename(p.join(out), p.join("cfg")).unwrap();
        let cmd = args[0];
        let o = lab(p, &[cmd, "--config", "cfg"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(original, read(p, out), "{cmd}");
    }
}

#[test]
fn flags_override_config_and_unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("cfg.json"), r#"{"n": 7, "seed": 3}"#).unwrap();
    assert!(lab(
        p,
        &["sample", "--config", "cfg.json", "--seed", "4", "--format", "json"]
    )
    .status
    .success());
    let v: Value = serde_json::from_str(&read(p, "sample.json")).unwrap();
    assert_eq!(v["config"]["params"]["n"], 7);
    assert_eq!(v["config"]["params"]["seed"], 4);
    assert_eq!(v["replicas"][0].as_array().unwrap().len(), 7);

    std::fs::write(p.join("bad.json"), r#"{"n": 7, "colour": "red"}"#).unwrap();
    assert_eq!(lab(p, &["sample", "--config", "bad.json"]).status.code(), Some(2));

    std::fs::write(p.join("other.json"), r#"{"command": "simulate", "params": {}}"#).unwrap();
    assert_eq!(lab(p, &["sample", "--config", "other.json"]).status.code(), Some(2));
}

#[test]
fn validation_failures_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for args in [
        &["check-h4", "--replicas", "0"][..],
        &["sample", "--bogus"],
        &["sample", "--beta", "-1"],
        &["sample", "--out", "../escape.csv"],
        &["sample", "--out", "/tmp/abs.csv"],
        &["qg-probe", "--m-inside", "4"],
        &["kernel-table", "--format", "xml"],
        &["check-h3", "--format", "csv"],
        &["sample", "--workers", "0"],
        &["simulate", "--n", "3", "--init", "0,0,1"],
    ] {
        let o = lab(p, args);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    assert!(!p.join("../escape.csv").exists());
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("file"), "").unwrap();
    let o = lab(p, &["sample", "--out-dir", "file", "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_and_version_succeed() {
    let dir = tempfile::tempdir().unwrap();
    assert!(lab(dir.path(), &["--help"]).status.success());
    assert!(lab(dir.path(), &["--version"]).status.success());
    assert!(lab(dir.path(), &["lipschitz-check", "--help"]).status.success());
}

#[test]
fn stdout_output_and_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = lab(
        p,
        &[
            "kernel-table",
            "--lo",
            "0",
            "--hi",
            "0.2",
            "--step",
            "0.1",
            "--out",
            "-",
        ],
    );
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().nth(1), Some("x,y,kernel,ai,ai_prime"));
    assert_eq!(text.lines().count(), 5);

    assert!(lab(p, &["kernel-table", "--out-dir", "nested/dir"]).status.success());
    assert!(p.join("nested/dir/kernel-table.csv").exists());
}

#[test]
fn qg_probe_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(dir.path(), &["qg-probe", "--n", "40,80", "--outer", "4", "--out", "-"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["condition"], "QG-probe");
    assert_eq!(v["config"]["command"], "qg-probe");
    let table = v["table"].as_array().unwrap();
    assert_eq!(table.len(), 2);
    for row in table {
        for key in ["n", "m_inf", "p50", "p90", "max", "refinement_change"] {
            assert!(row.get(key).is_some(), "missing {key}");
        }
    }
    assert!(v["verdicts"]["uniform_in_n"]["pass"].is_boolean());
    assert!(v["verdicts"]["control_zero"].is_null());
}

#[test]
fn workers_do_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let args = ["check-h5", "--n", "30,60", "--replicas", "12", "--out", "-"];
    let one = lab(p, &[&args[..], &["--workers", "1"]].concat());
    let four = lab(p, &[&args[..], &["--workers", "4"]].concat());
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
}
