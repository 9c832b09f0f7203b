use std::path::PathBuf;
use std::process::{Command, Output};

fn data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn hazgate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hazgate"))
        .args(args)
        .current_dir(data().join(".."))
        .env_remove("HAZGATE_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_canonical_model() {
    let o = hazgate(&["validate", "data/mammobot.proc"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("8 actions, 10 decisions"));
}

#[test]
fn invalid_model_is_a_finding() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.proc");
    std::fs::write(&p, "process p\ninitial s\naction a \"A\" actor=A\naction b \"B\" actor=A\nfinal e\nedge s -> a\nedge a -> e\n").unwrap();
    let o = hazgate(&["validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("unreachable"), "{}", stdout(&o));
}

#[test]
fn usage_and_io_errors_exit_2() {
    assert_eq!(hazgate(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(hazgate(&["validate", "no/such/file.proc"]).status.code(), Some(2));
}

#[test]
fn shard_report_full_coverage() {
    let o = hazgate(&["shard-report", "data/mammobot.proc", "data/shard_catalog.csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("77 of 77 worksheet slots filled (100.0%), 0 drifted rows"));
}

#[test]
fn shard_report_reports_drift() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cat.csv");
    std::fs::write(&p, "node,guideword,deviation,causes,effects,detection,recommendation,hazard_level\nNo such node,Late,d,c,e,det,rec,Low\n").unwrap();
    let o = hazgate(&["shard-report", "data/mammobot.proc", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("drift: No such node/Late"));
}

#[test]
fn csv_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = hazgate(&["shard-report", "--format", "csv", "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    assert!(text.starts_with(b"node,high,medium,low,annoyance\n"));
}

#[test]
fn traceability_table_has_every_requirement() {
    let o = hazgate(&["stpa-report", "data/uca_catalog.csv", "data/cue_catalog.csv", "data/requirements.json"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for i in 1..=27 {
        assert!(out.contains(&format!("| R{i} |")), "R{i} missing");
    }
    assert!(out.contains("Methodology mismatches: 0"));
}

#[test]
fn simulate_uca28_shows_refusal() {
    let o = hazgate(&["simulate", "data/mammobot.proc", "data/exec_config.json", "data/scenarios/uca28.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("refused at"));
    assert!(stdout(&o).contains("BlockedSafely"));

    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let o = hazgate(&[
        "simulate",
        "data/mammobot.proc",
        "data/exec_config.json",
        "uca28",
        "--no-executive",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("R24 violated"));
    assert!(std::fs::read_to_string(trace).unwrap().lines().count() > 10);
}

#[test]
fn campaign_json_is_reproducible() {
    let run = || stdout(&hazgate(&["campaign", "-n", "50", "--seed", "7", "--format", "json"]));
    let a = run();
    assert_eq!(a, run());
    assert!(a.contains("\"seed\": 7"));
}

#[test]
fn reach_finds_counterexample_without_executive() {
    let o = hazgate(&["reach", "--depth", "4", "--no-executive"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("counterexample"));
    let o = hazgate(&["reach", "--depth", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn data_dir_override() {
    let empty = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hazgate"))
        .args(["validate"])
        .env("HAZGATE_DATA_DIR", empty.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_hazgate"))
        .args(["check", "--only", "1"])
        .env("HAZGATE_DATA_DIR", data())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("PASS criterion  1"));
}
