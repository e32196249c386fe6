use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ddks::datasets::{gen_pair, DatasetSpec, Family};
use ddks::harness::PowerReport;
use ddks::{ddks_statistic, RngSpec, Sample, TestOutcome};
use serde_json::Value;

fn ddks(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddks"))
        .args(args)
        .env("DDKS_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn write_pair(dir: &Path, d: usize, seed: u64) -> (PathBuf, PathBuf) {
    let (p, t) = gen_pair(&DatasetSpec::new(Family::Gvm, d, RngSpec::new(seed)), 30).unwrap();
    let (a, b) = (dir.join(format!("p{d}.csv")), dir.join(format!("t{d}.csv")));
    p.write_csv(&a).unwrap();
    t.write_csv(&b).unwrap();
    (a, b)
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn test_command_outputs_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = write_pair(dir.path(), 3, 1);
    let args = ["test", "--method", "ddks", "--p", path(&a), "--t", path(&b), "--alpha", "0.05", "--perms", "100", "--seed", "7"];
    let out = ddks(&args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 1);
    let outcome = TestOutcome::from_json(text.trim()).unwrap();
    let expected = ddks_statistic(&Sample::read_csv(&a).unwrap(), &Sample::read_csv(&b).unwrap()).unwrap();
    assert_eq!(outcome.statistic, expected);
    assert_eq!((outcome.n_p, outcome.n_t, outcome.d, outcome.seed), (30, 30, 3, 7));
    let p = outcome.p_value.unwrap();
    assert!(p >= 1.0 / 101.0 && p <= 1.0, "{p}");
    let json: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["config"]["common"]["alpha"], 0.05);

    let again = ddks(&args);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn runtime_flag_and_csv_format() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = write_pair(dir.path(), 2, 2);
    let out = ddks(&["test", "--method", "rdks", "--p", path(&a), "--t", path(&b), "--runtime", "--perms", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let outcome = TestOutcome::from_json(stdout(&out).trim()).unwrap();
    assert!(outcome.runtime_ns > 0);
    assert_eq!(outcome.p_value, None);

    let out = ddks(&["test", "--method", "onedks", "--p", path(&a), "--t", path(&b), "--format", "csv"]);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "method,statistic,p_value,n_p,n_t,d,seed,runtime_ns");
    assert!(lines.next().unwrap().starts_with("onedks,"));
}

#[test]
fn analytic_flag() {
    let out = ddks(&["test", "--dataset", "dvu", "--n", "40", "--analytic", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let outcome = TestOutcome::from_json(stdout(&out).trim()).unwrap();
    assert!(outcome.p_value.unwrap() < 0.05);
}

#[test]
fn dimension_mismatch_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _) = write_pair(dir.path(), 3, 1);
    let (_, wrong) = write_pair(dir.path(), 2, 1);
    let out = ddks(&["test", "--method", "ddks", "--p", path(&a), "--t", path(&wrong)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("DimensionMismatch"));
    assert!(stdout(&out).is_empty());

    let garbage = dir.path().join("bad.csv");
    std::fs::write(&garbage, "1,2,3\n4,x,6\n").unwrap();
    let out = ddks(&["test", "--p", path(&a), "--t", path(&garbage)]);
    assert_eq!(out.status.code(), Some(3));
    let out = ddks(&["test", "--p", path(&a), "--t", "/nonexistent/t.csv"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_errors() {
    assert_eq!(ddks(&[]).status.code(), Some(2));
    assert_eq!(ddks(&["test", "--alpha", "0"]).status.code(), Some(2));
    assert_eq!(ddks(&["power", "--dataset", "nope"]).status.code(), Some(2));
    assert_eq!(ddks(&["shrink", "--dataset", "dvu", "--repeats", "1"]).status.code(), Some(2));
    assert_eq!(ddks(&["timing", "--reps", "2"]).status.code(), Some(2));
    assert_eq!(ddks(&["--help"]).status.code(), Some(0));
}

fn lines_of_kind(text: &str, kind: &str) -> Vec<Value> {
    text.lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .filter(|v| v["kind"] == kind)
        .collect()
}

#[test]
fn power_writes_one_report_per_repetition() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("out.jsonl");
    let out = ddks(&[
        "power", "--method", "ddks", "--dataset", "dvu", "--d", "3", "--alpha", "0.05", "--repeats", "10", "--seed", "1",
        "--trials", "10", "--perms", "19", "--n-max", "64", "-o", path(&file),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).is_empty());
    let text = std::fs::read_to_string(&file).unwrap();
    let header = lines_of_kind(&text, "header");
    assert_eq!(header.len(), 1);
    assert_eq!(header[0]["harness"]["trials"], 10);
    assert_eq!(header[0]["config"]["search"]["dataset"]["dataset"], "dvu");
    let reports = lines_of_kind(&text, "power_report");
    assert_eq!(reports.len(), 10);
    for r in &reports {
        let report: PowerReport = serde_json::from_value(r.clone()).unwrap();
        assert_eq!(report.repetitions, 1);
        assert!(report.found >= 2.0);
    }
    let summary = lines_of_kind(&text, "summary");
    assert_eq!(summary[0]["repetitions"], 10);
}

#[test]
fn dims_reports_each_dimension() {
    let out = ddks(&[
        "dims", "--method", "rdks", "--dataset", "dvu", "--dims", "2,3,4,5", "--repeats", "1", "--trials", "10",
        "--perms", "19", "--n-max", "64", "--format", "csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let dims: Vec<String> = rdr.records().map(|r| r.unwrap()[2].to_string()).collect();
    assert_eq!(dims, ["2", "3", "4", "5"]);
}

#[test]
fn shrink_reports_a_difference() {
    let out = ddks(&[
        "shrink", "--method", "ddks", "--dataset", "gvm", "--d", "2", "--n", "20", "--repeats", "1", "--trials", "10",
        "--analytic",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary = lines_of_kind(&stdout(&out), "summary");
    let found = summary[0]["found"].as_f64().unwrap();
    assert!(found > 0.0 && found <= 1.0);
}

#[test]
fn timing_rows() {
    let out = ddks(&["timing", "--method", "ddks", "--d", "3", "--n", "10,20,40"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows: Vec<Value> = stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows[0]["kind"], "header");
    let ns: Vec<u64> = rows[1..].iter().map(|r| r["n"].as_u64().unwrap()).collect();
    assert_eq!(ns, [10, 20, 40]);
    assert!(rows[1..].iter().all(|r| r["median_ns"].as_u64().is_some()));
}

#[test]
fn gen_round_trips_through_test() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let out = ddks(&["gen", "--dataset", "mm", "--d", "4", "--n", "25", "--seed", "9", "--out-p", path(&a), "--out-t", path(&b)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let p = Sample::read_csv(&a).unwrap();
    let (want, _) = gen_pair(&DatasetSpec::new(Family::Mm, 4, RngSpec::new(9)), 25).unwrap();
    assert_eq!(p, want);

    // generating in-process with the same seed gives the same test result
    let from_files = ddks(&["test", "--p", path(&a), "--t", path(&b), "--seed", "9"]);
    let generated = ddks(&["test", "--dataset", "mm", "--d", "4", "--n", "25", "--seed", "9"]);
    let x = TestOutcome::from_json(stdout(&from_files).trim()).unwrap();
    let y = TestOutcome::from_json(stdout(&generated).trim()).unwrap();
    assert!(x.same_result(&y));
}
