use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn tailgini(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tailgini")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn records(text: &str) -> (csv::StringRecord, Vec<csv::StringRecord>) {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers().unwrap().clone();
    let rows = r.records().collect::<Result<Vec<_>, _>>().unwrap();
    (header, rows)
}

fn synth(dir: &TempDir, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.path().join(name);
    let mut full = vec!["synth"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["-o", path.to_str().unwrap()]);
    let o = tailgini(&full);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn csv_output_starts_with_metadata_comment() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, "g.csv", &["--kind", "gaussian", "--n", "300", "--seed", "1"]);
    let o = tailgini(&["stats", "-i", s(&data)]);
    assert!(o.status.success());
    let text = stdout(&o);
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# tailgini"));
    assert!(first.contains("units=percent"));
    let (header, rows) = records(&text);
    assert_eq!(&header[0], "prudence");
    assert_eq!(rows.len(), 6);
}

#[test]
fn example_panel_reproduces_known_tail_correlations() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, "ex.csv", &["--kind", "example"]);
    let o = tailgini(&["corr", "-i", s(&data), "-p", "0.8", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let block = &v["results"]["matrices"][2];
    assert_eq!(block["matrix"], "tail-gini");
    let tail = &block["values"];
    assert!((tail[0][1].as_f64().unwrap() - 1.5).abs() < 1e-12);
    assert!((tail[1][0].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn frontier_columns_and_range_targets() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, "g.csv", &["--kind", "gaussian", "--n", "800", "--seed", "4"]);
    let o = tailgini(&["frontier", "-i", s(&data), "-t", "0.05:0.15:0.05", "--objective", "variance"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = records(&stdout(&o));
    let names: Vec<&str> = header.iter().collect();
    for col in ["target", "risk", "w_a1", "w_a2", "w_a3", "lambda", "gamma", "iterations", "converged"] {
        assert!(names.contains(&col), "missing {col}");
    }
    let targets: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    assert_eq!(targets, ["0.05", "0.1", "0.15"]);
    for r in &rows {
        let w: f64 = (2..5).map(|k| r[k].parse::<f64>().unwrap()).sum();
        assert!((w - 1.0).abs() < 1e-8);
    }
}

#[test]
fn numeric_output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, "h.csv", &["--kind", "heavy-tailed", "--n", "600", "--seed", "2"]);
    let args = ["frontier", "-i", s(&data), "-t", "0.06,0.09", "-p", "0.1"];
    assert_eq!(tailgini(&args).stdout, tailgini(&args).stdout);
}

#[test]
fn joins_multiple_inputs_on_date() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let col = |dates: std::ops::Range<i32>, name: &str| {
        let mut t = format!("date,{name}\n");
        for d in dates {
            t.push_str(&format!("{d},{}\n", ((d * 37) % 11) as f64 - 5.0));
        }
        t
    };
    std::fs::write(&a, col(0..12, "x")).unwrap();
    std::fs::write(&b, col(3..20, "y")).unwrap();
    let o = tailgini(&["corr", "-i", s(&a), "-i", s(&b), "-p", "0.5", "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["results"]["assets"], serde_json::json!(["x", "y"]));
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, "g.csv", &["--kind", "gaussian", "--n", "100"]);
    for args in [
        vec!["stats", "-i", s(&data), "-p", "0"],
        vec!["frontier", "-i", s(&data)],
        vec!["frontier", "-i", s(&data), "-t", "1:0:0.1"],
        vec!["stats", "-i", "/nonexistent/file.csv"],
        vec!["bogus"],
    ] {
        assert_eq!(tailgini(&args).status.code(), Some(1), "{args:?}");
    }
    assert_eq!(tailgini(&["--help"]).status.code(), Some(0));
}

#[test]
fn partial_and_total_failure_codes() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, "g.csv", &["--kind", "gaussian", "--n", "400", "--seed", "3"]);
    let o = tailgini(&["frontier", "-i", s(&data), "-t", "0.05,50", "--long-only", "--objective", "gmd"]);
    assert_eq!(o.status.code(), Some(0));
    let (_, rows) = records(&stdout(&o));
    assert_eq!(rows[0].iter().last(), Some(""));
    assert!(!rows[1].iter().last().unwrap().is_empty());

    let o = tailgini(&["frontier", "-i", s(&data), "-t", "50", "--long-only"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_exchangeability_flags_example_pair() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, "ex.csv", &["--kind", "example"]);
    let o = tailgini(&[
        "check-exchangeability", "-i", s(&data), "-p", "0.6", "-p", "0.8", "--tol", "1e-9", "--format", "json",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let flags = &v["results"]["pairs"][0]["exchangeable_at_tol"];
    assert_eq!(flags, &serde_json::json!([true, false]));
}
