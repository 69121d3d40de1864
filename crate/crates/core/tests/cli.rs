//! Integration tests for the command-line interface: flag handling, option
//! files, exit codes, and artifact reuse.

use std::path::Path;
use std::process::{Command, Output};

const TRAIN: &str = include_str!("fixtures/train.conll");
const TEST: &str = include_str!("fixtures/test.conll");

fn setup(dir: &Path) {
    std::fs::write(dir.join("train.conll"), TRAIN).unwrap();
    std::fs::write(dir.join("test.conll"), TEST).unwrap();
}

fn nerdiag(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nerdiag"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn analyze_restricts_to_requested_attributes() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let out = nerdiag(
        dir.path(),
        &[
            "analyze",
            "--train",
            "train.conll",
            "--test",
            "test.conll",
            "--pred",
            "sysA=col:2",
            "--attributes",
            "eLen",
            "--out",
            "out",
            "--format",
            "json",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("out/report.json"));
    let buckets = report["buckets"].as_array().unwrap();
    assert_eq!(buckets.len(), 1);
    assert_eq!(buckets[0]["attribute"], "eLen");
    let model_wise = report["model_wise"].as_array().unwrap();
    assert!(model_wise.iter().all(|row| row["attribute"] == "eLen"));
    assert_eq!(report["metadata"]["config"]["attributes"], serde_json::json!(["eLen"]));
}

#[test]
fn missing_input_exits_nonzero_and_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let out = nerdiag(
        dir.path(),
        &[
            "analyze",
            "--train",
            "absent.conll",
            "--test",
            "test.conll",
            "--pred",
            "sysA=col:2",
            "--out",
            "out",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("absent.conll"), "stderr: {stderr}");
    assert!(stderr.starts_with("error:"), "stderr: {stderr}");
}

#[test]
fn malformed_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    std::fs::write(dir.path().join("bad.conll"), "word NOT-A-TAG\n").unwrap();
    let out = nerdiag(
        dir.path(),
        &[
            "analyze",
            "--train",
            "bad.conll",
            "--test",
            "test.conll",
            "--pred",
            "sysA=col:2",
            "--out",
            "out",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bad.conll"), "stderr: {stderr}");
}

#[test]
fn option_file_applies_but_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    std::fs::write(
        dir.path().join("run.opts"),
        "# defaults for this experiment\nattributes = eLen, sLen\nalpha = 0.2\n",
    )
    .unwrap();
    let out = nerdiag(
        dir.path(),
        &[
            "analyze",
            "--train",
            "train.conll",
            "--test",
            "test.conll",
            "--pred",
            "sysA=col:2",
            "--config",
            "run.opts",
            "--alpha",
            "0.01",
            "--out",
            "out",
            "--format",
            "json",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("out/report.json"));
    // alpha comes from the flag, attributes from the option file.
    assert_eq!(report["metadata"]["config"]["alpha"], serde_json::json!(0.01));
    assert_eq!(
        report["metadata"]["config"]["attributes"],
        serde_json::json!(["eLen", "sLen"])
    );
}

#[test]
fn unknown_option_file_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    std::fs::write(dir.path().join("run.opts"), "alhpa = 0.2\n").unwrap();
    let out = nerdiag(
        dir.path(),
        &[
            "analyze",
            "--train",
            "train.conll",
            "--test",
            "test.conll",
            "--pred",
            "sysA=col:2",
            "--config",
            "run.opts",
            "--out",
            "out",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("alhpa"), "stderr: {stderr}");
}

#[test]
fn saved_plan_is_reused_for_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let args = [
        "analyze",
        "--train",
        "train.conll",
        "--test",
        "test.conll",
        "--pred",
        "sysA=col:2",
        "--pred",
        "sysB=col:3",
        "--plan",
        "plan.json",
        "--out",
        "out",
        "--format",
        "json",
    ];
    let first = nerdiag(dir.path(), &args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(dir.path().join("plan.json").exists(), "plan artifact not written");
    let mut report_1 = read_json(&dir.path().join("out/report.json"));

    // The second run loads the saved plan instead of re-fitting. Every
    // number must survive the round-trip; only the input digest table may
    // differ (it now lists the plan artifact).
    let second = nerdiag(dir.path(), &args);
    assert!(second.status.success());
    let mut report_2 = read_json(&dir.path().join("out/report.json"));
    assert!(report_2["metadata"]["inputs"]
        .as_object()
        .unwrap()
        .contains_key("plan.json"));
    report_1["metadata"].as_object_mut().unwrap().remove("inputs");
    report_2["metadata"].as_object_mut().unwrap().remove("inputs");
    assert_eq!(report_1, report_2);
    let bytes_2 = std::fs::read(dir.path().join("out/report.json")).unwrap();

    // A third run repeats the second byte-for-byte.
    let third = nerdiag(dir.path(), &args);
    assert!(third.status.success());
    let bytes_3 = std::fs::read(dir.path().join("out/report.json")).unwrap();
    assert_eq!(bytes_2, bytes_3);
}

#[test]
fn comparing_identical_predictions_reports_all_zero_differences() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    // Duplicate the first prediction column so two systems carry the same
    // tags (mapping one column to two systems is rejected at parse time).
    let duplicated: String = TEST
        .lines()
        .map(|line| {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                String::new()
            } else {
                format!("{} {} {} {}\n", fields[0], fields[1], fields[2], fields[2])
            }
        })
        .map(|line| if line.is_empty() { "\n".to_owned() } else { line })
        .collect();
    std::fs::write(dir.path().join("dup.conll"), duplicated).unwrap();
    let out = nerdiag(
        dir.path(),
        &[
            "compare",
            "dupA",
            "dupB",
            "--train",
            "train.conll",
            "--test",
            "dup.conll",
            "--pred",
            "dupA=col:2",
            "--pred",
            "dupB=col:3",
            "--out",
            "out",
            "--format",
            "json",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("out/report.json"));
    let comparative = &report["comparative"];
    assert_eq!(comparative["system_a"], "dupA");
    assert_eq!(comparative["system_b"], "dupB");
    for entry in comparative["entries"].as_array().unwrap() {
        for gap in entry["gaps"].as_array().unwrap() {
            if !gap.is_null() {
                assert_eq!(gap.as_f64().unwrap(), 0.0);
            }
        }
    }
    let tests = comparative["tests"].as_array().unwrap();
    assert!(!tests.is_empty());
    for test in tests {
        let inner = &test["test"];
        if inner.is_null() {
            continue;
        }
        assert_eq!(inner["method"], "all_zero_differences");
        assert_eq!(inner["p_value"].as_f64().unwrap(), 1.0);
        assert_eq!(test["significant"], false);
    }
}

#[test]
fn csv_format_writes_chart_data() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let out = nerdiag(
        dir.path(),
        &[
            "compare",
            "sysA",
            "sysC",
            "--train",
            "train.conll",
            "--test",
            "test.conll",
            "--pred",
            "sysA=col:2",
            "--pred",
            "sysC=col:4",
            "--out",
            "out",
            "--format",
            "csv",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let radar: serde_json::Value = read_json(&dir.path().join("out/radar.json"));
    assert_eq!(radar["kind"], "radar");
    let bars = std::fs::read_to_string(dir.path().join("out/diagnosis_bars.csv")).unwrap();
    assert!(bars.starts_with(
        "\"system\",\"attribute\",\"worst_bucket\",\"worst_f1\",\"gap\",\"best_bucket\",\"best_f1\""
    ));
    let heatmap = std::fs::read_to_string(dir.path().join("out/heatmap.csv")).unwrap();
    assert!(heatmap.starts_with("\"attribute\","));
}

#[test]
fn buckets_subcommand_prints_the_layout() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let out = nerdiag(
        dir.path(),
        &[
            "buckets",
            "--train",
            "train.conll",
            "--test",
            "test.conll",
            "--pred",
            "sysA=col:2",
            "--buckets",
            "3",
            "--buckets",
            "sLen=2",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("eLen"), "stdout: {stdout}");
    assert!(stdout.contains("sLen"), "stdout: {stdout}");
}
