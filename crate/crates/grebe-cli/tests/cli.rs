//! End-to-end checks driving the compiled `grebe` binary.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn grebe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grebe"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn run_ok(args: &[&str]) -> String {
    let out = grebe(args);
    assert!(
        out.status.success(),
        "`grebe {}` failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("stdout is UTF-8")
}

/// Parses `key=value` metrics lines; later duplicates win, which no command
/// currently produces.
fn metrics(text: &str) -> HashMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn path_str(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn generate(dir: &TempDir, shape: &str, seed: &str, scale: &str, name: &str) -> PathBuf {
    let out = path_str(dir, name);
    run_ok(&["generate", shape, out.to_str().unwrap(), "--seed", seed, "--scale", scale]);
    out
}

fn file_len(path: &Path) -> u64 {
    std::fs::metadata(path).unwrap().len()
}

#[test]
fn lhcb_inspect_reports_26_fields_and_exact_byte_accounting() {
    let dir = TempDir::new().unwrap();
    let file = generate(&dir, "lhcb-like", "3", "0.01", "a.grb");
    let m = metrics(&run_ok(&["inspect", file.to_str().unwrap(), "--format", "metrics"]));
    assert_eq!(m["top_level_fields"], "26");
    assert_eq!(m["slack_bytes"], "0");
    assert_eq!(m["accounted_bytes"], m["file_bytes"]);
    assert_eq!(m["file_bytes"], file_len(&file).to_string());
}

#[test]
fn empty_dataset_inspect_reports_zero_clusters_and_metadata_only_bytes() {
    let dir = TempDir::new().unwrap();
    let text = path_str(&dir, "empty.txt");
    std::fs::write(&text, "#grebe 1\n#name empty\n#field x int32\n").unwrap();
    let out = path_str(&dir, "empty.grb");
    run_ok(&["import", text.to_str().unwrap(), out.to_str().unwrap()]);

    let m = metrics(&run_ok(&["inspect", out.to_str().unwrap(), "--format", "metrics"]));
    assert_eq!(m["entries"], "0");
    assert_eq!(m["clusters"], "0");
    assert_eq!(m["pages"], "0");
    assert_eq!(m["page_bytes_stored"], "0");
    let metadata: u64 = ["envelope_bytes", "header_bytes", "footer_bytes"]
        .iter()
        .map(|k| m[*k].parse::<u64>().unwrap())
        .sum();
    assert_eq!(metadata.to_string(), m["file_bytes"]);
}

#[test]
fn export_import_export_is_a_fixed_point() {
    let dir = TempDir::new().unwrap();
    let file = generate(&dir, "h1-like", "5", "0.005", "h1.grb");
    let first = run_ok(&["export", file.to_str().unwrap()]);

    let text = path_str(&dir, "h1.txt");
    std::fs::write(&text, &first).unwrap();
    let rebuilt = path_str(&dir, "h1b.grb");
    run_ok(&["import", text.to_str().unwrap(), rebuilt.to_str().unwrap()]);
    let second = run_ok(&["export", rebuilt.to_str().unwrap()]);
    assert_eq!(first, second);
}

#[test]
fn export_subset_emits_only_named_fields_in_given_order() {
    let dir = TempDir::new().unwrap();
    let file = generate(&dir, "lhcb-like", "3", "0.005", "a.grb");
    let text = run_ok(&["export", file.to_str().unwrap(), "--columns", "f0003,f0001"]);
    let fields: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("#field "))
        .map(|l| l.split_whitespace().nth(1).unwrap())
        .collect();
    assert_eq!(fields, ["f0003", "f0001"]);
    // Two scalar columns, so exactly one separator per data line.
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        assert_eq!(line.matches('\t').count(), 1, "line {line:?}");
    }
}

#[test]
fn one_entry_file_exports_one_data_line() {
    let dir = TempDir::new().unwrap();
    let text = path_str(&dir, "one.txt");
    std::fs::write(&text, "#grebe 1\n#name one\n#field x int32\n#field y float64\n7\t0.5\n")
        .unwrap();
    let out = path_str(&dir, "one.grb");
    run_ok(&["import", text.to_str().unwrap(), out.to_str().unwrap()]);

    let exported = run_ok(&["export", out.to_str().unwrap()]);
    let data: Vec<&str> = exported.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data, ["7\t0.5"]);
}

#[test]
fn merge_concatenates_entries_and_stays_exactly_accounted() {
    let dir = TempDir::new().unwrap();
    let a = generate(&dir, "lhcb-like", "1", "0.005", "a.grb");
    let b = generate(&dir, "lhcb-like", "2", "0.01", "b.grb");
    let merged = path_str(&dir, "m.grb");
    let out = run_ok(&[
        "merge",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "-o",
        merged.to_str().unwrap(),
    ]);
    let summary = metrics(&out);

    let ma = metrics(&run_ok(&["inspect", a.to_str().unwrap(), "--format", "metrics"]));
    let mb = metrics(&run_ok(&["inspect", b.to_str().unwrap(), "--format", "metrics"]));
    let mm = metrics(&run_ok(&["inspect", merged.to_str().unwrap(), "--format", "metrics"]));
    let entries =
        ma["entries"].parse::<u64>().unwrap() + mb["entries"].parse::<u64>().unwrap();
    assert_eq!(summary["entries"], entries.to_string());
    assert_eq!(mm["entries"], entries.to_string());
    assert_eq!(mm["slack_bytes"], "0");
}

#[test]
fn same_seed_generates_identical_files() {
    let dir = TempDir::new().unwrap();
    let a = generate(&dir, "cms-like", "42", "0.002", "a.grb");
    let b = generate(&dir, "cms-like", "42", "0.002", "b.grb");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = generate(&dir, "cms-like", "43", "0.002", "c.grb");
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn bench_checksum_is_invariant_across_stream_counts() {
    let dir = TempDir::new().unwrap();
    let file = generate(&dir, "h1-like", "9", "0.01", "h1.grb");
    let checksum = |streams: &str| {
        let m = metrics(&run_ok(&[
            "bench",
            file.to_str().unwrap(),
            "--streams",
            streams,
            "--repetitions",
            "1",
            "--format",
            "metrics",
        ]));
        m["rep.0.checksum"].clone()
    };
    assert_eq!(checksum("1"), checksum("16"));
}

#[test]
fn bench_requests_do_not_grow_when_gaps_merge() {
    let dir = TempDir::new().unwrap();
    let file = generate(&dir, "lhcb-like", "4", "0.02", "a.grb");
    let requests = |threshold: &str| {
        let m = metrics(&run_ok(&[
            "bench",
            file.to_str().unwrap(),
            "--columns",
            "f0000,f0007,f0019",
            "--gap-threshold",
            threshold,
            "--repetitions",
            "1",
            "--format",
            "metrics",
        ]));
        m["rep.0.requests"].parse::<u64>().unwrap()
    };
    assert!(requests("16384") <= requests("0"));
}

#[test]
fn bench_leaves_the_input_untouched() {
    let dir = TempDir::new().unwrap();
    let file = generate(&dir, "lhcb-like", "6", "0.005", "a.grb");
    let before = std::fs::read(&file).unwrap();
    run_ok(&["bench", file.to_str().unwrap(), "--repetitions", "2"]);
    assert_eq!(std::fs::read(&file).unwrap(), before);
}

#[test]
fn unknown_bench_column_is_a_lookup_error() {
    let dir = TempDir::new().unwrap();
    let file = generate(&dir, "lhcb-like", "3", "0.005", "a.grb");
    let out = grebe(&["bench", file.to_str().unwrap(), "--columns", "no_such_field"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "stderr: {stderr}");
    assert!(stderr.starts_with("error[lookup]:"), "stderr: {stderr}");
}

#[test]
fn missing_file_is_a_single_line_io_error() {
    let out = grebe(&["inspect", "/definitely/not/here.grb"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "stderr: {stderr}");
    assert!(stderr.starts_with("error[io]:"), "stderr: {stderr}");
}

#[test]
fn truncated_file_is_reported_with_its_class() {
    let dir = TempDir::new().unwrap();
    let file = generate(&dir, "lhcb-like", "3", "0.005", "a.grb");
    let bytes = std::fs::read(&file).unwrap();
    let cut = path_str(&dir, "cut.grb");
    std::fs::write(&cut, &bytes[..200]).unwrap();

    let out = grebe(&["inspect", cut.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "stderr: {stderr}");
    assert!(stderr.starts_with("error[truncated]:"), "stderr: {stderr}");
}

#[test]
fn unknown_flag_is_a_usage_error_with_exit_2() {
    let out = grebe(&["inspect", "--frmt", "text", "x.grb"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "stderr: {stderr}");
    assert!(stderr.starts_with("error[usage]:"), "stderr: {stderr}");
}

#[test]
fn unknown_codec_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = path_str(&dir, "x.grb");
    let res = grebe(&["generate", "lhcb-like", out.to_str().unwrap(), "--codec", "snappy"]);
    assert_eq!(res.status.code(), Some(1));
    let stderr = String::from_utf8(res.stderr).unwrap();
    assert!(stderr.starts_with("error[usage]: unknown codec `snappy`"), "stderr: {stderr}");
}

#[test]
fn inspect_report_is_valid_json_with_matching_totals() {
    let dir = TempDir::new().unwrap();
    let file = generate(&dir, "lhcb-like", "3", "0.01", "a.grb");
    let report = path_str(&dir, "r.json");
    run_ok(&[
        "inspect",
        file.to_str().unwrap(),
        "--format",
        "metrics",
        "--report",
        report.to_str().unwrap(),
    ]);

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["bytes"]["file"].as_u64().unwrap(), file_len(&file));
    assert_eq!(json["bytes"]["slack"].as_u64().unwrap(), 0);
    assert_eq!(json["columns"].as_array().unwrap().len(), 26);
}

#[test]
fn bench_report_rows_match_repetitions() {
    let dir = TempDir::new().unwrap();
    let file = generate(&dir, "lhcb-like", "3", "0.005", "a.grb");
    let report = path_str(&dir, "b.json");
    run_ok(&[
        "bench",
        file.to_str().unwrap(),
        "--repetitions",
        "3",
        "--report",
        report.to_str().unwrap(),
    ]);

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let reps = json["repetitions"].as_array().unwrap();
    assert_eq!(reps.len(), 3);
    let first = reps[0]["checksum"].as_str().unwrap();
    assert!(reps.iter().all(|r| r["checksum"].as_str().unwrap() == first));
}
