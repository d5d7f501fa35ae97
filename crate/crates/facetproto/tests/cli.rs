use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn facetproto(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_facetproto"))
        .args(args)
        .env_remove("FSL_THREADS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = facetproto(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

/// Small end-to-end run; returns the eval report text.
fn pipeline(dir: &Path, threads: &str) -> String {
    let d = |n: &str| p(dir, n);
    ok(&[
        "synth",
        "--out-dir",
        &d(""),
        "--per-class",
        "25",
        "--nv",
        "12",
        "--f",
        "3",
        "--seed",
        "4",
    ]);
    ok(&[
        "importance",
        "--features",
        &d("base_features.tsv"),
        "--k",
        "5",
        "--q",
        "10",
        "--m",
        "120",
        "--seed",
        "1",
        "--out",
        &d("imp.tsv"),
        "--threads",
        threads,
    ]);
    ok(&[
        "facets",
        "--importance",
        &d("imp.tsv"),
        "--f",
        "3",
        "--out",
        &d("facets.tsv"),
        "--trace",
        &d("trace.tsv"),
    ]);
    ok(&[
        "train-gate",
        "--features",
        &d("base_features.tsv"),
        "--embeddings",
        &d("embeddings.tsv"),
        "--facets",
        &d("facets.tsv"),
        "--episodes",
        "300",
        "--seed",
        "2",
        "--out",
        &d("gate.tsv"),
        "--loss-log",
        &d("loss.tsv"),
    ]);
    ok(&[
        "eval",
        "--features",
        &d("novel_features.tsv"),
        "--embeddings",
        &d("embeddings.tsv"),
        "--facets",
        &d("facets.tsv"),
        "--gate",
        &d("gate.tsv"),
        "--episodes",
        "50",
        "--seed",
        "3",
        "--out",
        &d("results.tsv"),
        "--report",
        &d("report.txt"),
        "--threads",
        threads,
    ]);
    fs::read_to_string(dir.join("report.txt")).unwrap()
}

const ARTIFACTS: [&str; 11] = [
    "base_features.tsv",
    "novel_features.tsv",
    "embeddings.tsv",
    "planted_facets.tsv",
    "imp.tsv",
    "facets.tsv",
    "trace.tsv",
    "gate.tsv",
    "loss.tsv",
    "results.tsv",
    "report.txt",
];

#[test]
fn pipeline_outputs_are_byte_identical_across_runs_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path(), "1");
    pipeline(b.path(), "3");
    for name in ARTIFACTS {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn pipeline_report_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let report = pipeline(dir.path(), "0");
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/pipeline_report.txt");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&golden, &report).unwrap();
    }
    assert_eq!(report, fs::read_to_string(golden).unwrap());
    let found = facetproto::formats::read_facet_partition(&dir.path().join("facets.tsv")).unwrap();
    let planted =
        facetproto::formats::read_facet_partition(&dir.path().join("planted_facets.tsv")).unwrap();
    assert!(found.same_partition(&planted));
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let out = facetproto(&["eval", "--out", "/dev/null"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--features"));
}

#[test]
fn lambda_without_gate_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "synth",
        "--out-dir",
        &p(dir.path(), ""),
        "--per-class",
        "20",
        "--nv",
        "8",
        "--f",
        "2",
    ]);
    let out = facetproto(&[
        "eval",
        "--features",
        &p(dir.path(), "novel_features.tsv"),
        "--out",
        &p(dir.path(), "r.tsv"),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_input_and_short_bank_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = facetproto(&[
        "importance",
        "--features",
        &p(dir.path(), "none.tsv"),
        "--out",
        &p(dir.path(), "a.tsv"),
    ]);
    assert_eq!(out.status.code(), Some(3));

    fs::write(dir.path().join("bad.tsv"), "#dim=2\na\t1\t0.0\n").unwrap();
    let out = facetproto(&[
        "importance",
        "--features",
        &p(dir.path(), "bad.tsv"),
        "--out",
        &p(dir.path(), "a.tsv"),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    ok(&[
        "synth",
        "--out-dir",
        &p(dir.path(), ""),
        "--per-class",
        "10",
        "--nv",
        "8",
        "--f",
        "2",
    ]);
    let out = facetproto(&[
        "eval",
        "--features",
        &p(dir.path(), "novel_features.tsv"),
        "--lambda",
        "0",
        "--out",
        &p(dir.path(), "r.tsv"),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("novel"));
}

#[test]
fn baseline_eval_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| p(dir.path(), n);
    ok(&[
        "synth",
        "--out-dir",
        &d(""),
        "--per-class",
        "20",
        "--nv",
        "8",
        "--f",
        "2",
    ]);
    let stdout = ok(&[
        "eval",
        "--features",
        &d("novel_features.tsv"),
        "--lambda",
        "0",
        "--episodes",
        "20",
        "--out",
        &d("a.tsv"),
    ]);
    assert!(
        stdout.starts_with("protonet: 5-way 1-shot over 20 episodes: "),
        "{stdout}"
    );
    assert!(stdout.trim_end().ends_with(|c: char| c.is_ascii_digit()));
    let stdout = ok(&["compare", "--a", &d("a.tsv"), "--b", &d("a.tsv")]);
    assert!(
        stdout.contains("paired difference (a - b): 0.00 ± 0.00 over 20 episodes"),
        "{stdout}"
    );

    ok(&[
        "eval",
        "--features",
        &d("novel_features.tsv"),
        "--lambda",
        "0",
        "--episodes",
        "20",
        "--seed",
        "9",
        "--out",
        &d("b.tsv"),
    ]);
    let out = facetproto(&["compare", "--a", &d("a.tsv"), "--b", &d("b.tsv")]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn threads_flag_reads_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_facetproto"))
        .args(["eval", "--help"])
        .env("FSL_THREADS", "2")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&out.stdout).contains("FSL_THREADS=2"));
}
