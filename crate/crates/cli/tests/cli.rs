use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

use tracelens_cli::report::schema_errors;

fn tracelens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tracelens"))
        .args(args)
        .env_remove("TRACELENS_THREADS")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn error_line(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("an error line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("not JSON ({e}): {line}"))
}

const SPEC: &str = "job_count = 1000\nseed = 42\n\
    resources.minor.center = [0.1, 0.1]\n\
    resources.mediocre.center = [0.5, 0.5]\n\
    resources.major.center = [0.9, 0.9]\n\
    output.shards = 2\n";

fn generate(dir: &Path, spec: &str) -> PathBuf {
    let spec_path = dir.join("spec.toml");
    fs::write(&spec_path, spec).unwrap();
    let trace = dir.join("trace");
    let out = tracelens(&["generate", "--spec", p(&spec_path), "--out-dir", p(&trace)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), p(&trace.join("manifest.json")));
    trace
}

fn digest(root: &Path) -> String {
    let mut files: Vec<PathBuf> = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push(path);
            }
        }
    }
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        h.update(f.strip_prefix(root).unwrap().to_str().unwrap().as_bytes());
        h.update(fs::read(&f).unwrap());
    }
    format!("{:x}", h.finalize())
}

#[test]
fn generate_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(digest(&generate(a.path(), SPEC)), digest(&generate(b.path(), SPEC)));
}

#[test]
fn generate_rejects_bad_mix_by_key() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.toml");
    fs::write(&spec, "class_mix = [0.6, 0.2, 0.1]\n").unwrap();
    let out = tracelens(&["generate", "--spec", p(&spec), "--out-dir", p(&dir.path().join("t"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"]["key"], "class_mix");
}

#[test]
fn generate_missing_spec_is_io() {
    let dir = tempfile::tempdir().unwrap();
    let out = tracelens(&["generate", "--spec", p(&dir.path().join("none.toml")), "--out-dir", p(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_line(&out)["error"]["kind"], "io");
}

#[test]
fn usage_errors_exit_2() {
    let out = tracelens(&["analyze", "--jobs", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["exit_code"], 2);
    let out = tracelens(&["--threads", "0", "generate", "--spec", "a", "--out-dir", "b"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ingest_generated_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = generate(dir.path(), SPEC);
    let out_dir = dir.path().join("ingest");
    let out = tracelens(&["ingest", "--trace-root", p(&trace), "--out", p(&out_dir)]);
    assert!(out.status.success());
    let jobs = fs::read_to_string(out_dir.join("jobs.csv")).unwrap();
    assert_eq!(jobs.lines().count(), 1001);
    let stats: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("ingest_stats.json")).unwrap()).unwrap();
    assert_eq!(stats["jobs"], 1000);
    assert_eq!(stats["job_events"]["rows_read"], 3000);
}

#[test]
fn ingest_empty_root_and_empty_window() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out_dir = dir.path().join("o1");
    assert!(tracelens(&["ingest", "--trace-root", p(&empty), "--out", p(&out_dir)]).status.success());
    assert_eq!(fs::read_to_string(out_dir.join("jobs.csv")).unwrap().lines().count(), 1);
    let stats: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("ingest_stats.json")).unwrap()).unwrap();
    assert_eq!(stats["jobs"], 0);
    assert_eq!(stats["job_events"]["rows_read"], 0);

    let trace = generate(dir.path(), SPEC);
    let out_dir = dir.path().join("o2");
    let out = tracelens(&[
        "ingest", "--trace-root", p(&trace), "--out", p(&out_dir), "--window-start", "999999999999", "--window-end",
        "999999999999",
    ]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(out_dir.join("jobs.csv")).unwrap().lines().count(), 1);
}

#[test]
fn ingest_bad_window_and_missing_root() {
    let dir = tempfile::tempdir().unwrap();
    let out = tracelens(&[
        "ingest", "--trace-root", p(dir.path()), "--out", p(&dir.path().join("o")), "--window-start", "10",
        "--window-end", "5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = tracelens(&["ingest", "--trace-root", p(&dir.path().join("nope")), "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3));
}

fn analyze(jobs: &Path, out_dir: &Path, seed: &str) -> serde_json::Value {
    let out = tracelens(&["analyze", "--jobs", p(jobs), "--out-dir", p(out_dir), "--seed", seed]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(schema_errors(&report), Vec::<String>::new());
    report
}

#[test]
fn analyze_is_reproducible_and_finds_three_classes() {
    let dir = tempfile::tempdir().unwrap();
    let trace = generate(dir.path(), SPEC);
    let ing = dir.path().join("ing");
    assert!(tracelens(&["ingest", "--trace-root", p(&trace), "--out", p(&ing)]).status.success());
    let a = analyze(&ing.join("jobs.csv"), &dir.path().join("a"), "9");
    let b = analyze(&ing.join("jobs.csv"), &dir.path().join("b"), "9");
    assert_eq!(a, b);
    assert_eq!(a["k_sweep"]["best_k"], 3);
    let shape = a["fits"]["interarrival"]["fit"]["params"]["shape"].as_f64().unwrap();
    assert!((1.3..1.7).contains(&shape), "{shape}");
    assert_eq!(a["ingest_stats"]["trace"]["jobs"], 1000);
    for f in ["job_classes.csv", "interarrival_ecdf.csv", "cpu_rank_frequency.csv", "runtime_tail.csv", "arrival_clusters.csv"] {
        assert!(dir.path().join("a").join(f).is_file(), "{f}");
    }
    let ecdf = fs::read_to_string(dir.path().join("a/interarrival_ecdf.csv")).unwrap();
    assert_eq!(ecdf.lines().count(), 513);
}

#[test]
fn analyze_single_job_is_insufficient_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let trace = generate(dir.path(), "job_count = 1\n");
    let ing = dir.path().join("ing");
    assert!(tracelens(&["ingest", "--trace-root", p(&trace), "--out", p(&ing)]).status.success());
    let r = analyze(&ing.join("jobs.csv"), &dir.path().join("a"), "1");
    for section in ["job_classes", "k_sweep", "arrival_clusters"] {
        assert_eq!(r[section]["status"], "insufficient data", "{section}");
    }
    assert_eq!(r["fits"]["interarrival"]["status"], "insufficient data");
    assert_eq!(r["fits"]["runtime"]["status"], "insufficient data");
}

#[test]
fn analyze_rejects_bad_k_range_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let jobs = dir.path().join("jobs.csv");
    fs::write(&jobs, "not,a,job,table\n1,2,3,4\n").unwrap();
    let out = tracelens(&["analyze", "--jobs", p(&jobs), "--out-dir", p(dir.path()), "--k-min", "5", "--k-max", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = tracelens(&["analyze", "--jobs", p(&jobs), "--out-dir", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn threads_flag_and_env() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("s.toml");
    fs::write(&spec, "job_count = 10\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tracelens"))
        .args(["generate", "--spec", p(&spec), "--out-dir", p(&dir.path().join("t"))])
        .env("TRACELENS_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_tracelens"))
        .args(["generate", "--spec", p(&spec), "--out-dir", p(&dir.path().join("u"))])
        .env("TRACELENS_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
