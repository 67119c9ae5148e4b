use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use deep_mcmcp::classify::write_dataset;
use deep_mcmcp::samples::read_samples;
use deep_mcmcp::service::{read_log, replay_log, ExperimentConfig};
use deep_mcmcp::synthetic::labeled_samples;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn mcmcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcmcp"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = mcmcp(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn shipped_configs_validate() {
    for name in ["objects.toml", "faces-remote.toml"] {
        let c = ExperimentConfig::from_path(&config(name)).unwrap();
        c.validate().unwrap();
    }
}

#[test]
fn simulate_export_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("objects.toml");
    let run = |tag: &str| {
        let log = dir.path().join(format!("{tag}.jsonl"));
        let out = dir.path().join(format!("{tag}-samples.jsonl"));
        let summary = ok(&["simulate", "--config", s(&cfg), "--sessions", "6", "--seed", "3", "--log", s(&log), "--out", s(&out)]);
        (log, out, summary)
    };
    let (log_a, out_a, summary) = run("a");
    let (log_b, out_b, _) = run("b");
    assert_eq!(fs::read(&log_a).unwrap(), fs::read(&log_b).unwrap());
    assert_eq!(fs::read(&out_a).unwrap(), fs::read(&out_b).unwrap());

    let summary: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(summary["sessions_completed"], 6);
    assert_eq!(summary["recorded_samples"], 6 * 64);

    let exported = ok(&["export", "--log", s(&log_a)]);
    assert_eq!(exported.as_bytes(), fs::read(&out_a).unwrap());
    let records = read_samples(exported.as_bytes()).unwrap();
    assert!(!records.is_empty());

    // the log must not be overwritten
    let again = mcmcp(&["simulate", "--config", s(&cfg), "--sessions", "1", "--log", s(&log_a)]);
    assert!(!again.status.success());

    let state = replay_log(&read_log(&log_a).unwrap()).unwrap();
    assert_eq!(state.engine.unwrap().recorded_samples(), 6 * 64);
}

#[test]
fn analyze_then_classify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("objects.toml");
    let log = dir.path().join("events.jsonl");
    ok(&["simulate", "--config", s(&cfg), "--sessions", "30", "--log", s(&log)]);
    let analysis = dir.path().join("analysis");
    ok(&["analyze", "--log", s(&log), "--out", s(&analysis), "--components", "2", "--modes", "3"]);
    let report: serde_json::Value = serde_json::from_reader(File::open(analysis.join("analysis.json")).unwrap()).unwrap();
    assert_eq!(report["method"], "mcmcp");
    assert_eq!(report["means"].as_object().unwrap().len(), 3);
    // one mode per component at most
    assert_eq!(report["modes"]["lamp"].as_array().unwrap().len(), 2);
    let projected = fs::read_to_string(analysis.join("projection.jsonl")).unwrap();
    assert!(projected.lines().count() > 0);

    let config = ExperimentConfig::from_path(&cfg).unwrap();
    let data = labeled_samples(&config.space, &config.targets, 100, 9).unwrap();
    let dataset = dir.path().join("dataset.jsonl");
    write_dataset(File::create(&dataset).unwrap(), &data).unwrap();
    let table_json = dir.path().join("table.json");
    let printed = ok(&[
        "classify",
        "--analysis",
        s(&analysis.join("analysis.json")),
        "--dataset",
        s(&dataset),
        "--rule",
        "density",
        "--out",
        s(&table_json),
    ]);
    assert!(printed.contains("overall"));
    let table: serde_json::Value = serde_json::from_reader(File::open(&table_json).unwrap()).unwrap();
    assert!(table["overall"].as_f64().unwrap() > table["chance"].as_f64().unwrap());
}

#[test]
fn ci_run_feeds_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ci.jsonl");
    ok(&["ci-run", "--config", s(&config("objects.toml")), "--trials", "200", "--out", s(&out)]);
    assert_eq!(read_samples(File::open(&out).map(std::io::BufReader::new).unwrap()).unwrap().len(), 600);
    let analysis = dir.path().join("analysis");
    ok(&["analyze", "--samples", s(&out), "--out", s(&analysis)]);
    let report: serde_json::Value = serde_json::from_reader(File::open(analysis.join("analysis.json")).unwrap()).unwrap();
    assert_eq!(report["method"], "ci");
    assert!(report["models"].as_object().unwrap().is_empty());

    let data = dir.path().join("empty.jsonl");
    File::create(&data).unwrap();
    let density = mcmcp(&[
        "classify",
        "--analysis",
        s(&analysis.join("analysis.json")),
        "--dataset",
        s(&data),
        "--rule",
        "density",
    ]);
    assert!(!density.status.success());
}

#[test]
fn analyzing_a_fresh_log_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    ok(&["simulate", "--config", s(&config("objects.toml")), "--sessions", "0", "--log", s(&log)]);
    let out = mcmcp(&["analyze", "--log", s(&log), "--out", s(&dir.path().join("a"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no samples"));
}

#[test]
fn human_configs_cannot_be_simulated() {
    let out = mcmcp(&["simulate", "--config", s(&config("faces-remote.toml")), "--sessions", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("respondent.kind"));
}
