use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use travel_signal::harness::{ExperimentConfig, WindowSpec};
use travel_signal::schemes::SchemeConfig;
use travel_signal::Error;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_travel-signal"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn shipped_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/baseline.json")
}

fn write_config(dir: &Path, scheme: SchemeConfig, paths: usize) -> PathBuf {
    let mut c = ExperimentConfig::baseline(scheme, WindowSpec::Single(3));
    c.t = 5;
    c.paths = paths;
    c.moment_samples = 2000;
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(&c).unwrap()).unwrap();
    p
}

fn write_state(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("state.json");
    std::fs::write(&p, body).unwrap();
    p
}

const STATE: &str = r#"{"history": [[3.1, 2.4, 4.0], [5.9, 6.3, 5.2]]}"#;

#[test]
fn shipped_config_parses() {
    let c = ExperimentConfig::load(&shipped_config()).unwrap();
    assert_eq!((c.n, c.m, c.t, c.paths), (30, 2, 20, 100));
    assert_eq!(c.scheme, SchemeConfig::RSupportedDro {});
}

#[test]
fn simulate_writes_traces_and_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SchemeConfig::RExtreme {}, 10);
    let out = dir.path().join("out");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "5", "--paths", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let agg = std::fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert!(agg.starts_with("scheme,r,t,mean_cost,std_cost,paths\n"));
    assert_eq!(agg.lines().count(), 1 + 5);
    assert!(agg.lines().nth(1).unwrap().ends_with(",4"));
    let trace = std::fs::read_to_string(out.join("trace_r_extreme_r3.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 4 * 5 * 2);
    assert!(std::fs::read_to_string(out.join("aggregate.svg")).unwrap().starts_with("<svg"));

    // same seed, same files
    let again = dir.path().join("again");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", again.to_str().unwrap(), "--seed", "5", "--paths", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(again.join("trace_r_extreme_r3.csv")).unwrap(), trace);
}

#[test]
fn optimize_reports_a_supported_signal_in_every_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SchemeConfig::RSupportedDro {}, 1);
    let state = write_state(dir.path(), STATE);
    let mut values = Vec::new();
    for mode in ["full", "dro", "mean"] {
        let o = run(&["optimize", "--config", cfg.to_str().unwrap(), "--mode", mode, "--state", state.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{mode}: {}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        let s: Vec<f64> = serde_json::from_value(v["signal"].clone()).unwrap();
        assert_eq!(s.len(), 4);
        // inside the 3-period min/max of each route
        assert!(s[0] >= 2.4 - 1e-9 && s[1] <= 4.0 + 1e-9 && s[0] <= s[1]);
        assert!(s[2] >= 5.2 - 1e-9 && s[3] <= 6.3 + 1e-9 && s[2] <= s[3]);
        values.push(v["value"].as_f64().unwrap());
    }
    // full information at the mean weights is the mean-only problem
    assert!((values[0] - values[2]).abs() < 1e-9);
}

#[test]
fn optimize_accepts_explicit_weights() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SchemeConfig::RSupportedFull {}, 1);
    let state = write_state(
        dir.path(),
        r#"{"history": [[3.1, 2.4, 4.0], [5.9, 6.3, 5.2]], "weights": [1.0, 0.0, 0.0, 0.0, 0.0]}"#,
    );
    let o = run(&["optimize", "--config", cfg.to_str().unwrap(), "--mode", "full", "--state", state.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn reproduce_rejects_unknown_figures() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["reproduce", "--figure", "4", "--r", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reproduce_writes_one_trace_per_scheme_and_window() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig3");
    let o = run(&["reproduce", "--figure", "3", "--r", "2,3", "--out", out.to_str().unwrap(), "--paths", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let agg = std::fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert!(agg.starts_with("scheme,r,mean_avg_cost,std_avg_cost,paths\n"));
    assert_eq!(agg.lines().count(), 1 + 4 * 2);
    for scheme in ["r_supported_full", "r_supported_dro", "mean_only", "r_extreme"] {
        for r in [2, 3] {
            assert!(out.join(format!("trace_{scheme}_r{r}.csv")).exists());
        }
    }
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let missing = dir.path().join("missing.json");
    // missing file
    let o = run(&["simulate", "--config", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
    // unknown key
    let cfg = write_config(dir.path(), SchemeConfig::RExtreme {}, 2);
    let text = std::fs::read_to_string(&cfg).unwrap().replacen('{', "{\"colour\": 1,", 1);
    std::fs::write(&cfg, text).unwrap();
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    // κ above 1/|Ω|
    let mut c = ExperimentConfig::baseline(SchemeConfig::RExtreme {}, WindowSpec::Single(1));
    c.kappa = 0.5;
    std::fs::write(&cfg, serde_json::to_string(&c).unwrap()).unwrap();
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    // malformed state
    let cfg = write_config(dir.path(), SchemeConfig::RExtreme {}, 2);
    let state = write_state(dir.path(), r#"{"history": [[1.0, 2.0]]}"#);
    let o = run(&["optimize", "--config", cfg.to_str().unwrap(), "--mode", "full", "--state", state.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    // usage errors
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["optimize", "--mode", "sideways"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn solver_failures_are_not_input_errors() {
    // the binary exits with 2 exactly for these
    assert!(!Error::IterationLimit { iterations: 10, incumbent: None }.is_input_error());
    assert!(!Error::Lp("interrupted".into()).is_input_error());
    assert!(Error::Config("bad".into()).is_input_error());
    assert!(Error::TooManyAssignments { count: 10, cap: 5 }.is_input_error());
}
