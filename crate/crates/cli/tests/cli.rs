use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_backbone-sim")).args(args).current_dir(cwd).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SPEC: &str = "name = \"tiny\"\nrounds = 3000\ntrials = 2\nseed_base = 3\n\
                    [params]\nn = 12\nt = 1\ns = 0.2\ntarget_ex = 0.05\neta_kappa = 400\n\
                    [adversary]\nstrategy = \"withhold\"\n\
                    [checks.common_prefix]\n[checks.bad_events]\n";

#[test]
fn simulate_writes_reports_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.toml"), SPEC).unwrap();
    let o = run(&["simulate", "tiny.toml", "--jobs", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("# backbone-sim "));
    assert!(text.contains("PASS bad_events"));
    let out = dir.path().join("out/tiny");
    for f in ["summary.json", "summary.txt", "trial-0000.trace.jsonl", "trial-0001.indicators.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let csv = fs::read_to_string(out.join("trial-0000.indicators.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("seed=3"));
    assert_eq!(csv.lines().count(), 3002);
}

#[test]
fn overrides_and_json_rows() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.toml"), SPEC).unwrap();
    let o = run(&["simulate", "tiny.toml", "--out", "o", "--trials", "1", "--seed-base", "9", "--format", "json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/trial-0000.indicators.json")).unwrap()).unwrap();
    assert_eq!(rows["seed"], 9);
    assert_eq!(rows["rows"].as_array().unwrap().len(), 3000);
    assert!(!dir.path().join("o/trial-0001.indicators.json").exists());
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // no sleep, so φ has no races and the check fails
    let spec = SPEC.replace("s = 0.2", "s = 0.0").replace("[checks.bad_events]", "[checks.phi]\nmin_races = 1");
    fs::write(dir.path().join("tiny.toml"), spec).unwrap();
    let o = run(&["simulate", "tiny.toml", "--trials", "1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL phi"));
}

#[test]
fn errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), SPEC.replace("rounds = 3000", "rounds = 3000\nbogus = 1")).unwrap();
    let o = run(&["simulate", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
    assert_eq!(run(&["simulate", "missing.toml"], dir.path()).status.code(), Some(2));
}

#[test]
fn bounds_writes_figure_and_report() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("grid.toml"), "n = 50\nex = 0.03\nex_star = 0.03\n").unwrap();
    let o = run(&["bounds", "grid.toml", "--out", "b"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("b/figure1.csv")).unwrap();
    assert_eq!(stdout(&o), csv);
    let mut lines = csv.lines().skip(1);
    assert_eq!(lines.next(), Some("model,t_fraction,s_max"));
    assert_eq!(lines.next(), Some("sync,0,1"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("b/bounds.json")).unwrap()).unwrap();
    assert_eq!(json["points"].as_array().unwrap().len(), 150);
}

#[test]
fn check_reads_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.toml"), SPEC).unwrap();
    assert_eq!(run(&["simulate", "tiny.toml", "--trials", "1", "--out", "s"], dir.path()).status.code(), Some(0));
    fs::write(dir.path().join("checks.toml"), "[checks.common_prefix]\nk = 1000\n[checks.bad_events]\n").unwrap();
    let o = run(&["check", "s/trial-0000.trace.jsonl", "checks.toml", "--format", "json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["all_passed"], true);
    assert_eq!(summary["checks"].as_array().unwrap().len(), 2);
}
