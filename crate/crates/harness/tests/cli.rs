use std::path::Path;
use std::process::Command;

fn airgrasp(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_airgrasp"))
        .args(args)
        .env_remove("AIRGRASP_OUT_DIR")
        .output()
        .expect("binary runs")
}

const TINY: &str = r#"
[mission]
max_ticks = 600

[suite]
episodes = 2
scenarios = ["tabletop_sparse"]
ablations = ["full"]
threads = 1
camera_resolution = [96, 72]
"#;

fn count_lines(p: &Path) -> usize {
    std::fs::read_to_string(p).unwrap().lines().count()
}

#[test]
fn run_writes_traces_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let out = dir.path().join("out");
    let res = airgrasp(&["run", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    assert_eq!(count_lines(&out.join("results.csv")), 3);
    let traces = out.join("traces/tabletop_sparse/full");
    let n = std::fs::read_dir(&traces).unwrap().count();
    assert_eq!(n, 2);
    for f in ["summary.txt", "summary.json", "config.toml"] {
        assert!(out.join(f).is_file(), "{f}");
    }

    let trace = traces.join("seed_0.jsonl");
    let res = airgrasp(&["replay", trace.to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
    assert!(String::from_utf8_lossy(&res.stdout).contains("replay matches"));

    let res = airgrasp(&["plot", out.join("results.csv").to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(out.join("plots/outcomes.svg").is_file());
    assert!(out.join("plots/scores.svg").is_file());
}

#[test]
fn env_var_sets_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY.replace("episodes = 2", "episodes = 1")).unwrap();
    let out = dir.path().join("from_env");
    let res = Command::new(env!("CARGO_BIN_EXE_airgrasp"))
        .args(["run", cfg.to_str().unwrap(), "--no-traces"])
        .env("AIRGRASP_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(res.status.success());
    assert_eq!(count_lines(&out.join("results.csv")), 2);
    assert!(!out.join("traces").exists());
}

#[test]
fn validate_reports_config_errors_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    std::fs::write(&good, TINY).unwrap();
    assert!(airgrasp(&["validate", good.to_str().unwrap()]).status.success());

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[collision]\nlambda = -1.0\n").unwrap();
    assert_eq!(airgrasp(&["validate", bad.to_str().unwrap()]).status.code(), Some(2));

    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "[suite]\nepisodez = 3\n").unwrap();
    assert_eq!(airgrasp(&["run", unknown.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn validate_accepts_generated_scene_file() {
    let dir = tempfile::tempdir().unwrap();
    let s = airgrasp_harness::build_scenario(&airgrasp_harness::ScenarioName::ShelfDense.spec(3), None).unwrap();
    let path = dir.path().join("scene.json");
    std::fs::write(&path, s.file.to_json().unwrap()).unwrap();
    let res = airgrasp(&["validate", path.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stdout).contains("scene ok"));

    std::fs::write(&path, "{\"schema\": 1}").unwrap();
    assert_eq!(airgrasp(&["validate", path.to_str().unwrap()]).status.code(), Some(2));
}
