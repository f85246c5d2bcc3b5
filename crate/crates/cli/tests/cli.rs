use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uptheriver"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().args(args).arg("--output-dir").arg(dir).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

/// Everything written except `config.json`, which records the output path.
fn results(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = vec![("summary.json".to_string(), fs::read(dir.join("summary.json")).unwrap())];
    let mut series: Vec<_> = fs::read_dir(dir.join("series")).unwrap().map(|e| e.unwrap().path()).collect();
    series.sort();
    for p in series {
        files.push((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()));
    }
    files
}

#[test]
fn stefan_solve_writes_the_output_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["stefan-solve", "--check"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = read_json(&tmp.path().join("config.json"));
    let summary = read_json(&tmp.path().join("summary.json"));
    assert!(cfg["schema_version"].is_u64());
    assert!(summary["schema_version"].is_u64());
    assert_eq!(summary["experiment"], "stefan-solve");
    let boundary = fs::read_to_string(tmp.path().join("series/boundary.csv")).unwrap();
    let header = boundary.lines().next().unwrap();
    assert!(header.split(',').all(|f| f.parse::<f64>().is_err()), "{header}");
    assert!(boundary.lines().count() > 1000);
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&bin().arg("no-such-command").output().unwrap()), 2);
    assert_eq!(code(&run_in(tmp.path(), &["survivors", "--replicates", "0"])), 2);
    assert_eq!(code(&run_in(tmp.path(), &["survivors", "--K", "100", "--jobs", "0"])), 2);
    assert_eq!(code(&run_in(tmp.path(), &["identity-test", "--K", "100", "--K", "200"])), 2);
    assert_eq!(code(&run_in(tmp.path(), &["survivors", "--config", "/nonexistent/run.toml"])), 2);

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{ "K": 100, "not_a_field": 1 }"#).unwrap();
    assert_eq!(code(&run_in(tmp.path(), &["survivors", "--config", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&bin().arg("--help").output().unwrap()), 0);
}

#[test]
fn failed_check_exits_one_only_when_asked() {
    // at K = 100 the survivor count sits well below its limit window
    let tmp = tempfile::tempdir().unwrap();
    let args = ["survivors", "--K", "100", "--replicates", "4", "--seed", "3"];
    assert_eq!(code(&run_in(tmp.path(), &args)), 0);
    let mut checked = args.to_vec();
    checked.push("--check");
    let out = run_in(tmp.path(), &checked);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL survivor-window"));
    let summary = read_json(&tmp.path().join("summary.json"));
    assert_eq!(summary["passed"], false);
}

#[test]
fn toml_config_is_honoured_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "K = [64, 144]\nreplicates = 3\nseed_base = 40\nh = 0.002\nt_end = 1.0\n").unwrap();
    let dir = tmp.path().join("out");
    let out = run_in(&dir, &["survivors", "--config", cfg.to_str().unwrap(), "--replicates", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let resolved = read_json(&dir.join("config.json"));
    assert_eq!(resolved["K"], serde_json::json!([64, 144]));
    assert_eq!(resolved["replicates"], 2);
    assert_eq!(resolved["seed_base"], 40);
    assert!(dir.join("series/survivors_K144_seed41.csv").exists());
    assert!(!dir.join("series/survivors_K144_seed42.csv").exists());
}

#[test]
fn auto_step_resolves_to_tenth_over_k() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_in(tmp.path(), &["survivors", "--K", "400", "--replicates", "1"])), 0);
    let resolved = read_json(&tmp.path().join("config.json"));
    assert_eq!(resolved["h"], "auto");
    assert_eq!(resolved["h_resolved"][0].as_f64().unwrap(), 0.1 / 400.0);
}

#[test]
fn outputs_are_reproducible_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["hydro-compare", "--K", "400", "--replicates", "3", "--seed", "7"];
    let mut outputs = Vec::new();
    for (i, jobs) in ["1", "1", "2"].into_iter().enumerate() {
        let dir = tmp.path().join(format!("run{i}"));
        let mut a = args.to_vec();
        a.extend(["--jobs", jobs]);
        let out = run_in(&dir, &a);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(results(&dir));
    }
    assert!(outputs[0].len() > 3);
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn small_validate_run_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("fast.json");
    fs::write(&cfg, r#"{ "K": 256, "replicates": 5, "confinement_paths": 20000, "seed_base": 1 }"#).unwrap();
    let out = run_in(tmp.path(), &["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let summary = read_json(&tmp.path().join("summary.json"));
    assert_eq!(summary["passed"], true);
    assert!(tmp.path().join("series/coupling.csv").exists());
}
