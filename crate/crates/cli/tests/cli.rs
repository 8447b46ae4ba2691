use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn plumebed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plumebed")).args(args).output().unwrap()
}

fn stderr_record(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("an error record");
    serde_json::from_str(line).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn validate_echoes_the_resolved_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "case = 2\nseed = 5\n");
    let out_dir = tmp.path().join("out");
    let out = plumebed(&["validate", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--kinds", "w1,kl"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("mode = \"expected\""));
    assert!(stdout.contains("kinds = [\"w1\", \"kl\"]"));
    assert!(stdout.contains("seed = 5"));
    assert_eq!(fs::read_to_string(out_dir.join("resolved_config.toml")).unwrap(), stdout);
}

#[test]
fn validation_errors_exit_with_two_and_list_problems() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "case = 5\nmode = \"actual\"\nstages = 0\n[design]\ncandidates = 1\n");
    let out = plumebed(&["validate", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let record = stderr_record(&out);
    assert_eq!(record["error"], "ValidationError");
    assert_eq!(record["problems"].as_array().unwrap().len(), 3, "{record}");

    let out = plumebed(&["validate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn other_failures_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.toml");
    let out = plumebed(&["case", "1", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_record(&out)["message"].as_str().unwrap().contains("nope.toml"));
}

#[test]
fn case_run_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "stages = 1\n[design]\ncandidates = 5\n");
    let out_dir = tmp.path().join("out");
    let out = plumebed(&["case", "1", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--kinds", "kl", "--seed", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = out_dir.join("case1_kl_actual_seed2");
    for f in ["metrics.jsonl", "reward_stage1.csv", "posterior_stage1.csv"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    assert!(String::from_utf8(out.stdout).unwrap().contains("stage 1"));
}
