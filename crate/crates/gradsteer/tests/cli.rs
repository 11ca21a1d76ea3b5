//! End-to-end CLI contract: exit codes, emitted artifacts and the metrics
//! CSV schema, exercised through the compiled binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gradsteer"))
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("gradsteer_cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_tiny_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("config.toml");
    let out_dir = dir.join("run");
    let text = format!(
        r#"
[data]
segment_len = 128

[model]
enc_kernel = 8
enc_stride = 4
n_bases = 8
n_blocks = 1
hidden = 8

[run]
epochs = 1
batches_per_epoch = 2
batch_size = 4
out_dir = "{}"

[eval]
n_val = 8
n_test = 8
{extra}
"#,
        out_dir.display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.env("GRADSTEER_THREADS", "1").output().unwrap()
}

#[test]
fn train_succeeds_and_emits_artifacts() {
    let dir = scratch_dir("train_ok");
    let config = write_tiny_config(&dir, "");
    let out = run(bin().args(["train", "--config"]).arg(&config));
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let run_dir = dir.join("run");
    for artifact in [
        "metrics.csv",
        "convergence.csv",
        "weights_log.csv",
        "test_values.csv",
        "config.toml",
        "checkpoint.ckpt",
    ] {
        assert!(run_dir.join(artifact).exists(), "missing {artifact}");
    }
    let metrics = std::fs::read_to_string(run_dir.join("metrics.csv")).unwrap();
    assert_eq!(
        metrics.lines().next().unwrap(),
        "epoch,split,mean_sisdri,std_sisdri,q01,q05,q10,q25,q50,q75,q90,q95,q99"
    );
    for line in metrics.lines().skip(1) {
        assert_eq!(line.split(',').count(), 13, "bad row: {line}");
    }

    // eval on the produced checkpoint
    let out = run(bin()
        .args(["eval", "--checkpoint"])
        .arg(run_dir.join("checkpoint.ckpt"))
        .arg("--config")
        .arg(&config));
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("test"), "eval output: {stdout}");

    // report re-renders SVGs from the run CSVs
    let out = run(bin().args(["report", "--run"]).arg(&run_dir));
    assert!(out.status.success());
    assert!(run_dir.join("convergence.svg").exists());
    assert!(run_dir.join("test_hist.svg").exists());
}

#[test]
fn seed_override_changes_the_run() {
    let dir = scratch_dir("seed_override");
    let config = write_tiny_config(&dir, "");
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for (out, seed) in [(&out_a, "1"), (&out_b, "2")] {
        let res = run(bin()
            .args(["train", "--config"])
            .arg(&config)
            .args(["--seed", seed, "--out"])
            .arg(out));
        assert!(res.status.success());
    }
    let a = std::fs::read(out_a.join("metrics.csv")).unwrap();
    let b = std::fs::read(out_b.join("metrics.csv")).unwrap();
    assert_ne!(a, b, "different seeds must produce different metrics");
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = scratch_dir("unknown_key");
    let config = write_tiny_config(&dir, "\n[typo_section]\nvalue = 1\n");
    let out = run(bin().args(["train", "--config"]).arg(&config));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn invalid_config_value_exits_2() {
    let dir = scratch_dir("bad_value");
    let config = write_tiny_config(&dir, "");
    let text = std::fs::read_to_string(&config)
        .unwrap()
        .replace("batch_size = 4", "batch_size = 1");
    std::fs::write(&config, text).unwrap();
    let out = run(bin().args(["train", "--config"]).arg(&config));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_exits_2() {
    let out = run(bin().args(["train", "--config", "/nonexistent/config.toml"]));
    assert_eq!(out.status.code(), Some(2));
}
