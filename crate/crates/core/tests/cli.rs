use std::path::Path;
use std::process::{Command, Output};

fn sain(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sain"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn synth(dir: &Path, name: &str) {
    ok(&sain(dir, &["synth", "--chain-len", "1", "--count", "12", "--seed", "3", "--out", name]));
}

fn train(dir: &Path, out: &str) -> Vec<u8> {
    ok(&sain(
        dir,
        &["train", "--data", "d.json", "--M", "2", "--d-s", "8", "--d-w", "4", "--steps", "6", "--batch-size", "4", "--out", out],
    ));
    std::fs::read(dir.join(out).join("final.ckpt")).unwrap()
}

#[test]
fn synth_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "a.json");
    synth(dir.path(), "b.json");
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, std::fs::read(dir.path().join("b.json")).unwrap());
}

#[test]
fn missing_data_names_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = sain(dir.path(), &["train"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--data"));
}

#[test]
fn train_eval_round_trip_and_step_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "d.json");
    let first = train(d, "run1");
    assert_eq!(first, train(d, "run2"));
    assert!(d.join("run1/metrics.jsonl").exists());

    ok(&sain(d, &["eval", "--data", "d.json", "--checkpoint", "run1/final.ckpt", "--out", "e.json"]));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("e.json")).unwrap()).unwrap();
    assert!(report["exact_match"].is_number());

    let bad = sain(d, &["eval", "--data", "d.json", "--checkpoint", "run1/final.ckpt", "--M", "4"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("incompatible"));

    ok(&sain(d, &["train", "--config", "run1/run.json", "--out", "run3"]));
    assert_eq!(first, std::fs::read(d.join("run3/final.ckpt")).unwrap());
}

#[test]
fn gradcheck_command_passes() {
    let dir = tempfile::tempdir().unwrap();
    ok(&sain(dir.path(), &["gradcheck", "--M", "2"]));
}
