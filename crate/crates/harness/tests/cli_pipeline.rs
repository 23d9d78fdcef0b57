//! End-to-end pipeline through the CLI binary: collect -> train -> eval ->
//! report, plus exit-code checks.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hiact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hiact"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_tiny_config(path: &Path) {
    fs::write(
        path,
        "d_model = 16\nn_heads = 2\nn_encoder_layers = 1\nn_decoder_layers = 1\n\
         ffn_dim = 32\nz_dim = 4\nchunk_k = 5\ntrain_steps = 25\nbatch_size = 4\n",
    )
    .unwrap();
}

#[test]
fn collect_train_eval_report_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let model = dir.path().join("model.hiam");
    let evald = dir.path().join("eval");
    let cfg = dir.path().join("tiny.cfg");
    write_tiny_config(&cfg);

    let out = hiact(&[
        "collect",
        "--n-success", "3",
        "--n-recovery", "1",
        "--seed", "5",
        "--out", data.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "collect failed: {}", String::from_utf8_lossy(&out.stderr));
    assert!(data.join("manifest.json").exists());
    assert!(data.join("episode_0003.bin").exists());

    let out = hiact(&[
        "train",
        "--dataset", data.to_str().unwrap(),
        "--no-haptic",
        "--config", cfg.to_str().unwrap(),
        "--seed", "3",
        "--out", model.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "train failed: {}", String::from_utf8_lossy(&out.stderr));
    assert!(model.exists());

    let out = hiact(&[
        "eval",
        "--model", model.to_str().unwrap(),
        "--trials", "2",
        "--p-slip", "0.3",
        "--seed", "1",
        "--out", evald.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "eval failed: {}", String::from_utf8_lossy(&out.stderr));
    let gen_csv = evald.join("generalization.csv");
    assert!(gen_csv.exists());
    assert_eq!(fs::read_to_string(&gen_csv).unwrap().lines().count(), 2);

    let report_out = dir.path().join("report");
    let out = hiact(&["report", "--in", evald.to_str().unwrap(), "--out", report_out.to_str().unwrap()]);
    assert!(out.status.success(), "report failed: {}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read_to_string(report_out.join("report.md")).unwrap(),
        fs::read_to_string(evald.join("report.md")).unwrap(),
        "regenerated report matches the original"
    );
}

#[test]
fn error_exit_codes_reflect_categories() {
    // io error: dataset directory does not exist -> data category (manifest unreadable)
    let out = hiact(&["train", "--dataset", "/nonexistent", "--out", "/tmp/x.hiam"]);
    assert!(!out.status.success());

    // config error: malformed config file -> exit 2
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "not_a_key = 7\n").unwrap();
    let data = dir.path().join("data");
    let out = hiact(&["collect", "--n-success", "1", "--n-recovery", "0", "--seed", "1", "--out", data.to_str().unwrap()]);
    assert!(out.status.success());
    let out = hiact(&[
        "train",
        "--dataset", data.to_str().unwrap(),
        "--config", cfg.to_str().unwrap(),
        "--out", dir.path().join("m.hiam").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "config errors exit 2");

    // data-format error: corrupt dataset -> exit 4
    let victim = data.join("episode_0000.bin");
    let mut bytes = fs::read(&victim).unwrap();
    bytes[20] ^= 0xFF;
    fs::write(&victim, bytes).unwrap();
    let out = hiact(&[
        "train",
        "--dataset", data.to_str().unwrap(),
        "--out", dir.path().join("m.hiam").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4), "checksum errors exit 4");

    // usage error from clap -> exit 2
    let out = hiact(&["train"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn collect_is_deterministic_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out_dir in [&a, &b] {
        let out = hiact(&[
            "collect",
            "--n-success", "2",
            "--n-recovery", "1",
            "--seed", "77",
            "--out", out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    for name in ["manifest.json", "episode_0000.bin", "episode_0002.bin"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
}
