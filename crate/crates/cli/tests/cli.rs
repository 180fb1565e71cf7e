//! End-to-end tests driving the installed binary: full pipeline composition,
//! exit-code conventions, seeding, and report plumbing.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lfsr"));
    // Seeding must come only from flags/config in these tests.
    cmd.env_remove("LFSR_SEED");
    cmd
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn lfsr");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_tiny_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.cfg");
    std::fs::write(
        &path,
        "patch_hr = 16\nlr_init = 2e-4\ncheckpoint_every = 2\n# comment line\n",
    )
    .unwrap();
    path
}

fn generate_pair(root: &Path, seed: u64) {
    run_ok(bin().args([
        "generate-synthetic",
        "--disparity",
        "0.6",
        "--angular",
        "3x3",
        "--size",
        "40x40",
        "--seed",
        &seed.to_string(),
        "--out",
        root.join("hr/scene-a").to_str().unwrap(),
        "--lr-out",
        root.join("lr/scene-a").to_str().unwrap(),
        "--alpha",
        "2",
    ]));
}

#[test]
fn pipeline_composes_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    generate_pair(root, 5);
    assert!(root.join("hr/scene-a/meta.json").is_file());
    assert!(root.join("hr/scene-a/view_02_02.png").is_file());
    assert!(root.join("lr/scene-a/view_00_00.png").is_file());

    let cfg = write_tiny_config(root);
    run_ok(bin().args([
        "train-sr",
        "--scenes",
        root.join("hr").to_str().unwrap(),
        "--out",
        root.join("run1").to_str().unwrap(),
        "--alpha",
        "2",
        "--angular",
        "3x3",
        "--seed",
        "11",
        "--epochs",
        "2",
        "--config",
        cfg.to_str().unwrap(),
    ]));
    let ato = root.join("run1/ato.ckpt");
    assert!(ato.is_file());
    assert!(root.join("run1/trace-stage1.json").is_file());

    run_ok(bin().args([
        "train-reg",
        "--scenes",
        root.join("hr").to_str().unwrap(),
        "--model",
        ato.to_str().unwrap(),
        "--out",
        root.join("run2").to_str().unwrap(),
        "--seed",
        "12",
        "--epochs",
        "2",
        "--config",
        cfg.to_str().unwrap(),
    ]));
    let reg = root.join("run2/reg.ckpt");
    assert!(reg.is_file());

    run_ok(bin().args([
        "super-resolve",
        "--scene",
        root.join("lr/scene-a").to_str().unwrap(),
        "--model",
        ato.to_str().unwrap(),
        "--reg",
        reg.to_str().unwrap(),
        "--out",
        root.join("sr/scene-a").to_str().unwrap(),
    ]));
    assert!(root.join("sr/scene-a/view_01_01.png").is_file());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root.join("sr/scene-a/meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["h"], 40);
    assert_eq!(meta["w"], 40);

    let eval_out = run_ok(bin().args([
        "evaluate",
        "--lr",
        root.join("lr").to_str().unwrap(),
        "--hr",
        root.join("hr").to_str().unwrap(),
        "--model",
        ato.to_str().unwrap(),
        "--reg",
        reg.to_str().unwrap(),
        "--out",
        root.join("eval").to_str().unwrap(),
    ]));
    let text = stdout_of(&eval_out);
    assert!(text.contains("psnr_mean"), "summary missing: {text}");
    assert!(root.join("eval/report.json").is_file());
    let csv = std::fs::read_to_string(root.join("eval/pr.csv")).unwrap();
    assert!(csv.starts_with("scene,threshold,recall,precision"));

    run_ok(bin().args([
        "plot",
        "--report",
        root.join("eval/report.json").to_str().unwrap(),
        "--scene",
        root.join("hr/scene-a").to_str().unwrap(),
        "--out",
        root.join("plots").to_str().unwrap(),
    ]));
    for name in [
        "psnr_heatmap.png",
        "pr_curve.png",
        "epi_horizontal.png",
        "epi_vertical.png",
    ] {
        assert!(root.join("plots").join(name).is_file(), "missing {name}");
    }
}

#[test]
fn unknown_flag_exits_2_with_usage() {
    let out = bin()
        .args(["generate-synthetic", "--bogus"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.to_lowercase().contains("usage"), "stderr: {stderr}");
}

#[test]
fn runtime_errors_exit_1_with_machine_readable_line() {
    let out = bin()
        .args([
            "super-resolve",
            "--scene",
            "/nonexistent-scene",
            "--model",
            "/nonexistent.ckpt",
            "--out",
            "/tmp/never-written",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.lines().any(|l| l.starts_with("error: ")),
        "stderr: {stderr}"
    );
}

#[test]
fn train_sr_epochs_zero_writes_initialized_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    generate_pair(root, 6);
    run_ok(bin().args([
        "train-sr",
        "--scenes",
        root.join("hr").to_str().unwrap(),
        "--out",
        root.join("run").to_str().unwrap(),
        "--angular",
        "3x3",
        "--epochs",
        "0",
    ]));
    assert!(root.join("run/ato.ckpt").is_file());
}

#[test]
fn generate_synthetic_default_grid_example() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("s");
    run_ok(bin().args([
        "generate-synthetic",
        "--disparity",
        "1.0",
        "--angular",
        "7x7",
        "--out",
        scene.to_str().unwrap(),
    ]));
    let views = std::fs::read_dir(&scene)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("view_")
        })
        .count();
    assert_eq!(views, 49);
    assert!(scene.join("meta.json").is_file());
}

#[test]
fn evaluate_identical_scenes_prints_ssim_one() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    generate_pair(root, 9);
    let cfg = write_tiny_config(root);
    run_ok(bin().args([
        "train-sr",
        "--scenes",
        root.join("hr").to_str().unwrap(),
        "--out",
        root.join("run").to_str().unwrap(),
        "--angular",
        "3x3",
        "--seed",
        "4",
        "--epochs",
        "1",
        "--config",
        cfg.to_str().unwrap(),
    ]));
    let ato = root.join("run/ato.ckpt");
    // Write the model's own output as the reference: evaluating against it
    // must then report a perfect structural match.
    run_ok(bin().args([
        "super-resolve",
        "--scene",
        root.join("lr/scene-a").to_str().unwrap(),
        "--model",
        ato.to_str().unwrap(),
        "--out",
        root.join("ref/scene-a").to_str().unwrap(),
    ]));
    let out = run_ok(bin().args([
        "evaluate",
        "--lr",
        root.join("lr").to_str().unwrap(),
        "--hr",
        root.join("ref").to_str().unwrap(),
        "--model",
        ato.to_str().unwrap(),
        "--out",
        root.join("eval").to_str().unwrap(),
    ]));
    let text = stdout_of(&out);
    assert!(
        text.contains("ssim_mean = 1.000000"),
        "expected perfect ssim, got: {text}"
    );
}

#[test]
fn seed_env_fallback_matches_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    run_ok(bin().args([
        "generate-synthetic",
        "--angular",
        "3x3",
        "--size",
        "32x32",
        "--seed",
        "21",
        "--out",
        root.join("a").to_str().unwrap(),
    ]));
    let mut env_cmd = bin();
    env_cmd.env("LFSR_SEED", "21");
    run_ok(env_cmd.args([
        "generate-synthetic",
        "--angular",
        "3x3",
        "--size",
        "32x32",
        "--out",
        root.join("b").to_str().unwrap(),
    ]));
    let va = std::fs::read(root.join("a/view_01_01.png")).unwrap();
    let vb = std::fs::read(root.join("b/view_01_01.png")).unwrap();
    assert_eq!(va, vb, "LFSR_SEED must behave exactly like --seed");

    let mut bad = bin();
    bad.env("LFSR_SEED", "not-a-number");
    let out = bad
        .args([
            "generate-synthetic",
            "--out",
            root.join("c").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    generate_pair(root, 3);
    let cfg = root.join("bad.cfg");
    std::fs::write(&cfg, "bogus_knob = 1\n").unwrap();
    let out = bin()
        .args([
            "train-sr",
            "--scenes",
            root.join("hr").to_str().unwrap(),
            "--out",
            root.join("run").to_str().unwrap(),
            "--angular",
            "3x3",
            "--epochs",
            "0",
            "--config",
            cfg.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bogus_knob"), "stderr: {stderr}");
}

#[test]
fn seeded_training_runs_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    generate_pair(root, 8);
    let cfg = write_tiny_config(root);
    for run in ["r1", "r2"] {
        run_ok(bin().args([
            "train-sr",
            "--scenes",
            root.join("hr").to_str().unwrap(),
            "--out",
            root.join(run).to_str().unwrap(),
            "--angular",
            "3x3",
            "--seed",
            "77",
            "--epochs",
            "2",
            "--config",
            cfg.to_str().unwrap(),
        ]));
    }
    let a = std::fs::read(root.join("r1/ato.ckpt")).unwrap();
    let b = std::fs::read(root.join("r2/ato.ckpt")).unwrap();
    assert_eq!(a, b, "same seed must give byte-identical checkpoints");
}
