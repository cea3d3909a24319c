//! End-to-end integration: CLI surfaces, run-directory artifacts, sweeps,
//! analysis outputs, and property-based invariants of the data pipeline.

mod common;

use dualinc::data::{modify_batch, rotate_quarter, Image, LabeledSample, OrientationSet};
use dualinc::eval::{ensemble_decision, Strategy};
use dualinc::exp::{
    cmd_analyze, cmd_eval, cmd_sweep, cmd_train, EvalOverrides, ExperimentConfig, SweepAxis,
};
use dualinc::tensor::{lr_schedule, softmax_rows, LrSchedule, Tensor};
use proptest::prelude::*;
use std::path::Path;
use std::process::Command;

fn tiny_config(dir: &Path, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.run.seed = seed;
    cfg.run.out_dir = dir.to_path_buf();
    cfg.dataset.classes = 4;
    cfg.dataset.train_per_class = 12;
    cfg.dataset.test_per_class = 6;
    cfg.schedule.base_classes = 2;
    cfg.schedule.phases = 1;
    cfg.train.epochs = 3;
    cfg.train.milestones = vec![2];
    cfg.train.memory_per_class = 4;
    cfg
}

#[test]
fn train_run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(&dir.path().join("run"), 5);
    let summary = cmd_train(&cfg).unwrap();
    assert_eq!(summary.report.phases.len(), 2);

    for file in ["config.toml", "metrics.csv", "report.csv", "accuracy.svg"] {
        assert!(summary.run_dir.join(file).exists(), "{file} missing");
    }
    for p in 0..=1 {
        assert!(summary.run_dir.join(format!("checkpoint_phase{p}.json")).exists());
    }
    // config echo parses back to the same config
    let echo = ExperimentConfig::from_toml_file(&summary.run_dir.join("config.toml")).unwrap();
    assert_eq!(echo.run.seed, 5);

    let metrics = std::fs::read_to_string(summary.run_dir.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next().unwrap(),
        "phase,epoch,learning_rate,loss_img,loss_frgt,loss_or,loss_total,train_accuracy"
    );
    // P+1 phases x epochs records
    assert_eq!(lines.count(), 2 * 3);

    let report = std::fs::read_to_string(summary.run_dir.join("report.csv")).unwrap();
    assert!(report.starts_with("phase,classes_seen,accuracy,strategy\n"));
    assert!(report.lines().last().unwrap().starts_with("summary,4,"));
}

#[test]
fn eval_none_vs_avg_on_a_joint_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(&dir.path().join("run"), 7);
    let summary = cmd_train(&cfg).unwrap();
    let ck = summary.run_dir.join("checkpoint_phase1.json");

    let avg = cmd_eval(&ck, &EvalOverrides { strategy: Some(Strategy::Avg), ..Default::default() })
        .unwrap();
    let none =
        cmd_eval(&ck, &EvalOverrides { strategy: Some(Strategy::None), ..Default::default() })
            .unwrap();
    // two accuracies over the same classes; the avg row matches the summary
    assert_eq!(avg.phases[0].classes_seen, 4);
    assert_eq!(none.phases[0].classes_seen, 4);
    assert_eq!(avg.phases[0].accuracy, summary.report.phases[1].accuracy);
}

#[test]
fn eval_rejects_bad_angle_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(&dir.path().join("run"), 9);
    let summary = cmd_train(&cfg).unwrap();
    let ck = summary.run_dir.join("checkpoint_phase0.json");
    let err = cmd_eval(
        &ck,
        &EvalOverrides { angles: Some(vec![90.0, 0.0]), ..Default::default() },
    )
    .unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let err = cmd_eval(
        &ck,
        &EvalOverrides { angles: Some(vec![0.0, 90.0, 90.0]), ..Default::default() },
    )
    .unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn sweep_emits_one_row_per_value_with_shared_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(&dir.path().join("sweep"), 11);
    let values = vec!["0".to_string(), "0.5".to_string()];
    let csv_path = cmd_sweep(&cfg, SweepAxis::Gamma, &values).unwrap();
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "value,avg_incremental_accuracy");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,"));
    assert!(lines[2].starts_with("0.5,"));
    // per-value run dirs share the schedule seed via the config echo
    for v in 0..2 {
        let echo = ExperimentConfig::from_toml_file(
            &dir.path().join("sweep").join(format!("value{v}")).join("config.toml"),
        )
        .unwrap();
        assert_eq!(echo.run.seed, 11);
    }
}

#[test]
fn orientation_sweep_parses_angle_lists() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(&dir.path().join("sweep"), 13);
    cfg.train.epochs = 2;
    let values = vec!["0".to_string(), "0+90".to_string()];
    let csv_path = cmd_sweep(&cfg, SweepAxis::Orientations, &values).unwrap();
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains("0+90,"));
}

#[test]
fn analyze_writes_agreement_and_heatmaps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(&dir.path().join("run"), 15);
    let summary = cmd_train(&cfg).unwrap();
    let ck = summary.run_dir.join("checkpoint_phase1.json");
    let out = dir.path().join("analysis");
    let outcome = cmd_analyze(&ck, 0.0, 90.0, &[0, 1, 2], &out).unwrap();

    assert!(outcome.csv_path.exists());
    let csv = std::fs::read_to_string(&outcome.csv_path).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 7);

    assert_eq!(outcome.heatmap_paths.len(), 3);
    for p in &outcome.heatmap_paths {
        let bytes = std::fs::read(p).unwrap();
        assert!(bytes.starts_with(b"P5\n16 16\n255\n"));
        assert_eq!(bytes.len(), 13 + 256);
    }
    // the table covers the base-class test split
    assert_eq!(outcome.table.total, 2 * 6);

    match cmd_analyze(&ck, 90.0, 90.0, &[], &out) {
        Err(err) => assert_eq!(err.exit_code(), 1),
        Ok(_) => panic!("equal orientations must be rejected"),
    }
    match cmd_analyze(&ck, 0.0, 45.0, &[], &out) {
        Err(err) => assert_eq!(err.exit_code(), 1, "45 degrees is outside the trained vocabulary"),
        Ok(_) => panic!("out-of-vocabulary orientation must be rejected"),
    }
}

#[test]
fn cli_binary_exit_codes_and_outputs() {
    let bin = env!("CARGO_BIN_EXE_dualinc");
    let dir = tempfile::tempdir().unwrap();

    // config error: unknown objective
    let out = Command::new(bin)
        .args(["train", "--objective", "bogus"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown objective"));

    // config error: the plain + ensemble guard names the override
    let out = Command::new(bin)
        .args(["train", "--objective", "plain", "--strategy", "avg"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("allow_plain_ensemble"));

    // data error: missing cifar files
    let out = Command::new(bin)
        .args([
            "train",
            "--dataset",
            "cifar100",
            "--preset",
            "cifar",
            "--base-classes",
            "50",
            "--phases",
            "5",
            "--cifar-train",
            "/nonexistent/train.bin",
            "--cifar-test",
            "/nonexistent/test.bin",
            "--out-dir",
            dir.path().join("c").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // a tiny full run through the binary
    let run_dir = dir.path().join("ok");
    let out = Command::new(bin)
        .args([
            "train",
            "--classes",
            "4",
            "--base-classes",
            "2",
            "--phases",
            "1",
            "--train-per-class",
            "10",
            "--test-per-class",
            "5",
            "--epochs",
            "2",
            "--memory",
            "3",
            "--seed",
            "3",
            "--out-dir",
            run_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("average incremental accuracy"));

    // eval the produced checkpoint through the binary
    let out = Command::new(bin)
        .args([
            "eval",
            "--checkpoint",
            run_dir.join("checkpoint_phase1.json").to_str().unwrap(),
            "--strategy",
            "mode",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("summary,4,"));

    // nonexistent checkpoint is a data error
    let out = Command::new(bin)
        .args(["eval", "--checkpoint", "/nonexistent.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_root_env_var_prefixes_relative_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(Path::new("rel/run"), 17);
    cfg.train.epochs = 1;
    // resolved_out_dir is read per call; scope the env var tightly
    std::env::set_var("DUALINC_OUT_ROOT", dir.path());
    let resolved = cfg.resolved_out_dir();
    std::env::remove_var("DUALINC_OUT_ROOT");
    assert!(resolved.starts_with(dir.path()));
    assert!(resolved.ends_with("rel/run"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn modify_batch_multiset_invariants(
        n in 1usize..6,
        m in 1usize..4,
        side in 4usize..9,
        seed in 0u64..1000,
    ) {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let batch: Vec<LabeledSample> = (0..n)
            .map(|i| LabeledSample {
                image: Image::new(1, side, side, (0..side * side).map(|_| r.gen_range(0.0..1.0)).collect()),
                image_class: i % 3,
            })
            .collect();
        let angles: Vec<f32> = [0.0f32, 90.0, 180.0, 270.0][..m].to_vec();
        let set = OrientationSet::new(angles);
        let out = modify_batch(&batch, &set);

        prop_assert_eq!(out.len(), n * m);
        // the multiset of image classes is the input multiset repeated m times
        let mut want: Vec<usize> = batch.iter().flat_map(|s| std::iter::repeat(s.image_class).take(m)).collect();
        let mut got: Vec<usize> = out.iter().map(|s| s.image_class).collect();
        want.sort_unstable();
        got.sort_unstable();
        prop_assert_eq!(want, got);
        // orientation labels follow the sample-major pattern
        for (idx, s) in out.iter().enumerate() {
            prop_assert_eq!(s.orientation_class, idx % m);
        }
    }

    #[test]
    fn quarter_turn_four_cycle(side in 1usize..10, seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let img = Image::new(2, side, side, (0..2 * side * side).map(|_| r.gen_range(0.0..1.0)).collect());
        let mut cur = img.clone();
        for _ in 0..4 {
            cur = rotate_quarter(&cur, 1);
        }
        prop_assert_eq!(cur, img);
    }

    #[test]
    fn softmax_rows_are_valid_distributions(
        n in 1usize..5,
        k in 1usize..8,
        seed in 0u64..1000,
    ) {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let logits = Tensor::new(&[n, k], (0..n * k).map(|_| r.gen_range(-30.0..30.0f32)).collect());
        let p = softmax_rows(&logits);
        for i in 0..n {
            let row = p.row(i);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            let sum: f32 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn step_schedule_never_increases(
        base in 0.001f64..1.0,
        m1 in 1usize..10,
        gap in 1usize..10,
    ) {
        let kind = LrSchedule::Step { milestones: vec![m1, m1 + gap], decay: 0.1 };
        let mut last = f64::INFINITY;
        for epoch in 0..m1 + 2 * gap {
            let lr = lr_schedule(&kind, base, epoch);
            prop_assert!(lr <= last);
            last = lr;
        }
    }

    #[test]
    fn avg_decision_ignores_row_order_beyond_zero(
        k in 2usize..6,
        m in 2usize..5,
        seed in 0u64..1000,
    ) {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f32>> = (0..m)
            .map(|_| {
                let raw: Vec<f32> = (0..k).map(|_| r.gen_range(0.01..1.0f32)).collect();
                let s: f32 = raw.iter().sum();
                raw.into_iter().map(|v| v / s).collect()
            })
            .collect();
        let mut swapped = rows.clone();
        swapped[1..].reverse();
        prop_assert_eq!(
            ensemble_decision(&rows, Strategy::Avg),
            ensemble_decision(&swapped, Strategy::Avg)
        );
    }
}
