//! End-to-end incremental run on the synthetic oriented dataset: base phase
//! plus two incremental phases, joint objective, ensemble evaluation, and
//! all run artifacts (checkpoints, metrics CSV, report CSV, accuracy SVG).
//!
//! ```bash
//! cargo run --release --example train_synthetic
//! ```

use dualinc::exp::{cmd_train, ExperimentConfig};

fn main() {
    let mut cfg = ExperimentConfig::default();
    cfg.run.seed = 42;
    cfg.run.out_dir = std::env::temp_dir().join("dualinc-examples/train_synthetic");
    cfg.dataset.train_per_class = 40;
    cfg.dataset.test_per_class = 15;
    cfg.train.epochs = 8;
    cfg.train.milestones = vec![6];

    println!(
        "training {} classes: base {}, then {} phases of {} new classes each",
        cfg.total_classes(),
        cfg.schedule.base_classes,
        cfg.schedule.phases,
        (cfg.total_classes() - cfg.schedule.base_classes) / cfg.schedule.phases,
    );
    let summary = cmd_train(&cfg).expect("run");
    for p in &summary.report.phases {
        println!(
            "phase {}: {} classes seen, accuracy {:.4}",
            p.phase, p.classes_seen, p.accuracy
        );
    }
    println!("average incremental accuracy: {:.4}", summary.average_incremental_accuracy);
    println!("artifacts in {}", summary.run_dir.display());
    for entry in std::fs::read_dir(&summary.run_dir).unwrap() {
        println!("  {}", entry.unwrap().file_name().to_string_lossy());
    }
}
