//! Re-evaluate a saved checkpoint with strategy and orientation overrides,
//! without retraining.
//!
//! ```bash
//! cargo run --release --example eval_checkpoint
//! ```

use dualinc::eval::Strategy;
use dualinc::exp::{cmd_eval, cmd_train, EvalOverrides, ExperimentConfig};

fn main() {
    let mut cfg = ExperimentConfig::default();
    cfg.run.seed = 12;
    cfg.run.out_dir = std::env::temp_dir().join("dualinc-examples/eval_checkpoint");
    cfg.dataset.train_per_class = 30;
    cfg.dataset.test_per_class = 12;
    cfg.train.epochs = 6;
    cfg.train.milestones = vec![5];

    let summary = cmd_train(&cfg).expect("run");
    let ck = summary.run_dir.join(format!("checkpoint_phase{}.json", cfg.schedule.phases));
    println!("checkpoint: {}\n", ck.display());

    // strategy override
    for strategy in [Strategy::None, Strategy::Avg] {
        let report = cmd_eval(
            &ck,
            &EvalOverrides { strategy: Some(strategy), ..EvalOverrides::default() },
        )
        .expect("eval");
        println!("strategy {:>4}: accuracy {:.4}", strategy.name(), report.phases[0].accuracy);
    }

    // orientation override: ensemble over four quarter turns at test time,
    // independent of the training set of orientations
    let report = cmd_eval(
        &ck,
        &EvalOverrides {
            strategy: Some(Strategy::Avg),
            angles: Some(vec![0.0, 90.0, 180.0, 270.0]),
            ..EvalOverrides::default()
        },
    )
    .expect("eval");
    println!("avg over {{0,90,180,270}}: accuracy {:.4}", report.phases[0].accuracy);
    print!("\nreport csv:\n{}", report.to_csv());
}
