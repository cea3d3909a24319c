//! Sweep the replay budget: how many original exemplars are kept per class.
//!
//! ```bash
//! cargo run --release --example memory_budget
//! ```

use dualinc::exp::{cmd_sweep, ExperimentConfig, SweepAxis};

fn main() {
    let mut cfg = ExperimentConfig::default();
    cfg.run.seed = 8;
    cfg.run.out_dir = std::env::temp_dir().join("dualinc-examples/memory_budget");
    cfg.dataset.train_per_class = 30;
    cfg.dataset.test_per_class = 12;
    cfg.train.epochs = 6;
    cfg.train.milestones = vec![5];

    let values: Vec<String> = ["5", "10", "20"].iter().map(|s| s.to_string()).collect();
    println!("sweeping replay exemplars per class over {values:?}");
    let csv = cmd_sweep(&cfg, SweepAxis::Memory, &values).expect("sweep");
    print!("{}", std::fs::read_to_string(&csv).unwrap());
    println!("table: {}", csv.display());
}
