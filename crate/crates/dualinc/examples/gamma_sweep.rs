//! Sweep the weight of the orientation loss term: one full run per value
//! with a shared seed, reported as a comparison CSV.
//!
//! ```bash
//! cargo run --release --example gamma_sweep
//! ```

use dualinc::exp::{cmd_sweep, ExperimentConfig, SweepAxis};

fn main() {
    let mut cfg = ExperimentConfig::default();
    cfg.run.seed = 4;
    cfg.run.out_dir = std::env::temp_dir().join("dualinc-examples/gamma_sweep");
    cfg.dataset.train_per_class = 30;
    cfg.dataset.test_per_class = 12;
    cfg.train.epochs = 6;
    cfg.train.milestones = vec![5];

    let values: Vec<String> = ["0", "0.5", "1"].iter().map(|s| s.to_string()).collect();
    println!("sweeping gamma over {values:?} (shared seed {})", cfg.run.seed);
    let csv = cmd_sweep(&cfg, SweepAxis::Gamma, &values).expect("sweep");
    print!("{}", std::fs::read_to_string(&csv).unwrap());
    println!("table: {}", csv.display());
}
