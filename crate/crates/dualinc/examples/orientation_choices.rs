//! Sweep the orientation class set, from no auxiliary orientations through
//! quarter-turn sets to a non-quarter angle handled by bilinear rotation.
//!
//! ```bash
//! cargo run --release --example orientation_choices
//! ```

use dualinc::exp::{cmd_sweep, ExperimentConfig, SweepAxis};

fn main() {
    let mut cfg = ExperimentConfig::default();
    cfg.run.seed = 6;
    cfg.run.out_dir = std::env::temp_dir().join("dualinc-examples/orientation_choices");
    cfg.dataset.train_per_class = 30;
    cfg.dataset.test_per_class = 12;
    cfg.train.epochs = 6;
    cfg.train.milestones = vec![5];

    // angle lists join with '+': {0}, {0,45}, {0,90}, {0,180}, {0,90,180,270}
    let values: Vec<String> =
        ["0", "0+45", "0+90", "0+180", "0+90+180+270"].iter().map(|s| s.to_string()).collect();
    println!("sweeping orientation sets {values:?}");
    let csv = cmd_sweep(&cfg, SweepAxis::Orientations, &values).expect("sweep");
    print!("{}", std::fs::read_to_string(&csv).unwrap());
    println!("table: {}", csv.display());
    println!("(quarter-turn angles use the exact index-permutation path; 45 uses bilinear)");
}
