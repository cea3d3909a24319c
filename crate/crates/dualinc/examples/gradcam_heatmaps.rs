//! Export gradient-weighted class activation maps for a few test images as
//! portable graymaps (P5), both via the analyze command and the direct API.
//!
//! ```bash
//! cargo run --release --example gradcam_heatmaps
//! ```

use dualinc::data::{make_phase_schedule, phase_data};
use dualinc::eval::{gradcam, write_pgm};
use dualinc::exp::{build_dataset, cmd_analyze, cmd_train, ExperimentConfig};
use dualinc::model::load_checkpoint;

fn main() {
    let mut cfg = ExperimentConfig::default();
    cfg.run.seed = 3;
    cfg.run.out_dir = std::env::temp_dir().join("dualinc-examples/gradcam_heatmaps");
    cfg.dataset.train_per_class = 30;
    cfg.dataset.test_per_class = 12;
    cfg.train.epochs = 6;
    cfg.train.milestones = vec![5];

    let summary = cmd_train(&cfg).expect("run");
    let ck = summary.run_dir.join(format!("checkpoint_phase{}.json", cfg.schedule.phases));

    // through the analyze command: heatmaps for base-phase test samples
    let outcome = cmd_analyze(&ck, 0.0, 90.0, &[0, 1, 2], &summary.run_dir.join("analysis"))
        .expect("analysis");
    println!("analyze wrote:");
    for p in &outcome.heatmap_paths {
        println!("  {}", p.display());
    }

    // through the direct API: pick any image and target class
    let (model, _) = load_checkpoint(&ck).expect("checkpoint");
    let dataset = build_dataset(&cfg).unwrap();
    let schedule = make_phase_schedule(
        cfg.total_classes(),
        cfg.schedule.base_classes,
        cfg.schedule.phases,
        cfg.class_order_seed(),
    )
    .unwrap();
    let split = phase_data(&dataset, &schedule, cfg.schedule.phases).unwrap();
    let sample = &split.test[0];
    let map = gradcam(&model, &sample.image, sample.image_class);
    let (h, w) = (map.shape()[0], map.shape()[1]);
    println!("direct gradcam: {h}x{w} map in [0,1] for true class {}", sample.image_class);
    let path = summary.run_dir.join("direct_heatmap.pgm");
    write_pgm(&path, &map).unwrap();
    println!("  {}", path.display());

    // coarse ASCII rendering of the activation map
    for r in (0..h).step_by(2) {
        let row: String = (0..w)
            .step_by(1)
            .map(|c| match (map.data()[r * w + c] * 4.0) as usize {
                0 => ' ',
                1 => '.',
                2 => 'o',
                3 => 'O',
                _ => '@',
            })
            .collect();
        println!("  |{row}|");
    }
}
