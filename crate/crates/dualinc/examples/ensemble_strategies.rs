//! Compare the data-ensemble strategies (avg, mode, max) against plain
//! single-orientation inference on one jointly trained model.
//!
//! ```bash
//! cargo run --release --example ensemble_strategies
//! ```

use dualinc::data::{make_phase_schedule, phase_data};
use dualinc::eval::{evaluate, Strategy};
use dualinc::exp::{build_dataset, cmd_train, ExperimentConfig};
use dualinc::model::load_checkpoint;

fn main() {
    let mut cfg = ExperimentConfig::default();
    cfg.run.seed = 1;
    cfg.run.out_dir = std::env::temp_dir().join("dualinc-examples/ensemble_strategies");

    let summary = cmd_train(&cfg).expect("run");
    let ck = summary.run_dir.join(format!("checkpoint_phase{}.json", cfg.schedule.phases));
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
    let orientations = cfg.orientation_set();

    println!("final-phase accuracy over all {} classes:", split.seen_classes);
    for strategy in [Strategy::None, Strategy::Mode, Strategy::Max, Strategy::Avg] {
        let acc = evaluate(&model, &split.test, &orientations, strategy);
        println!("  {:>4}: {:.4}", strategy.name(), acc);
    }
}
