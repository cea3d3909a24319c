//! Exemplar selection for the replay memory: greedy mean-matching (herding)
//! versus a seeded random subset, on toy 2-D features.
//!
//! ```bash
//! cargo run --release --example replay_herding
//! ```

use dualinc::trainer::{select_exemplars, SelectionMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    // a cluster with a few outliers
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut features: Vec<Vec<f32>> = (0..12)
        .map(|_| vec![rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)])
        .collect();
    features.push(vec![3.0, 3.0]);
    features.push(vec![-3.0, 2.5]);

    let mean: Vec<f32> = (0..2)
        .map(|d| features.iter().map(|f| f[d]).sum::<f32>() / features.len() as f32)
        .collect();
    println!("class mean: [{:.3}, {:.3}]", mean[0], mean[1]);

    let herd = select_exemplars(&features, 4, SelectionMode::Herding, 0);
    let rand = select_exemplars(&features, 4, SelectionMode::Random, 0);
    println!("herding picks (in pick order): {herd:?}");
    println!("random picks  (seeded):        {rand:?}");

    // herding keeps the running mean of the chosen set near the class mean
    for (label, chosen) in [("herding", &herd), ("random", &rand)] {
        let m: Vec<f32> = (0..2)
            .map(|d| chosen.iter().map(|&i| features[i][d]).sum::<f32>() / chosen.len() as f32)
            .collect();
        let gap = ((m[0] - mean[0]).powi(2) + (m[1] - mean[1]).powi(2)).sqrt();
        println!("{label}: mean of chosen = [{:.3}, {:.3}], distance to class mean {gap:.4}", m[0], m[1]);
    }
}
