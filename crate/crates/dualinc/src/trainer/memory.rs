//! Replay exemplar memory: a bounded per-class store of original
//! (untransformed) samples, filled by herding or seeded random selection.

use crate::data::LabeledSample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    Herding,
    Random,
}

/// Greedy mean-matching (herding) or seeded random exemplar choice.
///
/// Herding repeatedly picks the candidate whose inclusion brings the running
/// mean of the chosen set closest to the full-class mean, ties broken by the
/// lowest index. Returns `min(m, features.len())` indices in pick order
/// (random mode: ascending).
pub fn select_exemplars(
    features: &[Vec<f32>],
    m: usize,
    mode: SelectionMode,
    seed: u64,
) -> Vec<usize> {
    assert!(!features.is_empty(), "select_exemplars on an empty class");
    assert!(m >= 1, "capacity must be at least 1");
    let count = m.min(features.len());
    match mode {
        SelectionMode::Random => {
            let mut indices: Vec<usize> = (0..features.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            indices.shuffle(&mut rng);
            let mut chosen = indices[..count].to_vec();
            chosen.sort_unstable();
            chosen
        }
        SelectionMode::Herding => {
            let dim = features[0].len();
            debug_assert!(features.iter().all(|f| f.len() == dim));
            let n = features.len() as f64;
            let mean: Vec<f64> = (0..dim)
                .map(|d| features.iter().map(|f| f[d] as f64).sum::<f64>() / n)
                .collect();
            let mut chosen: Vec<usize> = Vec::with_capacity(count);
            let mut sum = vec![0.0f64; dim];
            for t in 1..=count {
                let mut best: Option<(usize, f64)> = None;
                for (i, f) in features.iter().enumerate() {
                    if chosen.contains(&i) {
                        continue;
                    }
                    let mut dist = 0.0f64;
                    for d in 0..dim {
                        let gap = mean[d] - (sum[d] + f[d] as f64) / t as f64;
                        dist += gap * gap;
                    }
                    // strict < keeps the lowest index on ties
                    if best.map_or(true, |(_, bd)| dist < bd) {
                        best = Some((i, dist));
                    }
                }
                let (pick, _) = best.expect("candidate available");
                for d in 0..dim {
                    sum[d] += features[pick][d] as f64;
                }
                chosen.push(pick);
            }
            chosen
        }
    }
}

/// Per-class bounded store of original samples used for replay. Class keys
/// are seen-so-far ids, so entries stay valid across phases.
pub struct ExemplarMemory {
    capacity_per_class: usize,
    selection: SelectionMode,
    store: BTreeMap<usize, Vec<LabeledSample>>,
}

impl ExemplarMemory {
    pub fn new(capacity_per_class: usize, selection: SelectionMode) -> Self {
        ExemplarMemory { capacity_per_class, selection, store: BTreeMap::new() }
    }

    pub fn capacity_per_class(&self) -> usize {
        self.capacity_per_class
    }

    pub fn selection(&self) -> SelectionMode {
        self.selection
    }

    /// Classes currently holding exemplars.
    pub fn classes(&self) -> impl Iterator<Item = usize> + '_ {
        self.store.keys().copied()
    }

    pub fn class_count(&self) -> usize {
        self.store.len()
    }

    pub fn len(&self) -> usize {
        self.store.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    pub fn of_class(&self, class: usize) -> &[LabeledSample] {
        self.store.get(&class).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Replace the stored exemplars of one class; enforces the capacity.
    pub fn set_class(&mut self, class: usize, samples: Vec<LabeledSample>) {
        assert!(
            samples.len() <= self.capacity_per_class,
            "class {class}: {} exemplars exceed capacity {}",
            samples.len(),
            self.capacity_per_class
        );
        debug_assert!(samples.iter().all(|s| s.image_class == class));
        self.store.insert(class, samples);
    }

    /// All stored exemplars, class-ordered.
    pub fn all(&self) -> Vec<&LabeledSample> {
        self.store.values().flatten().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Literal greedy mean-matching, recomputing every distance from scratch.
    fn herding_oracle(features: &[Vec<f32>], m: usize) -> Vec<usize> {
        let dim = features[0].len();
        let mut mean = vec![0.0f64; dim];
        for f in features {
            for d in 0..dim {
                mean[d] += f[d] as f64;
            }
        }
        for v in &mut mean {
            *v /= features.len() as f64;
        }
        let mut chosen: Vec<usize> = Vec::new();
        while chosen.len() < m.min(features.len()) {
            let mut best_idx = usize::MAX;
            let mut best_dist = f64::INFINITY;
            for i in 0..features.len() {
                if chosen.contains(&i) {
                    continue;
                }
                let t = (chosen.len() + 1) as f64;
                let mut dist = 0.0;
                for d in 0..dim {
                    let mut s = features[i][d] as f64;
                    for &c in &chosen {
                        s += features[c][d] as f64;
                    }
                    let gap = mean[d] - s / t;
                    dist += gap * gap;
                }
                if dist < best_dist {
                    best_dist = dist;
                    best_idx = i;
                }
            }
            chosen.push(best_idx);
        }
        chosen
    }

    #[test]
    fn one_dimensional_toy_picks_the_mean_neighbor() {
        let features = vec![vec![-1.0], vec![0.0], vec![1.0]];
        assert_eq!(select_exemplars(&features, 1, SelectionMode::Herding, 0), vec![1]);
    }

    #[test]
    fn capacity_beyond_supply_returns_everything() {
        let features = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let chosen = select_exemplars(&features, 10, SelectionMode::Herding, 0);
        let mut sorted = chosen.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1]);
    }

    #[test]
    fn herding_matches_bruteforce_oracle_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xbeef);
        for _ in 0..200 {
            let n = rng.gen_range(1..=8);
            let dim = rng.gen_range(1..=4);
            let m = rng.gen_range(1..=4);
            let features: Vec<Vec<f32>> =
                (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            assert_eq!(
                select_exemplars(&features, m, SelectionMode::Herding, 0),
                herding_oracle(&features, m),
                "n={n} dim={dim} m={m}"
            );
        }
    }

    #[test]
    fn herding_tie_breaks_to_lowest_index() {
        // duplicate candidates produce exact ties
        let features = vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![-1.0, 0.0]];
        let chosen = select_exemplars(&features, 1, SelectionMode::Herding, 0);
        assert_eq!(chosen, vec![0]);
    }

    #[test]
    fn random_mode_is_seeded_and_uniform_subset() {
        let features: Vec<Vec<f32>> = (0..10).map(|i| vec![i as f32]).collect();
        let a = select_exemplars(&features, 4, SelectionMode::Random, 7);
        let b = select_exemplars(&features, 4, SelectionMode::Random, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        let c = select_exemplars(&features, 4, SelectionMode::Random, 8);
        assert_ne!(a, c);
    }

    #[test]
    #[should_panic(expected = "empty class")]
    fn empty_class_panics() {
        let _ = select_exemplars(&[], 1, SelectionMode::Herding, 0);
    }

    #[test]
    fn memory_enforces_capacity() {
        use crate::data::Image;
        let mut mem = ExemplarMemory::new(2, SelectionMode::Herding);
        let mk = |c: usize| LabeledSample { image: Image::zeros(1, 2, 2), image_class: c };
        mem.set_class(0, vec![mk(0), mk(0)]);
        mem.set_class(1, vec![mk(1)]);
        assert_eq!(mem.len(), 3);
        assert_eq!(mem.class_count(), 2);
        assert_eq!(mem.of_class(0).len(), 2);
    }
}
