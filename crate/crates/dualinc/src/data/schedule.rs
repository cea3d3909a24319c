//! Phase scheduling: a seeded class order split into a base phase and P
//! incremental phases, with class ids remapped to seen-so-far order.

use super::{DataError, Dataset, LabeledSample};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Assignment of every class to a phase. Phase 0 holds `base_count` classes;
/// phases 1..=P hold `increment` classes each, in seeded permutation order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    class_order: Vec<usize>,
    base_count: usize,
    phase_count: usize,
    increment: usize,
}

impl PhaseSchedule {
    /// Number of incremental phases P (the base phase is phase 0).
    pub fn phase_count(&self) -> usize {
        self.phase_count
    }

    pub fn base_count(&self) -> usize {
        self.base_count
    }

    pub fn increment(&self) -> usize {
        self.increment
    }

    pub fn total_classes(&self) -> usize {
        self.class_order.len()
    }

    /// Seeded permutation of all class ids; position defines seen-so-far order.
    pub fn class_order(&self) -> &[usize] {
        &self.class_order
    }

    /// Original class ids introduced at phase `p`.
    pub fn classes_of_phase(&self, p: usize) -> &[usize] {
        assert!(p <= self.phase_count, "phase {p} out of range");
        if p == 0 {
            &self.class_order[..self.base_count]
        } else {
            let start = self.base_count + (p - 1) * self.increment;
            &self.class_order[start..start + self.increment]
        }
    }

    /// Number of classes seen through phase `p`.
    pub fn seen_through(&self, p: usize) -> usize {
        assert!(p <= self.phase_count, "phase {p} out of range");
        self.base_count + p * self.increment
    }

    /// Contiguous seen-so-far index of an original class id.
    pub fn seen_index(&self, class: usize) -> usize {
        self.class_order
            .iter()
            .position(|&c| c == class)
            .unwrap_or_else(|| panic!("class {class} not in schedule"))
    }
}

impl PhaseSchedule {
    /// Rebuild a schedule from a stored class order (checkpoint restore).
    pub fn from_order(
        class_order: Vec<usize>,
        base_count: usize,
        phases: usize,
    ) -> Result<Self, DataError> {
        let total = class_order.len();
        if base_count == 0 || phases == 0 || base_count > total {
            return Err(DataError::BadCounts { total, base: base_count, phases });
        }
        if (total - base_count) % phases != 0 {
            return Err(DataError::UnevenIncrement { total, base: base_count, phases });
        }
        let increment = (total - base_count) / phases;
        let mut sorted = class_order.clone();
        sorted.sort_unstable();
        if sorted != (0..total).collect::<Vec<_>>() {
            return Err(DataError::BadCounts { total, base: base_count, phases });
        }
        Ok(PhaseSchedule { class_order, base_count, phase_count: phases, increment })
    }
}

/// Build a schedule over `total_classes` with a seeded class permutation.
pub fn make_phase_schedule(
    total_classes: usize,
    base_count: usize,
    phases: usize,
    seed: u64,
) -> Result<PhaseSchedule, DataError> {
    if base_count == 0 || phases == 0 || base_count > total_classes {
        return Err(DataError::BadCounts { total: total_classes, base: base_count, phases });
    }
    let remaining = total_classes - base_count;
    if remaining % phases != 0 {
        return Err(DataError::UnevenIncrement { total: total_classes, base: base_count, phases });
    }
    let increment = remaining / phases;
    if increment == 0 {
        return Err(DataError::BadCounts { total: total_classes, base: base_count, phases });
    }
    let mut class_order: Vec<usize> = (0..total_classes).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    class_order.shuffle(&mut rng);
    Ok(PhaseSchedule { class_order, base_count, phase_count: phases, increment })
}

/// The data visible at phase `p`: new-class training samples and the test
/// samples of every class seen so far, labels remapped to seen-so-far order.
#[derive(Clone, Debug)]
pub struct PhaseSplit {
    /// Training samples of the classes introduced at this phase.
    pub train: Vec<LabeledSample>,
    /// Test samples of all classes seen through this phase.
    pub test: Vec<LabeledSample>,
    /// Classes seen through this phase.
    pub seen_classes: usize,
}

pub fn phase_data(dataset: &Dataset, schedule: &PhaseSchedule, p: usize) -> Result<PhaseSplit, DataError> {
    if p > schedule.phase_count() {
        return Err(DataError::PhaseOutOfRange { phase: p, max: schedule.phase_count() });
    }
    let new_classes = schedule.classes_of_phase(p);
    let seen = schedule.seen_through(p);
    let train = dataset
        .train
        .iter()
        .filter(|s| new_classes.contains(&s.image_class))
        .map(|s| LabeledSample { image: s.image.clone(), image_class: schedule.seen_index(s.image_class) })
        .collect();
    let test = dataset
        .test
        .iter()
        .filter(|s| schedule.seen_index(s.image_class) < seen)
        .map(|s| LabeledSample { image: s.image.clone(), image_class: schedule.seen_index(s.image_class) })
        .collect();
    Ok(PhaseSplit { train, test, seen_classes: seen })
}
