//! Orientation-agreement analysis: how the set of correctly classified test
//! images shifts between two orientations of the same inputs, and what the
//! ensemble recovers.

use super::{argmax, ensemble_decision, orientation_probs, Strategy};
use crate::data::{LabeledSample, OrientationSet};
use crate::model::Model;

/// Counts over one test split for orientations (o1, o2) and the
/// avg-ensemble of the two.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AgreementTable {
    pub total: usize,
    pub correct_o1: usize,
    pub correct_o2: usize,
    pub correct_both: usize,
    pub correct_o1_only: usize,
    pub correct_o2_only: usize,
    pub correct_en: usize,
    pub correct_en_and_both: usize,
}

impl AgreementTable {
    /// Structural identities every table must satisfy.
    pub fn check_invariants(&self) {
        assert!(self.correct_both <= self.correct_o1.min(self.correct_o2));
        assert_eq!(self.correct_o1, self.correct_both + self.correct_o1_only);
        assert_eq!(self.correct_o2, self.correct_both + self.correct_o2_only);
    }

    pub fn csv_header() -> &'static str {
        "correct_o1,correct_o2,correct_both,correct_o1_only,correct_o2_only,correct_en,correct_en_and_both"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.correct_o1,
            self.correct_o2,
            self.correct_both,
            self.correct_o1_only,
            self.correct_o2_only,
            self.correct_en,
            self.correct_en_and_both
        )
    }
}

/// Classify every sample into the agreement cells from per-orientation
/// probability rows. `p1[i]` and `p2[i]` are the class probabilities of
/// sample `i` under the two orientations.
pub fn agreement_from_probs(
    p1: &[Vec<f32>],
    p2: &[Vec<f32>],
    labels: &[usize],
) -> AgreementTable {
    assert_eq!(p1.len(), p2.len());
    assert_eq!(p1.len(), labels.len());
    let mut t = AgreementTable { total: labels.len(), ..AgreementTable::default() };
    for ((a, b), &y) in p1.iter().zip(p2).zip(labels) {
        let ok1 = argmax(a) == y;
        let ok2 = argmax(b) == y;
        let en = ensemble_decision(&[a.clone(), b.clone()], Strategy::Avg) == y;
        t.correct_o1 += ok1 as usize;
        t.correct_o2 += ok2 as usize;
        t.correct_both += (ok1 && ok2) as usize;
        t.correct_o1_only += (ok1 && !ok2) as usize;
        t.correct_o2_only += (!ok1 && ok2) as usize;
        t.correct_en += en as usize;
        t.correct_en_and_both += (en && ok1 && ok2) as usize;
    }
    t.check_invariants();
    t
}

/// Run the model over a test split at the two orientations and count the
/// agreement cells using the avg ensemble.
pub fn agreement_analysis(
    model: &Model,
    test: &[LabeledSample],
    o1: f32,
    o2: f32,
) -> AgreementTable {
    assert!(o1 != o2, "agreement analysis requires two distinct orientations");
    assert!(!test.is_empty(), "agreement analysis on an empty split");
    let pair = OrientationSet::new(if o1 == 0.0 {
        vec![0.0, o2]
    } else if o2 == 0.0 {
        vec![0.0, o1]
    } else {
        vec![0.0, o1, o2]
    });
    let i1 = pair.class_of(o1).expect("o1 in set");
    let i2 = pair.class_of(o2).expect("o2 in set");
    let refs: Vec<&LabeledSample> = test.iter().collect();
    let probs = orientation_probs(model, &refs, &pair);
    let p1: Vec<Vec<f32>> = probs.iter().map(|rows| rows[i1].clone()).collect();
    let p2: Vec<Vec<f32>> = probs.iter().map(|rows| rows[i2].clone()).collect();
    let labels: Vec<usize> = test.iter().map(|s| s.image_class).collect();
    agreement_from_probs(&p1, &p2, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_prob_row(rng: &mut ChaCha8Rng, k: usize) -> Vec<f32> {
        let raw: Vec<f32> = (0..k).map(|_| rng.gen_range(0.01..1.0f32)).collect();
        let sum: f32 = raw.iter().sum();
        raw.into_iter().map(|v| v / sum).collect()
    }

    #[test]
    fn saturated_stub_fills_every_cell() {
        // probabilities that are always right at both orientations
        let k = 4;
        let labels: Vec<usize> = (0..12).map(|i| i % k).collect();
        let mk = |labels: &[usize]| -> Vec<Vec<f32>> {
            labels
                .iter()
                .map(|&y| (0..k).map(|c| if c == y { 0.9 } else { 0.1 / 3.0 }).collect())
                .collect()
        };
        let t = agreement_from_probs(&mk(&labels), &mk(&labels), &labels);
        assert_eq!(t.correct_o1, 12);
        assert_eq!(t.correct_o2, 12);
        assert_eq!(t.correct_both, 12);
        assert_eq!(t.correct_o1_only, 0);
        assert_eq!(t.correct_o2_only, 0);
        assert_eq!(t.correct_en, 12);
        assert_eq!(t.correct_en_and_both, 12);
    }

    #[test]
    fn counts_match_independent_recount_on_random_stubs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xa9);
        let k = 5;
        let n = 200;
        let p1: Vec<Vec<f32>> = (0..n).map(|_| random_prob_row(&mut rng, k)).collect();
        let p2: Vec<Vec<f32>> = (0..n).map(|_| random_prob_row(&mut rng, k)).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let t = agreement_from_probs(&p1, &p2, &labels);

        // independent recount with raw loops
        let arg = |row: &[f32]| {
            let mut b = 0;
            for i in 1..row.len() {
                if row[i] > row[b] {
                    b = i;
                }
            }
            b
        };
        let mut c1 = 0;
        let mut c2 = 0;
        let mut both = 0;
        let mut only1 = 0;
        let mut only2 = 0;
        let mut cen = 0;
        let mut enboth = 0;
        for i in 0..n {
            let ok1 = arg(&p1[i]) == labels[i];
            let ok2 = arg(&p2[i]) == labels[i];
            let mean: Vec<f32> =
                (0..k).map(|c| 0.5 * (p1[i][c] + p2[i][c])).collect();
            let en = arg(&mean) == labels[i];
            c1 += ok1 as usize;
            c2 += ok2 as usize;
            both += (ok1 && ok2) as usize;
            only1 += (ok1 && !ok2) as usize;
            only2 += (!ok1 && ok2) as usize;
            cen += en as usize;
            enboth += (en && ok1 && ok2) as usize;
        }
        assert_eq!(
            (t.correct_o1, t.correct_o2, t.correct_both, t.correct_o1_only, t.correct_o2_only, t.correct_en, t.correct_en_and_both),
            (c1, c2, both, only1, only2, cen, enboth)
        );
    }

    #[test]
    fn en_and_both_equals_both_under_avg() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x77);
        for _ in 0..50 {
            let k = rng.gen_range(2..8);
            let n = rng.gen_range(1..60);
            let p1: Vec<Vec<f32>> = (0..n).map(|_| random_prob_row(&mut rng, k)).collect();
            let p2: Vec<Vec<f32>> = (0..n).map(|_| random_prob_row(&mut rng, k)).collect();
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
            let t = agreement_from_probs(&p1, &p2, &labels);
            assert_eq!(t.correct_en_and_both, t.correct_both);
        }
    }
}
