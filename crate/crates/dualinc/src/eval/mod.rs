//! Data-ensemble inference, incremental-accuracy metrics, orientation
//! agreement analysis, and activation-map export.

mod agreement;
mod gradcam;
mod report;

pub use agreement::{agreement_analysis, agreement_from_probs, AgreementTable};
pub use gradcam::{cam_from_feature_grad, gradcam, upsample_bilinear, write_pgm};
pub use report::{EvalReport, PhaseReport};

use crate::data::{modify_batch, stack_images, Image, LabeledSample, OrientationSet};
use crate::model::Model;
use crate::tensor::{softmax_rows, Graph, Mode};
use serde::{Deserialize, Serialize};

/// How the per-orientation predictions are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Argmax of the class-wise mean probability.
    Avg,
    /// The class that is the per-orientation argmax most often; ties broken
    /// by mean probability, then lowest index.
    Mode,
    /// The class holding the single largest probability across orientations.
    Max,
    /// No ensemble: argmax at orientation 0 only.
    None,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Avg => "avg",
            Strategy::Mode => "mode",
            Strategy::Max => "max",
            Strategy::None => "none",
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "avg" => Some(Strategy::Avg),
            "mode" => Some(Strategy::Mode),
            "max" => Some(Strategy::Max),
            "none" => Some(Strategy::None),
            _ => None,
        }
    }

    /// Whether this strategy actually combines orientations.
    pub fn is_ensemble(self) -> bool {
        !matches!(self, Strategy::None)
    }
}

/// First index of the row maximum (ties resolve to the lowest index).
pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One ensembled prediction: the chosen class, the class-wise mean
/// probabilities, and the raw per-orientation probability rows.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub class: usize,
    pub mean_probs: Vec<f32>,
    pub per_orientation: Vec<Vec<f32>>,
}

/// Combine per-orientation probability rows into one class decision.
pub fn ensemble_decision(per_orientation: &[Vec<f32>], strategy: Strategy) -> usize {
    assert!(!per_orientation.is_empty());
    let k = per_orientation[0].len();
    match strategy {
        Strategy::None => argmax(&per_orientation[0]),
        Strategy::Avg => argmax(&mean_rows(per_orientation)),
        Strategy::Max => {
            let mut best_class = 0;
            let mut best_p = f32::NEG_INFINITY;
            for class in 0..k {
                for row in per_orientation {
                    if row[class] > best_p {
                        best_p = row[class];
                        best_class = class;
                    }
                }
            }
            best_class
        }
        Strategy::Mode => {
            let mut votes = vec![0usize; k];
            for row in per_orientation {
                votes[argmax(row)] += 1;
            }
            let top = *votes.iter().max().expect("nonempty votes");
            let means = mean_rows(per_orientation);
            let mut best: Option<usize> = None;
            for class in 0..k {
                if votes[class] != top {
                    continue;
                }
                match best {
                    None => best = Some(class),
                    Some(b) if means[class] > means[b] => best = Some(class),
                    _ => {}
                }
            }
            best.expect("at least one candidate")
        }
    }
}

fn mean_rows(rows: &[Vec<f32>]) -> Vec<f32> {
    let k = rows[0].len();
    let mut mean = vec![0.0f32; k];
    for row in rows {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let inv = 1.0 / rows.len() as f32;
    for m in &mut mean {
        *m *= inv;
    }
    mean
}

/// Per-orientation image-class probability rows for a slice of samples,
/// computed in eval mode from one batched forward per chunk.
pub fn orientation_probs(
    model: &Model,
    samples: &[&LabeledSample],
    orientations: &OrientationSet,
) -> Vec<Vec<Vec<f32>>> {
    let m = orientations.len();
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(32) {
        let originals: Vec<LabeledSample> = chunk.iter().map(|&s| s.clone()).collect();
        let modified = modify_batch(&originals, orientations);
        let batch = stack_images(modified.iter().map(|s| &s.image));
        let mut g = Graph::new();
        let pass = model.forward(&mut g, batch, Mode::Eval);
        let probs = softmax_rows(g.value(pass.image_logits));
        for i in 0..chunk.len() {
            out.push((0..m).map(|j| probs.row(i * m + j).to_vec()).collect());
        }
    }
    out
}

/// Ensemble prediction for one image: build the M rotated versions, run the
/// model on each, and combine the image-class probabilities.
pub fn predict_ensemble(
    model: &Model,
    image: &Image,
    orientations: &OrientationSet,
    strategy: Strategy,
) -> Prediction {
    let sample = LabeledSample { image: image.clone(), image_class: 0 };
    let per_orientation = orientation_probs(model, &[&sample], orientations).remove(0);
    let class = ensemble_decision(&per_orientation, strategy);
    Prediction { class, mean_probs: mean_rows(&per_orientation), per_orientation }
}

/// Fraction of test samples whose ensembled prediction matches the label.
pub fn evaluate(
    model: &Model,
    test: &[LabeledSample],
    orientations: &OrientationSet,
    strategy: Strategy,
) -> f32 {
    assert!(!test.is_empty(), "evaluate on an empty test split");
    let refs: Vec<&LabeledSample> = test.iter().collect();
    let probs = orientation_probs(model, &refs, orientations);
    let correct = probs
        .iter()
        .zip(test)
        .filter(|(p, s)| ensemble_decision(p, strategy) == s.image_class)
        .count();
    correct as f32 / test.len() as f32
}

/// Arithmetic mean of the per-phase accuracies (phase 0 included).
pub fn average_incremental_accuracy(per_phase: &[f32]) -> f32 {
    assert!(!per_phase.is_empty(), "no per-phase accuracies recorded");
    per_phase.iter().sum::<f32>() / per_phase.len() as f32
}
