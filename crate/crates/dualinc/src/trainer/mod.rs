//! The phase-training loop: joint objectives, replay exemplar memory, and
//! the per-phase optimization protocol.

mod losses;
mod memory;

pub use losses::{
    loss_frgt, loss_img, loss_or, loss_total, loss_total_da, loss_total_ss, soft_targets,
    Objective,
};
pub use memory::{select_exemplars, ExemplarMemory, SelectionMode};

use crate::data::{modify_batch, stack_images, LabeledSample, OrientationSet, PhaseSplit};
use crate::derive_seed;
use crate::eval::argmax;
use crate::model::{snapshot, Model, ModelSnapshot};
use crate::tensor::{lr_schedule, sgd_step, Graph, LrSchedule, Mode, ParamGroup};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("phase {0} requires a snapshot of the previous phase")]
    MissingSnapshot(usize),
    #[error("phase {phase} has no training samples")]
    EmptyPhase { phase: usize },
    #[error("non-finite loss at phase {phase}, epoch {epoch}, batch {batch}")]
    NonFinite { phase: usize, epoch: usize, batch: usize },
    #[error("model sees {model} classes but the phase split carries {split}")]
    HeadMismatch { model: usize, split: usize },
    #[error("failed to write metrics {path}: {source}")]
    MetricsIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Per-phase optimization settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub objective: Objective,
    /// Weight of the orientation term in the joint loss.
    pub gamma: f32,
    pub epochs: usize,
    /// Original samples per batch; modification multiplies rows by M.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f32,
    pub weight_decay: f32,
    pub schedule: LrSchedule,
    /// Distillation temperature for the forgetting term.
    pub temperature: f32,
    /// Distill on every untransformed row instead of replay rows only.
    pub distill_all: bool,
    pub memory_per_class: usize,
    pub selection: SelectionMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: Objective::Dilf,
            gamma: 0.5,
            epochs: 10,
            batch_size: 32,
            learning_rate: 0.05,
            momentum: 0.9,
            weight_decay: 5e-4,
            schedule: LrSchedule::Step { milestones: vec![7, 9], decay: 0.1 },
            temperature: 2.0,
            distill_all: false,
            memory_per_class: 20,
            selection: SelectionMode::Herding,
        }
    }
}

/// One metrics record per (phase, epoch).
#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub phase: usize,
    pub epoch: usize,
    pub learning_rate: f64,
    pub loss_img: f32,
    pub loss_frgt: f32,
    pub loss_or: f32,
    pub loss_total: f32,
    pub train_accuracy: f32,
}

/// Result of one trained phase.
pub struct PhaseOutcome {
    pub metrics: Vec<EpochMetrics>,
    /// Frozen end-of-phase model, the distillation teacher for phase p+1.
    pub snapshot: ModelSnapshot,
}

/// Train one phase: per epoch, shuffle the union of new-phase samples and
/// all replay exemplars, modify each batch with the orientation set, run one
/// forward pass, optimize the configured objective. Afterwards select
/// exemplars for the new classes from their original images and take the
/// snapshot for the next phase.
#[allow(clippy::too_many_arguments)]
pub fn train_phase(
    model: &mut Model,
    mem: &mut ExemplarMemory,
    split: &PhaseSplit,
    phase: usize,
    teacher: Option<&ModelSnapshot>,
    orientations: &OrientationSet,
    config: &TrainConfig,
    seed: u64,
) -> Result<PhaseOutcome, TrainError> {
    if phase >= 1 && teacher.is_none() {
        return Err(TrainError::MissingSnapshot(phase));
    }
    if split.train.is_empty() {
        return Err(TrainError::EmptyPhase { phase });
    }
    if model.k_seen() != split.seen_classes {
        return Err(TrainError::HeadMismatch { model: model.k_seen(), split: split.seen_classes });
    }

    // the plain baseline never sees rotated copies
    let singleton = OrientationSet::new(vec![0.0]);
    let effective = match config.objective {
        Objective::Plain => &singleton,
        _ => orientations,
    };
    let m_orient = effective.len();

    // training pool: new-phase samples plus every stored exemplar
    let replay: Vec<LabeledSample> = mem.all().into_iter().cloned().collect();
    let pool: Vec<(&LabeledSample, bool)> = split
        .train
        .iter()
        .map(|s| (s, false))
        .chain(replay.iter().map(|s| (s, true)))
        .collect();

    let mut group = ParamGroup::new(
        model.params(),
        config.learning_rate as f32,
        config.momentum,
        config.weight_decay,
    );
    let old_classes = teacher.map_or(0, |t| t.k_seen());

    let mut metrics = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..pool.len()).collect();
    for epoch in 0..config.epochs {
        let lr = lr_schedule(&config.schedule, config.learning_rate, epoch);
        group.learning_rate = lr as f32;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, (phase * 131_071 + epoch) as u64));
        order.shuffle(&mut rng);

        let mut sums = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let mut correct = 0usize;
        let mut rows_seen = 0usize;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let originals: Vec<LabeledSample> = chunk.iter().map(|&i| pool[i].0.clone()).collect();
            let replay_flags: Vec<bool> = chunk.iter().map(|&i| pool[i].1).collect();

            let modified = modify_batch(&originals, effective);
            let image_labels: Vec<usize> = modified.iter().map(|s| s.image_class).collect();
            let orient_labels: Vec<usize> = modified.iter().map(|s| s.orientation_class).collect();

            // untransformed rows carrying the forgetting term
            let distill_originals: Vec<usize> = (0..originals.len())
                .filter(|&i| config.distill_all || replay_flags[i])
                .collect();
            let distill_rows: Vec<usize> = distill_originals.iter().map(|&i| i * m_orient).collect();

            let targets = match (teacher, distill_rows.is_empty()) {
                (Some(t), false) => {
                    let imgs = stack_images(distill_originals.iter().map(|&i| &originals[i].image));
                    Some(soft_targets(&t.image_logits(imgs), config.temperature))
                }
                _ => None,
            };

            let batch_tensor = stack_images(modified.iter().map(|s| &s.image));
            let mut g = Graph::new();
            let pass = model.forward(&mut g, batch_tensor, Mode::Train);

            let frgt = loss_frgt(
                &mut g,
                pass.image_logits,
                &distill_rows,
                targets.as_ref(),
                old_classes,
                config.temperature,
            );
            let (img, or_term, total) = match config.objective {
                Objective::Dilf => {
                    let img = loss_img(&mut g, pass.image_logits, &image_labels);
                    let or_term = loss_or(&mut g, pass.orientation_logits, &orient_labels);
                    let total = loss_total(&mut g, img, frgt, or_term, config.gamma);
                    (img, or_term, total)
                }
                Objective::Da | Objective::Plain => {
                    let img = loss_img(&mut g, pass.image_logits, &image_labels);
                    let total = loss_total_da(&mut g, img, frgt);
                    (img, img, total)
                }
                Objective::Ss => {
                    let original_rows: Vec<usize> =
                        (0..originals.len()).map(|i| i * m_orient).collect();
                    let original_labels: Vec<usize> =
                        originals.iter().map(|s| s.image_class).collect();
                    let picked = g.select_rows(pass.image_logits, &original_rows);
                    let img = loss_img(&mut g, picked, &original_labels);
                    let or_term = loss_or(&mut g, pass.orientation_logits, &orient_labels);
                    let total = loss_total_ss(&mut g, img, frgt, or_term);
                    (img, or_term, total)
                }
            };

            let total_v = g.value(total).item();
            if !total_v.is_finite() {
                return Err(TrainError::NonFinite { phase, epoch, batch: batch_idx });
            }
            let img_v = g.value(img).item();
            let frgt_v = g.value(frgt).item();
            let or_v = if matches!(config.objective, Objective::Da | Objective::Plain) {
                0.0
            } else {
                g.value(or_term).item()
            };

            // running accuracy over the modified rows
            let logits = g.value(pass.image_logits);
            for (row, &label) in image_labels.iter().enumerate() {
                if argmax(logits.row(row)) == label {
                    correct += 1;
                }
            }
            rows_seen += image_labels.len();

            g.backward(total);
            sgd_step(&mut group);
            group.zero_grad();

            let w = originals.len() as f64;
            sums.0 += img_v as f64 * w;
            sums.1 += frgt_v as f64 * w;
            sums.2 += or_v as f64 * w;
            sums.3 += total_v as f64 * w;
        }
        let denom = pool.len() as f64;
        metrics.push(EpochMetrics {
            phase,
            epoch,
            learning_rate: lr,
            loss_img: (sums.0 / denom) as f32,
            loss_frgt: (sums.1 / denom) as f32,
            loss_or: (sums.2 / denom) as f32,
            loss_total: (sums.3 / denom) as f32,
            train_accuracy: correct as f32 / rows_seen as f32,
        });
    }

    if config.memory_per_class > 0 {
        select_new_class_exemplars(model, mem, split, config, seed);
    }

    Ok(PhaseOutcome { metrics, snapshot: snapshot(model) })
}

/// Herding features: post-pool embeddings in eval mode, L2-normalized.
pub fn class_embeddings(model: &Model, samples: &[&LabeledSample]) -> Vec<Vec<f32>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(64) {
        let batch = stack_images(chunk.iter().map(|s| &s.image));
        let mut g = Graph::new();
        let pass = model.forward(&mut g, batch, Mode::Eval);
        let pooled = g.value(pass.pooled);
        let (_, c) = pooled.dims2();
        for row in 0..chunk.len() {
            let mut v = pooled.row(row).to_vec();
            let norm: f32 = v.iter().map(|x| x * x).sum::<f32>().sqrt();
            if norm > 0.0 {
                for x in &mut v {
                    *x /= norm;
                }
            }
            debug_assert_eq!(v.len(), c);
            out.push(v);
        }
    }
    out
}

fn select_new_class_exemplars(
    model: &Model,
    mem: &mut ExemplarMemory,
    split: &PhaseSplit,
    config: &TrainConfig,
    seed: u64,
) {
    let new_classes: BTreeSet<usize> = split.train.iter().map(|s| s.image_class).collect();
    for class in new_classes {
        let candidates: Vec<&LabeledSample> =
            split.train.iter().filter(|s| s.image_class == class).collect();
        let features = class_embeddings(model, &candidates);
        let chosen = select_exemplars(
            &features,
            config.memory_per_class,
            config.selection,
            derive_seed(seed, 0x5e1ec7 + class as u64),
        );
        mem.set_class(class, chosen.into_iter().map(|i| candidates[i].clone()).collect());
    }
}

/// Append metrics records to a CSV file, writing the header when the file is
/// fresh.
pub fn append_metrics_csv(path: &Path, records: &[EpochMetrics]) -> Result<(), TrainError> {
    let fresh = !path.exists();
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|source| TrainError::MetricsIo { path: path.display().to_string(), source })?;
    let mut buf = String::new();
    if fresh {
        buf.push_str("phase,epoch,learning_rate,loss_img,loss_frgt,loss_or,loss_total,train_accuracy\n");
    }
    for m in records {
        buf.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            m.phase,
            m.epoch,
            m.learning_rate,
            m.loss_img,
            m.loss_frgt,
            m.loss_or,
            m.loss_total,
            m.train_accuracy
        ));
    }
    file.write_all(buf.as_bytes())
        .map_err(|source| TrainError::MetricsIo { path: path.display().to_string(), source })
}
