//! The joint training objectives.
//!
//! All terms are graph nodes built from one shared forward pass, so a single
//! backward call trains the backbone and both heads jointly:
//!
//! * image term — cross-entropy of the image head over every modified row;
//! * forgetting term — temperature distillation of old-class logits on
//!   untransformed replay rows against the previous-phase snapshot;
//! * orientation term — cross-entropy of the orientation head over every
//!   modified row.

use crate::tensor::{softmax_rows, Graph, NodeId, Tensor};
use serde::{Deserialize, Serialize};

/// Which objective the trainer optimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Joint image + forgetting + gamma * orientation loss.
    Dilf,
    /// Image + forgetting loss over the modified batch; no orientation term.
    Da,
    /// Image loss on originals only; orientation loss over all rotations.
    Ss,
    /// Originals only, no orientation anything.
    Plain,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::Dilf => "dilf",
            Objective::Da => "da",
            Objective::Ss => "ss",
            Objective::Plain => "plain",
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "dilf" => Some(Objective::Dilf),
            "da" => Some(Objective::Da),
            "ss" => Some(Objective::Ss),
            "plain" => Some(Objective::Plain),
            _ => None,
        }
    }
}

/// Mean cross-entropy of the image head over the modified rows; defined over
/// all classes seen so far.
pub fn loss_img(g: &mut Graph, image_logits: NodeId, labels: &[usize]) -> NodeId {
    g.softmax_cross_entropy(image_logits, labels)
}

/// Mean cross-entropy of the orientation head over the modified rows.
pub fn loss_or(g: &mut Graph, orientation_logits: NodeId, labels: &[usize]) -> NodeId {
    g.softmax_cross_entropy(orientation_logits, labels)
}

/// Temperature distillation of the current old-class logits on the given
/// (untransformed replay) rows against the snapshot's soft targets. With no
/// previous classes or no replay rows in the batch the term is zero.
pub fn loss_frgt(
    g: &mut Graph,
    image_logits: NodeId,
    distill_rows: &[usize],
    soft_targets: Option<&Tensor>,
    old_classes: usize,
    temperature: f32,
) -> NodeId {
    match soft_targets {
        None => g.constant(Tensor::scalar(0.0)),
        Some(targets) if distill_rows.is_empty() => {
            debug_assert_eq!(targets.shape()[0], 0, "targets without rows");
            g.constant(Tensor::scalar(0.0))
        }
        Some(targets) => {
            assert!(old_classes >= 1, "distillation requires previously seen classes");
            let picked = g.select_rows(image_logits, distill_rows);
            let old = g.take_cols(picked, old_classes);
            g.distill_cross_entropy(old, targets, temperature)
        }
    }
}

/// Soft targets for distillation: softmax of the snapshot logits at the
/// distillation temperature.
pub fn soft_targets(snapshot_logits: &Tensor, temperature: f32) -> Tensor {
    let (n, k) = snapshot_logits.dims2();
    let scaled: Vec<f32> = snapshot_logits.data().iter().map(|&z| z / temperature).collect();
    softmax_rows(&Tensor::new(&[n, k], scaled))
}

/// img + frgt + gamma * or, as one scalar node.
pub fn loss_total(g: &mut Graph, img: NodeId, frgt: NodeId, or_term: NodeId, gamma: f32) -> NodeId {
    let scaled = g.scale(or_term, gamma);
    let partial = g.add(img, frgt);
    g.add(partial, scaled)
}

/// img + frgt over the modified batch; the orientation head is untouched.
pub fn loss_total_da(g: &mut Graph, img: NodeId, frgt: NodeId) -> NodeId {
    g.add(img, frgt)
}

/// Image term on originals only, forgetting term on replay originals, and
/// the orientation term over all rotations.
pub fn loss_total_ss(g: &mut Graph, img_originals: NodeId, frgt: NodeId, or_term: NodeId) -> NodeId {
    let partial = g.add(img_originals, frgt);
    g.add(partial, or_term)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Parameter;

    fn ce_scalar(logits: &[f32], target: usize) -> f64 {
        let max = logits.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
        let sum: f64 = logits.iter().map(|&z| ((z as f64) - max).exp()).sum();
        max + sum.ln() - logits[target] as f64
    }

    #[test]
    fn loss_img_uniform_logits_is_ln_k() {
        let mut g = Graph::new();
        let z = g.constant(Tensor::zeros(&[3, 5]));
        let l = loss_img(&mut g, z, &[0, 2, 4]);
        assert!((g.value(l).item() as f64 - (5.0f64).ln()).abs() < 1e-6);
    }

    #[test]
    fn loss_img_matches_per_term_scalar_oracle() {
        // 2 samples, M=2: mean of the 4 per-row cross-entropy terms
        let rows = vec![
            vec![1.2f32, -0.3, 0.4],
            vec![0.1, 0.9, -1.0],
            vec![-0.5, 0.5, 0.0],
            vec![2.0, 0.0, -2.0],
        ];
        let labels = [0usize, 0, 2, 2];
        let mut g = Graph::new();
        let z = g.constant(Tensor::from_rows(&rows));
        let l = loss_img(&mut g, z, &labels);
        let oracle: f64 =
            rows.iter().zip(&labels).map(|(r, &t)| ce_scalar(r, t)).sum::<f64>() / 4.0;
        assert!((g.value(l).item() as f64 - oracle).abs() < 1e-6);
    }

    #[test]
    fn loss_or_single_class_is_zero() {
        let mut g = Graph::new();
        let z = g.constant(Tensor::from_rows(&[vec![3.7f32], vec![-2.0]]));
        let l = loss_or(&mut g, z, &[0, 0]);
        assert_eq!(g.value(l).item(), 0.0);
    }

    #[test]
    fn loss_or_shrinks_with_logit_scale() {
        // one-hot logits scaled up drive the loss toward zero monotonically
        let at_scale = |s: f32| {
            let mut g = Graph::new();
            let z = g.constant(Tensor::from_rows(&[vec![s, 0.0], vec![0.0, s]]));
            let l = loss_or(&mut g, z, &[0, 1]);
            g.value(l).item()
        };
        let l10 = at_scale(10.0);
        let l20 = at_scale(20.0);
        assert!(l20 < l10);
        assert!(l20 < 1e-8);
    }

    #[test]
    fn loss_frgt_phase_zero_is_zero() {
        let mut g = Graph::new();
        let z = g.constant(Tensor::zeros(&[4, 3]));
        let l = loss_frgt(&mut g, z, &[], None, 0, 2.0);
        assert_eq!(g.value(l).item(), 0.0);
    }

    #[test]
    fn loss_frgt_two_class_closed_form() {
        // hand case: one replay row, 2 old classes, T=2
        let current = vec![0.8f32, -0.4, 0.9]; // third column is a new class
        let snap = Tensor::from_rows(&[vec![0.2f32, -0.2]]);
        let t = 2.0;
        let targets = soft_targets(&snap, t);
        let mut g = Graph::new();
        let z = g.constant(Tensor::from_rows(&[current.clone()]));
        let l = loss_frgt(&mut g, z, &[0], Some(&targets), 2, t);

        // oracle: -sum_k q_k log softmax(z_old/T)_k
        let q: Vec<f64> = {
            let e: Vec<f64> = [0.2f64, -0.2].iter().map(|z| (z / 2.0).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        };
        let zt: Vec<f64> = [0.8f64, -0.4].iter().map(|z| z / 2.0).collect();
        let lse = (zt[0].exp() + zt[1].exp()).ln();
        let oracle: f64 = q[0] * (lse - zt[0]) + q[1] * (lse - zt[1]);
        assert!((g.value(l).item() as f64 - oracle).abs() < 1e-6);
    }

    #[test]
    fn loss_frgt_at_the_snapshot_equals_target_entropy() {
        let snap = Tensor::from_rows(&[vec![0.5f32, -1.0, 0.3]]);
        let t = 2.0;
        let targets = soft_targets(&snap, t);
        let mut g = Graph::new();
        let z = g.constant(snap.clone());
        let l = loss_frgt(&mut g, z, &[0], Some(&targets), 3, t);
        let entropy: f64 =
            -targets.data().iter().map(|&p| (p as f64) * (p as f64).ln()).sum::<f64>();
        assert!((g.value(l).item() as f64 - entropy).abs() < 1e-6);
    }

    #[test]
    fn total_decomposes_and_is_linear_in_gamma() {
        let mut g = Graph::new();
        let z = g.constant(Tensor::from_rows(&[vec![0.3f32, -0.2], vec![1.0, 0.1]]));
        let zo = g.constant(Tensor::from_rows(&[vec![0.7f32, 0.2], vec![-0.3, 0.4]]));
        let img = loss_img(&mut g, z, &[0, 1]);
        let frgt = loss_frgt(&mut g, z, &[], None, 0, 2.0);
        let or_term = loss_or(&mut g, zo, &[0, 1]);
        let t_half = loss_total(&mut g, img, frgt, or_term, 0.5);
        let t_one = loss_total(&mut g, img, frgt, or_term, 1.0);
        let t_zero = loss_total(&mut g, img, frgt, or_term, 0.0);

        let (iv, fv, ov) = (g.value(img).item(), g.value(frgt).item(), g.value(or_term).item());
        assert!((g.value(t_half).item() - (iv + fv + 0.5 * ov)).abs() < 1e-6);
        assert!((g.value(t_zero).item() - (iv + fv)).abs() < 1e-7);
        // doubling gamma adds exactly gamma * L_or
        assert!(((g.value(t_one).item() - g.value(t_half).item()) - 0.5 * ov).abs() < 1e-6);
    }

    #[test]
    fn da_total_equals_dilf_at_gamma_zero_and_skips_orientation_grads() {
        let zo_param = Parameter::new(Tensor::from_rows(&[vec![0.7f32, 0.2]]));
        let mut g = Graph::new();
        let z = g.constant(Tensor::from_rows(&[vec![0.3f32, -0.2]]));
        let zo = g.param(&zo_param);
        let img = loss_img(&mut g, z, &[0]);
        let frgt = loss_frgt(&mut g, z, &[], None, 0, 2.0);
        let or_term = loss_or(&mut g, zo, &[0]);
        let da = loss_total_da(&mut g, img, frgt);
        let dilf0 = loss_total(&mut g, img, frgt, or_term, 0.0);
        assert_eq!(g.value(da).item(), g.value(dilf0).item());

        g.backward(da);
        assert!(zo_param.borrow().grad.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ss_total_matches_three_term_oracle_and_leaves_rotated_rows_out() {
        // 2 samples, M=2, rows sample-major: [s0 j0, s0 j1, s1 j0, s1 j1]
        let image_rows = vec![
            vec![0.3f32, -0.2, 0.9],
            vec![0.6, 0.6, -0.1],
            vec![1.0, 0.1, 0.2],
            vec![-0.4, 0.8, 0.0],
        ];
        let orient_rows = vec![
            vec![0.2f32, -0.2],
            vec![-0.5, 0.5],
            vec![0.9, 0.3],
            vec![0.1, 0.7],
        ];
        let img_labels = [0usize, 0, 2, 2];
        let or_labels = [0usize, 1, 0, 1];
        let originals = [0usize, 2];

        let zp = Parameter::new(Tensor::from_rows(&image_rows));
        let mut g = Graph::new();
        let z = g.param(&zp);
        let zo = g.constant(Tensor::from_rows(&orient_rows));
        let picked = g.select_rows(z, &originals);
        let img = loss_img(&mut g, picked, &[img_labels[0], img_labels[2]]);
        let frgt = loss_frgt(&mut g, z, &[], None, 0, 2.0);
        let or_term = loss_or(&mut g, zo, &or_labels);
        let total = loss_total_ss(&mut g, img, frgt, or_term);

        let oracle_img =
            (ce_scalar(&image_rows[0], 0) + ce_scalar(&image_rows[2], 2)) / 2.0;
        let oracle_or: f64 = orient_rows
            .iter()
            .zip(&or_labels)
            .map(|(r, &t)| ce_scalar(r, t))
            .sum::<f64>()
            / 4.0;
        assert!((g.value(total).item() as f64 - (oracle_img + oracle_or)).abs() < 1e-6);

        // rotated rows contribute nothing to the image-logit gradient
        g.backward(total);
        let grad = &zp.borrow().grad;
        assert!(grad[3..6].iter().all(|&v| v == 0.0), "row 1 (rotated) has image grads");
        assert!(grad[9..12].iter().all(|&v| v == 0.0), "row 3 (rotated) has image grads");
        assert!(grad[0..3].iter().any(|&v| v != 0.0));
    }
}
