//! The backbone feature extractor, the growing image-class head, and the
//! fixed orientation head.
//!
//! One backbone pass feeds both heads. The image head is a global average
//! pool followed by one fully-connected map whose output extent grows per
//! phase; the orientation head is four conv blocks on the pre-pool feature
//! map, then pool and a fully-connected map to the fixed M orientation
//! classes.

mod checkpoint;
mod layers;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use layers::{BatchNorm2d, Conv2d, ConvBlock, Linear, BN_EPS, BN_MOMENTUM, LEAKY_SLOPE};

use crate::derive_seed;
use crate::tensor::{Graph, Mode, NodeId, ParamRef, Parameter, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Backbone geometry. Blocks 0..3 run at widths base, 2*base, 4*base with
/// strides 1, 2, 2; any further blocks keep the final width at stride 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_side: usize,
    pub in_channels: usize,
    pub base_channels: usize,
    pub depth: usize,
}

impl ModelConfig {
    /// 16x16 inputs to a 4x4x(4*base) feature map; sized for fast runs.
    pub fn small() -> Self {
        ModelConfig { input_side: 16, in_channels: 3, base_channels: 8, depth: 3 }
    }

    /// 32x32 inputs to an 8x8x64 feature map.
    pub fn cifar() -> Self {
        ModelConfig { input_side: 32, in_channels: 3, base_channels: 16, depth: 4 }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "small" => Some(Self::small()),
            "cifar" => Some(Self::cifar()),
            _ => None,
        }
    }

    pub fn feature_channels(&self) -> usize {
        self.base_channels * 4
    }

    pub fn feature_side(&self) -> usize {
        // two stride-2 blocks
        let s = (self.input_side + 1) / 2;
        (s + 1) / 2
    }

    fn block_plan(&self) -> Vec<(usize, usize, usize)> {
        assert!(self.depth >= 3, "backbone depth must be at least 3");
        let mut plan = vec![
            (self.in_channels, self.base_channels, 1),
            (self.base_channels, self.base_channels * 2, 2),
            (self.base_channels * 2, self.base_channels * 4, 2),
        ];
        for _ in 3..self.depth {
            plan.push((self.base_channels * 4, self.base_channels * 4, 1));
        }
        plan
    }
}

/// Orientation head: four 3x3 conv blocks at constant width on the pre-pool
/// features, average pool, then a fully-connected map to M logits.
pub struct OrientationHead {
    pub blocks: Vec<ConvBlock>,
    pub fc: Linear,
}

impl OrientationHead {
    fn init(seed: u64, channels: usize, m: usize) -> Self {
        let blocks = (0..4)
            .map(|i| ConvBlock::init(derive_seed(seed, 100 + i as u64), channels, channels, 1))
            .collect();
        let fc = Linear::init(derive_seed(seed, 104), channels, m);
        OrientationHead { blocks, fc }
    }

    fn forward(&self, g: &mut Graph, features: NodeId, mode: Mode) -> NodeId {
        let mut x = features;
        for block in &self.blocks {
            x = block.forward(g, x, mode);
        }
        let pooled = g.global_avg_pool(x);
        self.fc.forward(g, pooled)
    }

    fn clone_detached(&self) -> Self {
        OrientationHead {
            blocks: self.blocks.iter().map(ConvBlock::clone_detached).collect(),
            fc: self.fc.clone_detached(),
        }
    }
}

/// Node ids of one forward pass.
pub struct ForwardPass {
    /// Pre-pool feature map [N, C, h, w] shared by both heads.
    pub features: NodeId,
    /// Post-pool embedding [N, C].
    pub pooled: NodeId,
    /// [N, K_seen]
    pub image_logits: NodeId,
    /// [N, M]
    pub orientation_logits: NodeId,
}

pub struct Model {
    pub config: ModelConfig,
    pub backbone: Vec<ConvBlock>,
    pub image_head: Linear,
    pub orientation_head: OrientationHead,
    init_seed: u64,
    k_seen: usize,
    m: usize,
}

/// Deterministic seeded initialization with `base_class_count` image logits
/// and `m` orientation logits.
pub fn init_model(config: &ModelConfig, base_class_count: usize, m: usize, seed: u64) -> Model {
    assert!(m >= 1, "orientation class count must be at least 1");
    assert!(base_class_count >= 1);
    let backbone = config
        .block_plan()
        .into_iter()
        .enumerate()
        .map(|(i, (cin, cout, stride))| ConvBlock::init(derive_seed(seed, i as u64), cin, cout, stride))
        .collect();
    let image_head = Linear::init(derive_seed(seed, 50), config.feature_channels(), base_class_count);
    let orientation_head = OrientationHead::init(derive_seed(seed, 60), config.feature_channels(), m);
    Model {
        config: config.clone(),
        backbone,
        image_head,
        orientation_head,
        init_seed: seed,
        k_seen: base_class_count,
        m,
    }
}

impl Model {
    /// Classes seen through the current phase (image-head extent).
    pub fn k_seen(&self) -> usize {
        self.k_seen
    }

    /// Orientation-head extent; constant across phases.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    /// One backbone pass shared by both heads.
    pub fn forward(&self, g: &mut Graph, batch: Tensor, mode: Mode) -> ForwardPass {
        let (_, c, h, w) = batch.dims4();
        assert_eq!(
            (c, h, w),
            (self.config.in_channels, self.config.input_side, self.config.input_side),
            "input batch does not match the model config"
        );
        let mut x = g.constant(batch);
        for block in &self.backbone {
            x = block.forward(g, x, mode);
        }
        let features = x;
        let pooled = g.global_avg_pool(features);
        let image_logits = self.image_head.forward(g, pooled);
        let orientation_logits = self.orientation_head.forward(g, features, mode);
        ForwardPass { features, pooled, image_logits, orientation_logits }
    }

    /// Grow the image head by `new_class_count` logits. Existing weight
    /// columns and biases are preserved bitwise; new entries use the seeded
    /// init rule.
    pub fn expand_image_head(&mut self, new_class_count: usize) {
        assert!(new_class_count >= 1);
        let d = self.config.feature_channels();
        let old_k = self.k_seen;
        let new_k = old_k + new_class_count;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.init_seed, 1000 + new_k as u64));
        let fresh = layers::uniform_init(&mut rng, &[d, new_class_count], d);

        let old_w = self.image_head.weight.borrow().value.clone();
        let mut w = vec![0.0f32; d * new_k];
        for row in 0..d {
            w[row * new_k..row * new_k + old_k]
                .copy_from_slice(&old_w.data()[row * old_k..(row + 1) * old_k]);
            w[row * new_k + old_k..(row + 1) * new_k]
                .copy_from_slice(&fresh.data()[row * new_class_count..(row + 1) * new_class_count]);
        }
        let old_b = self.image_head.bias.borrow().value.clone();
        let mut b = vec![0.0f32; new_k];
        b[..old_k].copy_from_slice(old_b.data());

        self.image_head = Linear {
            weight: Parameter::new(Tensor::new(&[d, new_k], w)),
            bias: Parameter::new(Tensor::new(&[new_k], b)),
        };
        self.k_seen = new_k;
    }

    /// All trainable parameters in a fixed traversal order.
    pub fn params(&self) -> Vec<ParamRef> {
        self.named_params().into_iter().map(|(_, p)| p).collect()
    }

    /// Named parameters, stable across runs of the same build.
    pub fn named_params(&self) -> Vec<(String, ParamRef)> {
        let mut out = Vec::new();
        for (i, block) in self.backbone.iter().enumerate() {
            out.push((format!("backbone.{i}.conv.weight"), block.conv.weight.clone()));
            out.push((format!("backbone.{i}.conv.bias"), block.conv.bias.clone()));
            out.push((format!("backbone.{i}.bn.gamma"), block.bn.gamma.clone()));
            out.push((format!("backbone.{i}.bn.beta"), block.bn.beta.clone()));
        }
        out.push(("image_head.weight".into(), self.image_head.weight.clone()));
        out.push(("image_head.bias".into(), self.image_head.bias.clone()));
        for (i, block) in self.orientation_head.blocks.iter().enumerate() {
            out.push((format!("orientation_head.{i}.conv.weight"), block.conv.weight.clone()));
            out.push((format!("orientation_head.{i}.conv.bias"), block.conv.bias.clone()));
            out.push((format!("orientation_head.{i}.bn.gamma"), block.bn.gamma.clone()));
            out.push((format!("orientation_head.{i}.bn.beta"), block.bn.beta.clone()));
        }
        out.push(("orientation_head.fc.weight".into(), self.orientation_head.fc.weight.clone()));
        out.push(("orientation_head.fc.bias".into(), self.orientation_head.fc.bias.clone()));
        out
    }

    /// Named batchnorm layers in the same traversal order.
    pub fn named_bn_layers(&self) -> Vec<(String, &BatchNorm2d)> {
        let mut out = Vec::new();
        for (i, block) in self.backbone.iter().enumerate() {
            out.push((format!("backbone.{i}.bn"), &block.bn));
        }
        for (i, block) in self.orientation_head.blocks.iter().enumerate() {
            out.push((format!("orientation_head.{i}.bn"), &block.bn));
        }
        out
    }

    /// Deep copy with fresh parameter handles; training the original no
    /// longer affects the copy.
    pub fn clone_detached(&self) -> Model {
        Model {
            config: self.config.clone(),
            backbone: self.backbone.iter().map(ConvBlock::clone_detached).collect(),
            image_head: self.image_head.clone_detached(),
            orientation_head: self.orientation_head.clone_detached(),
            init_seed: self.init_seed,
            k_seen: self.k_seen,
            m: self.m,
        }
    }
}

/// Frozen end-of-phase copy used as the distillation teacher; produces
/// old-class logits only.
pub struct ModelSnapshot {
    model: Model,
}

pub fn snapshot(model: &Model) -> ModelSnapshot {
    ModelSnapshot { model: model.clone_detached() }
}

impl ModelSnapshot {
    /// Image-head extent at capture time.
    pub fn k_seen(&self) -> usize {
        self.model.k_seen()
    }

    /// Eval-mode image logits [N, k_seen-at-capture].
    pub fn image_logits(&self, batch: Tensor) -> Tensor {
        let mut g = Graph::new();
        let pass = self.model.forward(&mut g, batch, Mode::Eval);
        g.value(pass.image_logits).clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_batch(seed: u64, n: usize, config: &ModelConfig) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = n * config.in_channels * config.input_side * config.input_side;
        Tensor::new(
            &[n, config.in_channels, config.input_side, config.input_side],
            (0..len).map(|_| rng.gen_range(0.0..1.0)).collect(),
        )
    }

    #[test]
    fn same_seed_same_parameters() {
        let cfg = ModelConfig::small();
        let a = init_model(&cfg, 4, 2, 9);
        let b = init_model(&cfg, 4, 2, 9);
        for ((_, pa), (_, pb)) in a.named_params().iter().zip(b.named_params().iter()) {
            assert_eq!(pa.borrow().value, pb.borrow().value);
        }
    }

    #[test]
    fn cifar_preset_feature_geometry() {
        let cfg = ModelConfig::cifar();
        assert_eq!(cfg.feature_channels(), 64);
        assert_eq!(cfg.feature_side(), 8);
        let model = init_model(&cfg, 10, 2, 1);
        let mut g = Graph::new();
        let pass = model.forward(&mut g, random_batch(1, 1, &cfg), Mode::Eval);
        assert_eq!(g.value(pass.features).shape(), &[1, 64, 8, 8]);
    }

    #[test]
    fn orientation_head_emits_m_logits() {
        let cfg = ModelConfig::small();
        let model = init_model(&cfg, 4, 2, 3);
        let mut g = Graph::new();
        let pass = model.forward(&mut g, random_batch(2, 3, &cfg), Mode::Eval);
        assert_eq!(g.value(pass.orientation_logits).shape(), &[3, 2]);
        assert_eq!(g.value(pass.image_logits).shape(), &[3, 4]);
    }

    #[test]
    fn eval_forward_is_stateless_and_repeatable() {
        let cfg = ModelConfig::small();
        let model = init_model(&cfg, 4, 2, 3);
        let batch = random_batch(7, 2, &cfg);
        let states_before: Vec<_> =
            model.named_bn_layers().iter().map(|(_, bn)| bn.state()).collect();
        let mut g1 = Graph::new();
        let p1 = model.forward(&mut g1, batch.clone(), Mode::Eval);
        let mut g2 = Graph::new();
        let p2 = model.forward(&mut g2, batch, Mode::Eval);
        assert_eq!(g1.value(p1.image_logits), g2.value(p2.image_logits));
        for ((_, bn), before) in model.named_bn_layers().iter().zip(states_before) {
            assert_eq!(bn.state().mean, before.mean);
            assert_eq!(bn.state().var, before.var);
        }
    }

    #[test]
    fn train_forward_updates_running_stats() {
        let cfg = ModelConfig::small();
        let model = init_model(&cfg, 4, 2, 3);
        let before = model.backbone[0].bn.state();
        let mut g = Graph::new();
        let _ = model.forward(&mut g, random_batch(8, 2, &cfg), Mode::Train);
        let after = model.backbone[0].bn.state();
        assert_ne!(before.mean, after.mean);
    }

    #[test]
    fn expansion_preserves_old_rows_and_logits() {
        let cfg = ModelConfig::small();
        let mut model = init_model(&cfg, 4, 2, 5);
        let batch = random_batch(3, 2, &cfg);
        let mut g = Graph::new();
        let pass_before = model.forward(&mut g, batch.clone(), Mode::Eval);
        let before = g.value(pass_before.image_logits).clone();
        let old_w = model.image_head.weight.borrow().value.clone();

        model.expand_image_head(3);
        assert_eq!(model.k_seen(), 7);
        let new_w = model.image_head.weight.borrow().value.clone();
        for row in 0..cfg.feature_channels() {
            assert_eq!(&new_w.data()[row * 7..row * 7 + 4], &old_w.data()[row * 4..(row + 1) * 4]);
        }

        let mut g = Graph::new();
        let pass_after = model.forward(&mut g, batch, Mode::Eval);
        let after = g.value(pass_after.image_logits).clone();
        for i in 0..2 {
            for k in 0..4 {
                assert_eq!(after.data()[i * 7 + k], before.data()[i * 4 + k]);
            }
        }
    }

    #[test]
    fn repeated_single_class_expansion_reaches_target() {
        let cfg = ModelConfig::small();
        let mut model = init_model(&cfg, 50, 2, 5);
        for _ in 0..50 {
            model.expand_image_head(1);
        }
        assert_eq!(model.k_seen(), 100);
        assert_eq!(model.image_head.out_features(), 100);
    }

    #[test]
    fn snapshot_is_isolated_from_training() {
        let cfg = ModelConfig::small();
        let model = init_model(&cfg, 4, 2, 11);
        let batch = random_batch(13, 2, &cfg);
        let snap = snapshot(&model);
        let at_capture = snap.image_logits(batch.clone());

        // mutate the live model
        for p in model.params() {
            let mut p = p.borrow_mut();
            for v in p.value.data_mut() {
                *v += 0.5;
            }
        }
        let mut g = Graph::new();
        let pass_live = model.forward(&mut g, batch.clone(), Mode::Eval);
        let live = g.value(pass_live.image_logits).clone();
        let snap_now = snap.image_logits(batch);
        assert_eq!(snap_now, at_capture);
        assert_ne!(live, at_capture);
        assert_eq!(snap.k_seen(), 4);
    }
}
