//! Experiment configuration: a sectioned, human-editable TOML file whose
//! fields the CLI flags mirror.

use crate::data::{synth_oriented, ChannelNorm, Dataset, DataError, OrientationSet};
use crate::derive_seed;
use crate::eval::Strategy;
use crate::model::ModelConfig;
use crate::tensor::LrSchedule;
use crate::trainer::{Objective, SelectionMode, TrainConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Output root override; relative `out_dir` values are joined under it.
pub const OUT_ROOT_ENV: &str = "DUALINC_OUT_ROOT";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    pub schedule: ScheduleSection,
    pub model: ModelSection,
    pub orientations: OrientationSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub run: RunSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSection::default(),
            schedule: ScheduleSection::default(),
            model: ModelSection::default(),
            orientations: OrientationSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
            run: RunSection::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    /// "synthetic" or "cifar100".
    pub kind: String,
    // synthetic parameters
    pub classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub side: usize,
    /// Seed of the generator; derived from the run seed when absent.
    pub data_seed: Option<u64>,
    // cifar100 parameters
    pub train_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub normalize: Option<ChannelNorm>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            kind: "synthetic".into(),
            classes: 8,
            train_per_class: 60,
            test_per_class: 25,
            side: 16,
            data_seed: None,
            train_path: None,
            test_path: None,
            normalize: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub base_classes: usize,
    /// Number of incremental phases after the base phase.
    pub phases: usize,
    /// Seed of the class permutation; derived from the run seed when absent.
    pub class_order_seed: Option<u64>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection { base_classes: 4, phases: 2, class_order_seed: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// "small" or "cifar"; individual fields below override the preset.
    pub preset: String,
    pub input_side: Option<usize>,
    pub in_channels: Option<usize>,
    pub base_channels: Option<usize>,
    pub depth: Option<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { preset: "small".into(), input_side: None, in_channels: None, base_channels: None, depth: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrientationSection {
    /// Degrees; index 0 must be 0.
    pub angles: Vec<f32>,
}

impl Default for OrientationSection {
    fn default() -> Self {
        OrientationSection { angles: vec![0.0, 90.0] }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub objective: Objective,
    pub gamma: f32,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f32,
    pub weight_decay: f32,
    /// "step" or "cosine".
    pub lr_schedule: String,
    pub milestones: Vec<usize>,
    pub decay: f64,
    pub temperature: f32,
    pub distill_all: bool,
    pub memory_per_class: usize,
    pub selection: SelectionMode,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            objective: Objective::Dilf,
            gamma: 0.5,
            epochs: 12,
            batch_size: 32,
            learning_rate: 0.05,
            momentum: 0.9,
            weight_decay: 5e-4,
            lr_schedule: "step".into(),
            milestones: vec![8, 11],
            decay: 0.1,
            temperature: 2.0,
            distill_all: false,
            memory_per_class: 20,
            selection: SelectionMode::Herding,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub strategy: Strategy,
    /// Permit ensemble evaluation of a plain-trained model.
    pub allow_plain_ensemble: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { strategy: Strategy::Avg, allow_plain_ensemble: false }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Keep run artifacts free of wall-clock content so reruns are
    /// byte-identical; timings go to a separate file when false.
    pub deterministic: bool,
    pub repeats: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { seed: 7, out_dir: PathBuf::from("runs/exp"), deterministic: true, repeats: 1 }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Total image classes of the configured dataset.
    pub fn total_classes(&self) -> usize {
        match self.dataset.kind.as_str() {
            "cifar100" => 100,
            _ => self.dataset.classes,
        }
    }

    pub fn class_order_seed(&self) -> u64 {
        self.schedule.class_order_seed.unwrap_or_else(|| derive_seed(self.run.seed, 0xc1a55))
    }

    pub fn data_seed(&self) -> u64 {
        self.dataset.data_seed.unwrap_or_else(|| derive_seed(self.run.seed, 0xda7a))
    }

    pub fn model_config(&self) -> Result<ModelConfig, String> {
        let mut cfg = ModelConfig::by_name(&self.model.preset)
            .ok_or_else(|| format!("unknown model preset '{}' (small, cifar)", self.model.preset))?;
        if let Some(v) = self.model.input_side {
            cfg.input_side = v;
        }
        if let Some(v) = self.model.in_channels {
            cfg.in_channels = v;
        }
        if let Some(v) = self.model.base_channels {
            cfg.base_channels = v;
        }
        if let Some(v) = self.model.depth {
            cfg.depth = v;
        }
        Ok(cfg)
    }

    pub fn orientation_set(&self) -> OrientationSet {
        OrientationSet::new(self.orientations.angles.clone())
    }

    pub fn train_config(&self) -> Result<TrainConfig, String> {
        let schedule = match self.train.lr_schedule.as_str() {
            "step" => LrSchedule::Step { milestones: self.train.milestones.clone(), decay: self.train.decay },
            "cosine" => LrSchedule::Cosine { horizon: self.train.epochs },
            other => return Err(format!("unknown lr schedule '{other}' (step, cosine)")),
        };
        Ok(TrainConfig {
            objective: self.train.objective,
            gamma: self.train.gamma,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            momentum: self.train.momentum,
            weight_decay: self.train.weight_decay,
            schedule,
            temperature: self.train.temperature,
            distill_all: self.train.distill_all,
            memory_per_class: self.train.memory_per_class,
            selection: self.train.selection,
        })
    }

    /// Output directory with the environment root applied.
    pub fn resolved_out_dir(&self) -> PathBuf {
        match std::env::var_os(OUT_ROOT_ENV) {
            Some(root) if self.run.out_dir.is_relative() => PathBuf::from(root).join(&self.run.out_dir),
            _ => self.run.out_dir.clone(),
        }
    }

    /// Every validation failure, phrased for the person editing the file.
    pub fn validate(&self) -> Result<Vec<String>, String> {
        let mut warnings = Vec::new();
        match self.dataset.kind.as_str() {
            "synthetic" => {
                if self.dataset.side < 8 {
                    return Err("dataset.side must be at least 8".into());
                }
                if self.dataset.classes == 0 || self.dataset.train_per_class == 0 {
                    return Err("synthetic dataset needs classes >= 1 and train_per_class >= 1".into());
                }
                if self.dataset.test_per_class == 0 {
                    return Err("dataset.test_per_class must be at least 1".into());
                }
            }
            "cifar100" => {
                if self.dataset.train_path.is_none() || self.dataset.test_path.is_none() {
                    return Err("cifar100 dataset needs train_path and test_path".into());
                }
            }
            other => return Err(format!("unknown dataset kind '{other}' (synthetic, cifar100)")),
        }

        let total = self.total_classes();
        let base = self.schedule.base_classes;
        let phases = self.schedule.phases;
        if phases == 0 {
            return Err("schedule.phases must be at least 1".into());
        }
        if base == 0 || base >= total {
            return Err(format!("schedule.base_classes must be in 1..{total}"));
        }
        if (total - base) % phases != 0 {
            return Err(format!(
                "({total} - {base}) classes do not divide evenly into {phases} phases"
            ));
        }

        validate_angles(&self.orientations.angles)?;

        if self.train.gamma < 0.0 {
            return Err("train.gamma must be nonnegative".into());
        }
        if self.train.epochs == 0 || self.train.batch_size == 0 {
            return Err("train.epochs and train.batch_size must be at least 1".into());
        }
        if self.train.learning_rate <= 0.0 {
            return Err("train.learning_rate must be positive".into());
        }
        if !(0.0..1.0).contains(&self.train.momentum) {
            return Err("train.momentum must be in [0,1)".into());
        }
        if self.train.temperature <= 0.0 {
            return Err("train.temperature must be positive".into());
        }
        let model = self.model_config()?;
        self.train_config()?;
        let dataset_side = if self.dataset.kind == "cifar100" { 32 } else { self.dataset.side };
        if model.input_side != dataset_side {
            return Err(format!(
                "model input side {} does not match the {}-pixel dataset images",
                model.input_side, dataset_side
            ));
        }
        if self.run.repeats == 0 {
            return Err("run.repeats must be at least 1".into());
        }

        if self.train.objective == Objective::Plain
            && self.eval.strategy.is_ensemble()
            && !self.eval.allow_plain_ensemble
        {
            return Err(format!(
                "refusing ensemble strategy '{}' on a plain-trained model: without joint \
                 orientation training the model has never seen rotated inputs, and combining \
                 its predictions over rotations degrades accuracy; set eval.allow_plain_ensemble \
                 = true (or --allow-plain-ensemble) to run it anyway",
                self.eval.strategy.name()
            ));
        }
        if self.orientations.angles.len() == 1 && self.eval.strategy.is_ensemble() {
            warnings.push(format!(
                "strategy '{}' with a single orientation degenerates to 'none'",
                self.eval.strategy.name()
            ));
        }
        Ok(warnings)
    }
}

/// Orientation angle list checks shared by config validation and overrides.
pub(crate) fn validate_angles(angles: &[f32]) -> Result<(), String> {
    if angles.is_empty() || angles[0] != 0.0 {
        return Err("orientation angles must start with 0".into());
    }
    for (i, a) in angles.iter().enumerate() {
        if !(0.0..360.0).contains(a) {
            return Err(format!("orientation angle {a} outside [0,360)"));
        }
        if angles[..i].contains(a) {
            return Err(format!("duplicate orientation angle {a}"));
        }
    }
    Ok(())
}

/// Materialize the configured dataset.
pub fn build_dataset(config: &ExperimentConfig) -> Result<Dataset, DataError> {
    match config.dataset.kind.as_str() {
        "cifar100" => {
            let train = crate::data::load_cifar100(
                config.dataset.train_path.as_ref().expect("validated"),
                config.dataset.normalize.as_ref(),
            )?;
            let test = crate::data::load_cifar100(
                config.dataset.test_path.as_ref().expect("validated"),
                config.dataset.normalize.as_ref(),
            )?;
            Ok(Dataset::new(train, test, 100))
        }
        _ => {
            let seed = config.data_seed();
            let train = synth_oriented(
                seed,
                config.dataset.classes,
                config.dataset.train_per_class,
                config.dataset.side,
            );
            let test = synth_oriented(
                derive_seed(seed, 0x7e57),
                config.dataset.classes,
                config.dataset.test_per_class,
                config.dataset.side,
            );
            Ok(Dataset::new(train, test, config.dataset.classes))
        }
    }
}
