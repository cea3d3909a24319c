//! Self-describing JSON checkpoint: config, seed, phase index, every
//! parameter array, batchnorm statistics, and the class-order permutation.

use super::{init_model, Model, ModelConfig};
use crate::tensor::{BnState, Tensor};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed checkpoint: {source}")]
    Malformed {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("checkpoint is missing tensor {0}")]
    MissingTensor(String),
    #[error("checkpoint tensor {name} has shape {found:?}, expected {expected:?}")]
    ShapeMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("checkpoint is missing batchnorm state {0}")]
    MissingBnState(String),
}

#[derive(Serialize, Deserialize)]
struct StoredTensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct StoredBn {
    mean: Vec<f32>,
    var: Vec<f32>,
}

/// On-disk model state plus enough run context to reproduce it.
#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub build: String,
    pub model_config: ModelConfig,
    pub seed: u64,
    pub phase: usize,
    pub k_seen: usize,
    pub orientation_count: usize,
    pub class_order: Vec<usize>,
    /// Echo of the experiment configuration that produced this run.
    pub experiment_toml: String,
    params: BTreeMap<String, StoredTensor>,
    bn_states: BTreeMap<String, StoredBn>,
}

pub fn save_checkpoint(
    path: &Path,
    model: &Model,
    phase: usize,
    class_order: &[usize],
    experiment_toml: &str,
) -> Result<(), CheckpointError> {
    let mut params = BTreeMap::new();
    for (name, p) in model.named_params() {
        let p = p.borrow();
        params.insert(
            name,
            StoredTensor { shape: p.value.shape().to_vec(), data: p.value.data().to_vec() },
        );
    }
    let mut bn_states = BTreeMap::new();
    for (name, bn) in model.named_bn_layers() {
        let s = bn.state();
        bn_states.insert(name, StoredBn { mean: s.mean, var: s.var });
    }
    let ck = Checkpoint {
        format_version: 1,
        build: format!("dualinc {}", env!("CARGO_PKG_VERSION")),
        model_config: model.config.clone(),
        seed: model.init_seed(),
        phase,
        k_seen: model.k_seen(),
        orientation_count: model.m(),
        class_order: class_order.to_vec(),
        experiment_toml: experiment_toml.to_string(),
        params,
        bn_states,
    };
    let json = serde_json::to_string(&ck).expect("checkpoint serialization");
    std::fs::write(path, json)
        .map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, Checkpoint), CheckpointError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
    let ck: Checkpoint = serde_json::from_str(&text)
        .map_err(|source| CheckpointError::Malformed { path: path.display().to_string(), source })?;

    let model = init_model(&ck.model_config, ck.k_seen, ck.orientation_count, ck.seed);
    for (name, p) in model.named_params() {
        let stored = ck.params.get(&name).ok_or_else(|| CheckpointError::MissingTensor(name.clone()))?;
        let mut p = p.borrow_mut();
        if p.value.shape() != stored.shape.as_slice() {
            return Err(CheckpointError::ShapeMismatch {
                name,
                expected: p.value.shape().to_vec(),
                found: stored.shape.clone(),
            });
        }
        p.value = Tensor::new(&stored.shape, stored.data.clone());
    }
    for (name, bn) in model.named_bn_layers() {
        let stored =
            ck.bn_states.get(&name).ok_or_else(|| CheckpointError::MissingBnState(name.clone()))?;
        bn.set_state(BnState { mean: stored.mean.clone(), var: stored.var.clone() });
    }
    Ok((model, ck))
}
