//! Trainable parameters and SGD with momentum.

use super::{Real, Tensor};
use std::cell::RefCell;
use std::rc::Rc;

/// Shared handle to a trainable tensor. Graphs hold clones of the handle and
/// accumulate gradients through it.
pub type ParamRef<T = f32> = Rc<RefCell<Parameter<T>>>;

/// A tensor with an always-allocated gradient buffer of identical shape.
#[derive(Clone, Debug)]
pub struct Parameter<T = f32> {
    pub value: Tensor<T>,
    pub grad: Vec<T>,
}

impl<T: Real> Parameter<T> {
    pub fn new(value: Tensor<T>) -> ParamRef<T> {
        let grad = vec![T::zero(); value.len()];
        Rc::new(RefCell::new(Parameter { value, grad }))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

/// One optimizer group: parameters plus matching momentum buffers.
pub struct ParamGroup<T = f32> {
    pub params: Vec<ParamRef<T>>,
    buffers: Vec<Vec<T>>,
    pub learning_rate: T,
    pub momentum: T,
    pub weight_decay: T,
}

impl<T: Real> ParamGroup<T> {
    pub fn new(params: Vec<ParamRef<T>>, learning_rate: T, momentum: T, weight_decay: T) -> Self {
        assert!(learning_rate > T::zero(), "learning rate must be positive");
        assert!(momentum >= T::zero() && momentum < T::one(), "momentum must be in [0,1)");
        assert!(weight_decay >= T::zero(), "weight decay must be nonnegative");
        let buffers = params.iter().map(|p| vec![T::zero(); p.borrow().value.len()]).collect();
        ParamGroup { params, buffers, learning_rate, momentum, weight_decay }
    }

    pub fn zero_grad(&mut self) {
        for p in &self.params {
            p.borrow_mut().zero_grad();
        }
    }
}

/// buffer <- momentum*buffer + grad + weight_decay*param; param <- param - lr*buffer
pub fn sgd_step<T: Real>(group: &mut ParamGroup<T>) {
    for (p, buf) in group.params.iter().zip(group.buffers.iter_mut()) {
        let mut p = p.borrow_mut();
        assert_eq!(
            p.grad.len(),
            p.value.len(),
            "gradient buffer does not match parameter (stale group after head growth?)"
        );
        assert_eq!(buf.len(), p.value.len(), "momentum buffer does not match parameter");
        let lr = group.learning_rate;
        let wd = group.weight_decay;
        let mom = group.momentum;
        let value = p.value.data_mut();
        for i in 0..buf.len() {
            buf[i] = mom * buf[i] + wd * value[i];
        }
        for (b, g) in buf.iter_mut().zip(&p.grad) {
            *b += *g;
        }
        let value = p.value.data_mut();
        for (v, b) in value.iter_mut().zip(buf.iter()) {
            *v = *v - lr * *b;
        }
    }
}

/// Learning-rate schedule over the epochs of one phase.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    /// Multiply the base rate by `decay` at each milestone passed.
    Step { milestones: Vec<usize>, decay: f64 },
    /// Half-cosine from the base rate to zero over `horizon` epochs.
    Cosine { horizon: usize },
}

pub fn lr_schedule(kind: &LrSchedule, base_lr: f64, epoch: usize) -> f64 {
    match kind {
        LrSchedule::Step { milestones, decay } => {
            let passed = milestones.iter().filter(|&&m| epoch >= m).count();
            base_lr * decay.powi(passed as i32)
        }
        LrSchedule::Cosine { horizon } => {
            assert!(epoch <= *horizon, "epoch {epoch} beyond cosine horizon {horizon}");
            base_lr * 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / *horizon as f64).cos())
        }
    }
}
