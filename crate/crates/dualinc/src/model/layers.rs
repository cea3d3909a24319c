//! Layer wrappers owning parameters and batchnorm running state.

use crate::tensor::{BnState, Graph, Mode, NodeId, ParamRef, Parameter, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cell::RefCell;

pub const LEAKY_SLOPE: f32 = 0.1;
pub const BN_MOMENTUM: f32 = 0.1;
pub const BN_EPS: f32 = 1e-5;

/// Fan-in scaled uniform bound for leaky-relu nets.
fn init_bound(fan_in: usize) -> f32 {
    let gain = (2.0 / (1.0 + LEAKY_SLOPE as f64 * LEAKY_SLOPE as f64)).sqrt();
    (gain * (3.0 / fan_in as f64).sqrt()) as f32
}

pub fn uniform_init(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = init_bound(fan_in);
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(shape, data)
}

pub struct Conv2d {
    pub weight: ParamRef,
    pub bias: ParamRef,
    pub stride: usize,
}

impl Conv2d {
    pub fn init(seed: u64, in_channels: usize, out_channels: usize, stride: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weight = Parameter::new(uniform_init(
            &mut rng,
            &[out_channels, in_channels, 3, 3],
            in_channels * 9,
        ));
        let bias = Parameter::new(Tensor::zeros(&[out_channels]));
        Conv2d { weight, bias, stride }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> NodeId {
        let w = g.param(&self.weight);
        let b = g.param(&self.bias);
        g.conv2d(x, w, b, self.stride)
    }

    pub fn clone_detached(&self) -> Self {
        Conv2d {
            weight: Parameter::new(self.weight.borrow().value.clone()),
            bias: Parameter::new(self.bias.borrow().value.clone()),
            stride: self.stride,
        }
    }
}

pub struct BatchNorm2d {
    pub gamma: ParamRef,
    pub beta: ParamRef,
    state: RefCell<BnState>,
}

impl BatchNorm2d {
    pub fn init(channels: usize) -> Self {
        BatchNorm2d {
            gamma: Parameter::new(Tensor::filled(&[channels], 1.0)),
            beta: Parameter::new(Tensor::zeros(&[channels])),
            state: RefCell::new(BnState::new(channels)),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId, mode: Mode) -> NodeId {
        let gamma = g.param(&self.gamma);
        let beta = g.param(&self.beta);
        g.batchnorm2d(x, gamma, beta, &mut self.state.borrow_mut(), BN_MOMENTUM, BN_EPS, mode)
    }

    pub fn state(&self) -> BnState {
        self.state.borrow().clone()
    }

    pub fn set_state(&self, state: BnState) {
        *self.state.borrow_mut() = state;
    }

    pub fn clone_detached(&self) -> Self {
        BatchNorm2d {
            gamma: Parameter::new(self.gamma.borrow().value.clone()),
            beta: Parameter::new(self.beta.borrow().value.clone()),
            state: RefCell::new(self.state.borrow().clone()),
        }
    }
}

pub struct Linear {
    pub weight: ParamRef,
    pub bias: ParamRef,
}

impl Linear {
    pub fn init(seed: u64, in_features: usize, out_features: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weight = Parameter::new(uniform_init(&mut rng, &[in_features, out_features], in_features));
        let bias = Parameter::new(Tensor::zeros(&[out_features]));
        Linear { weight, bias }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> NodeId {
        let w = g.param(&self.weight);
        let b = g.param(&self.bias);
        g.linear(x, w, b)
    }

    pub fn out_features(&self) -> usize {
        self.weight.borrow().value.shape()[1]
    }

    pub fn clone_detached(&self) -> Self {
        Linear {
            weight: Parameter::new(self.weight.borrow().value.clone()),
            bias: Parameter::new(self.bias.borrow().value.clone()),
        }
    }
}

/// Conv + batchnorm + leaky relu.
pub struct ConvBlock {
    pub conv: Conv2d,
    pub bn: BatchNorm2d,
}

impl ConvBlock {
    pub fn init(seed: u64, in_channels: usize, out_channels: usize, stride: usize) -> Self {
        ConvBlock { conv: Conv2d::init(seed, in_channels, out_channels, stride), bn: BatchNorm2d::init(out_channels) }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId, mode: Mode) -> NodeId {
        let conv = self.conv.forward(g, x);
        let bn = self.bn.forward(g, conv, mode);
        g.leaky_relu(bn, LEAKY_SLOPE)
    }

    pub fn clone_detached(&self) -> Self {
        ConvBlock { conv: self.conv.clone_detached(), bn: self.bn.clone_detached() }
    }
}
