//! Class-incremental learning laboratory.
//!
//! Training data arrives in phases, each introducing unseen image classes;
//! the model is evaluated on all classes seen so far. This crate trains a
//! small conv net jointly on two objectives — the class-incremental image
//! objective and a data-incremental orientation objective whose classes stay
//! fixed across phases — and evaluates with a data-ensemble that combines
//! the predictions for several orientations of each test image.
//!
//! The stack is self-contained: a minimal reverse-mode tensor engine
//! ([`tensor`]), dataset and phase plumbing ([`data`]), the two-headed model
//! ([`model`]), the phase trainer with replay memory ([`trainer`]), ensemble
//! evaluation and analysis ([`eval`]), and the experiment front door
//! ([`exp`]). See `examples/` for runnable entry points per capability.

pub mod data;
pub mod eval;
pub mod exp;
pub mod model;
pub mod tensor;
pub mod trainer;

/// Splitmix64 step; used to derive independent RNG streams from one run seed.
pub(crate) fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
