//! Shared helpers for the integration suites: a 64-bit central
//! finite-difference harness for the engine ops and small RNG utilities.

#![allow(dead_code)]

use dualinc::tensor::{Graph, NodeId, ParamRef, Parameter, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
}

/// Uniform values bounded away from zero; keeps kinked ops (leaky relu)
/// differentiable at every probe point.
pub fn rand_vec_off_kink(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let mag = r.gen_range(0.05..1.0);
            if r.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

pub fn param(shape: &[usize], data: Vec<f64>) -> ParamRef<f64> {
    Parameter::new(Tensor::new(shape, data))
}

/// Result of one finite-difference comparison run.
#[derive(Debug, Default)]
pub struct FdReport {
    pub max_rel_err: f64,
    pub coords_checked: usize,
}

impl FdReport {
    pub fn merge(&mut self, other: &FdReport) {
        self.max_rel_err = self.max_rel_err.max(other.max_rel_err);
        self.coords_checked += other.coords_checked;
    }
}

/// Central finite differences against the analytic gradients of `build`.
///
/// `build` must construct the scalar loss from the given parameter leaves and
/// must be a pure function of the parameter values. Every coordinate of every
/// parameter is perturbed by ±h.
pub fn finite_diff_check<F>(params: &[ParamRef<f64>], h: f64, build: F) -> FdReport
where
    F: Fn(&mut Graph<f64>, &[NodeId]) -> NodeId,
{
    let forward = |params: &[ParamRef<f64>]| -> f64 {
        let mut g = Graph::new();
        let leaves: Vec<NodeId> = params.iter().map(|p| g.param(p)).collect();
        let loss = build(&mut g, &leaves);
        g.value(loss).item()
    };

    for p in params {
        p.borrow_mut().zero_grad();
    }
    let mut g = Graph::new();
    let leaves: Vec<NodeId> = params.iter().map(|p| g.param(p)).collect();
    let loss = build(&mut g, &leaves);
    g.backward(loss);
    let analytic: Vec<Vec<f64>> = params.iter().map(|p| p.borrow().grad.clone()).collect();

    let mut report = FdReport::default();
    for (pi, p) in params.iter().enumerate() {
        let len = p.borrow().value.len();
        for i in 0..len {
            let orig = p.borrow().value.data()[i];
            p.borrow_mut().value.data_mut()[i] = orig + h;
            let up = forward(params);
            p.borrow_mut().value.data_mut()[i] = orig - h;
            let down = forward(params);
            p.borrow_mut().value.data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[pi][i];
            let rel = (a - numeric).abs() / f64::max(f64::max(a.abs(), numeric.abs()), 1e-6);
            report.max_rel_err = report.max_rel_err.max(rel);
            report.coords_checked += 1;
        }
    }
    report
}

/// Probe tensor for reducing a non-scalar op output to a scalar loss with
/// distinct per-coordinate weights.
pub fn probe(g: &mut Graph<f64>, shape: &[usize], r: &mut ChaCha8Rng) -> NodeId {
    let n: usize = shape.iter().product();
    g.constant(Tensor::new(shape, rand_vec(r, n)))
}

/// weighted sum of `out` against a fresh random probe (seeded, so stable
/// across the rebuilds inside one finite_diff_check call)
pub fn probe_loss(g: &mut Graph<f64>, out: NodeId, probe_data: &Tensor<f64>) -> NodeId {
    let pr = g.constant(probe_data.clone());
    let weighted = g.mul(out, pr);
    g.sum(weighted)
}
