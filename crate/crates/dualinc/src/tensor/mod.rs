//! Minimal dense-tensor arithmetic with reverse-mode differentiation.
//!
//! Values are dense row-major arrays. A forward pass records operations on a
//! [`Graph`]; [`Graph::backward`] walks the tape in reverse and accumulates
//! gradients into [`Parameter`]s until they are explicitly zeroed.

mod graph;
mod optim;

pub use graph::{BnState, Graph, Mode, NodeId};
pub use optim::{lr_schedule, sgd_step, LrSchedule, ParamGroup, Parameter, ParamRef};

use std::fmt::{Debug, Display};

/// Scalar element type of the engine. Parameters and activations run in `f32`;
/// gradient-check harnesses instantiate the same ops in `f64`.
pub trait Real:
    num_traits::Float + num_traits::NumAssignOps + Debug + Display + Default + Send + Sync + 'static
{
    fn c(v: f64) -> Self;
    fn to_f64c(self) -> f64;
}

impl Real for f32 {
    fn c(v: f64) -> f32 {
        v as f32
    }
    fn to_f64c(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn c(v: f64) -> f64 {
        v
    }
    fn to_f64c(self) -> f64 {
        self
    }
}

/// Dense row-major tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Self {
        let numel: usize = shape.iter().product();
        assert_eq!(
            numel,
            data.len(),
            "shape {:?} does not match data length {}",
            shape,
            data.len()
        );
        assert!(shape.iter().all(|&d| d > 0), "zero extent in shape {shape:?}");
        Tensor { shape: shape.to_vec(), data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel: usize = shape.iter().product();
        Tensor::new(shape, vec![T::zero(); numel])
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        let numel: usize = shape.iter().product();
        Tensor::new(shape, vec![value; numel])
    }

    pub fn scalar(value: T) -> Self {
        Tensor::new(&[1], vec![value])
    }

    /// 2-D constructor from nested rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        let k = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == k), "ragged rows");
        Tensor::new(&[n, k], rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Single element of a scalar tensor.
    pub fn item(&self) -> T {
        assert_eq!(self.len(), 1, "item() on non-scalar tensor {:?}", self.shape);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Extents of a rank-2 tensor.
    pub fn dims2(&self) -> (usize, usize) {
        assert_eq!(self.shape.len(), 2, "expected rank 2, got {:?}", self.shape);
        (self.shape[0], self.shape[1])
    }

    /// Extents of a rank-4 tensor.
    pub fn dims4(&self) -> (usize, usize, usize, usize) {
        assert_eq!(self.shape.len(), 4, "expected rank 4, got {:?}", self.shape);
        (self.shape[0], self.shape[1], self.shape[2], self.shape[3])
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[T] {
        let (n, k) = self.dims2();
        assert!(i < n);
        &self.data[i * k..(i + 1) * k]
    }
}

/// Row-major matrix product: `a` is m×k, `b` is k×n.
pub(crate) fn matmul<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for j in 0..n {
                out_row[j] += aip * b_row[j];
            }
        }
    }
    out
}

pub(crate) fn transpose<T: Real>(a: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); a.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

/// Row-wise softmax of a rank-2 tensor, outside any graph. Used at eval time
/// where no gradients are needed.
pub fn softmax_rows<T: Real>(logits: &Tensor<T>) -> Tensor<T> {
    let (n, k) = logits.dims2();
    let mut out = vec![T::zero(); n * k];
    for i in 0..n {
        let row = logits.row(i);
        let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for j in 0..k {
            let e = (row[j] - max).exp();
            out[i * k + j] = e;
            sum += e;
        }
        for j in 0..k {
            out[i * k + j] /= sum;
        }
    }
    Tensor::new(&[n, k], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_data_agreement_is_enforced() {
        let t = Tensor::<f32>::new(&[2, 3], vec![0.0; 6]);
        assert_eq!(t.len(), 6);
    }

    #[test]
    #[should_panic(expected = "does not match data length")]
    fn shape_mismatch_panics() {
        let _ = Tensor::<f32>::new(&[2, 3], vec![0.0; 5]);
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        // random 3x4 by 4x2 against an independently coded triple loop
        let mut rng = 0x243f6a88u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        let a: Vec<f64> = (0..12).map(|_| next()).collect();
        let b: Vec<f64> = (0..8).map(|_| next()).collect();
        let got = matmul(&a, &b, 3, 4, 2);
        for i in 0..3 {
            for j in 0..2 {
                let mut acc = 0.0;
                for p in 0..4 {
                    acc += a[i * 4 + p] * b[p * 2 + j];
                }
                assert!((got[i * 2 + j] - acc).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn softmax_rows_are_distributions() {
        let t = Tensor::from_rows(&[vec![1.0f32, 2.0, 3.0], vec![-5.0, 0.0, 5.0]]);
        let p = softmax_rows(&t);
        for i in 0..2 {
            let row = p.row(i);
            assert!(row.iter().all(|&v| v >= 0.0));
            let sum: f32 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
        }
    }
}
