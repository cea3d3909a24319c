//! Operation tape and reverse-mode differentiation.

use super::optim::ParamRef;
use super::{matmul, transpose, Real, Tensor};

pub type NodeId = usize;

/// Batchnorm / forward mode switch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-channel running statistics owned by a batchnorm layer.
#[derive(Clone, Debug)]
pub struct BnState<T = f32> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

impl<T: Real> BnState<T> {
    pub fn new(channels: usize) -> Self {
        BnState { mean: vec![T::zero(); channels], var: vec![T::one(); channels] }
    }
}

enum Op<T> {
    Const,
    Param(ParamRef<T>),
    Linear { x: NodeId, w: NodeId, b: NodeId },
    Conv2d { x: NodeId, w: NodeId, b: NodeId, stride: usize },
    BatchNorm2d { x: NodeId, gamma: NodeId, beta: NodeId, mean: Vec<T>, inv_std: Vec<T>, mode: Mode },
    LeakyRelu { x: NodeId, slope: T },
    GlobalAvgPool { x: NodeId },
    SoftmaxCrossEntropy { logits: NodeId, targets: Vec<usize>, probs: Vec<T> },
    DistillCrossEntropy { logits: NodeId, soft_targets: Vec<T>, temperature: T, probs: Vec<T> },
    Add { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Scale { x: NodeId, c: T },
    TakeCols { x: NodeId, count: usize },
    SelectRows { x: NodeId, rows: Vec<usize> },
    Sum { x: NodeId },
    Pick { x: NodeId, index: usize },
}

struct Node<T> {
    value: Tensor<T>,
    grad: Option<Vec<T>>,
    requires_grad: bool,
    op: Op<T>,
}

/// Ordered record of the operations applied during a forward pass. Nodes are
/// appended in execution order, so every node follows its inputs; backward
/// walks the record in reverse.
pub struct Graph<T = f32> {
    nodes: Vec<Node<T>>,
    consumed: bool,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), consumed: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id].value
    }

    /// Gradient of the loss w.r.t. node `id`, if backward reached it.
    pub fn grad(&self, id: NodeId) -> Option<&[T]> {
        self.nodes[id].grad.as_deref()
    }

    fn push(&mut self, value: Tensor<T>, requires_grad: bool, op: Op<T>) -> NodeId {
        self.nodes.push(Node { value, grad: None, requires_grad, op });
        self.nodes.len() - 1
    }

    fn needs_grad(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|&i| self.nodes[i].requires_grad)
    }

    /// Leaf holding a constant value; no gradient flows into it.
    pub fn constant(&mut self, value: Tensor<T>) -> NodeId {
        self.push(value, false, Op::Const)
    }

    /// Leaf bound to a trainable parameter. The current parameter value is
    /// copied into the node; backward accumulates into the parameter's grad.
    pub fn param(&mut self, p: &ParamRef<T>) -> NodeId {
        let value = p.borrow().value.clone();
        self.push(value, true, Op::Param(p.clone()))
    }

    /// out[n,k] = sum_d x[n,d] * w[d,k] + b[k]
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let (n, d) = self.nodes[x].value.dims2();
        let (dw, k) = self.nodes[w].value.dims2();
        assert_eq!(d, dw, "linear: inner extents disagree ({d} vs {dw})");
        assert_eq!(self.nodes[b].value.shape(), &[k], "linear: bias extent mismatch");
        let mut out = matmul(self.nodes[x].value.data(), self.nodes[w].value.data(), n, d, k);
        let bias = self.nodes[b].value.data();
        for i in 0..n {
            for j in 0..k {
                out[i * k + j] += bias[j];
            }
        }
        let rg = self.needs_grad(&[x, w, b]);
        self.push(Tensor::new(&[n, k], out), rg, Op::Linear { x, w, b })
    }

    /// 3x3 cross-correlation with zero padding 1.
    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize) -> NodeId {
        let (n, c, h, wd) = self.nodes[x].value.dims4();
        let (k, cw, kh, kw) = self.nodes[w].value.dims4();
        assert_eq!(c, cw, "conv2d: channel mismatch ({c} input vs {cw} kernel)");
        assert_eq!((kh, kw), (3, 3), "conv2d: kernel spatial extent must be 3");
        assert_eq!(self.nodes[b].value.shape(), &[k], "conv2d: bias extent mismatch");
        assert!(stride >= 1);
        let oh = (h + 2 - 3) / stride + 1;
        let ow = (wd + 2 - 3) / stride + 1;

        let cols = im2col(self.nodes[x].value.data(), n, c, h, wd, oh, ow, stride);
        // weight viewed as [K, C*9] times cols [C*9, N*OH*OW]
        let out_mat = matmul(self.nodes[w].value.data(), &cols, k, c * 9, n * oh * ow);
        let bias = self.nodes[b].value.data();
        let mut out = vec![T::zero(); n * k * oh * ow];
        for kk in 0..k {
            for ni in 0..n {
                for p in 0..oh * ow {
                    out[(ni * k + kk) * oh * ow + p] = out_mat[kk * n * oh * ow + ni * oh * ow + p] + bias[kk];
                }
            }
        }
        let rg = self.needs_grad(&[x, w, b]);
        self.push(Tensor::new(&[n, k, oh, ow], out), rg, Op::Conv2d { x, w, b, stride })
    }

    /// Train mode normalizes by batch statistics (biased variance) and updates
    /// `state` with momentum; eval mode normalizes by `state`.
    pub fn batchnorm2d(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        state: &mut BnState<T>,
        momentum: T,
        eps: T,
        mode: Mode,
    ) -> NodeId {
        let (n, c, h, w) = self.nodes[x].value.dims4();
        assert_eq!(self.nodes[gamma].value.shape(), &[c], "batchnorm2d: gamma extent mismatch");
        assert_eq!(self.nodes[beta].value.shape(), &[c], "batchnorm2d: beta extent mismatch");
        assert_eq!(state.mean.len(), c, "batchnorm2d: state extent mismatch");
        let m = n * h * w;
        let (mean, var) = match mode {
            Mode::Train => {
                assert!(m >= 2, "batchnorm2d: degenerate batch in train mode (N*H*W = {m})");
                let mut mean = vec![T::zero(); c];
                let mut var = vec![T::zero(); c];
                let xs = self.nodes[x].value.data();
                for ci in 0..c {
                    let mut acc = T::zero();
                    for ni in 0..n {
                        let base = (ni * c + ci) * h * w;
                        for p in 0..h * w {
                            acc += xs[base + p];
                        }
                    }
                    mean[ci] = acc / T::c(m as f64);
                }
                for ci in 0..c {
                    let mut acc = T::zero();
                    for ni in 0..n {
                        let base = (ni * c + ci) * h * w;
                        for p in 0..h * w {
                            let d = xs[base + p] - mean[ci];
                            acc += d * d;
                        }
                    }
                    var[ci] = acc / T::c(m as f64);
                }
                let keep = T::one() - momentum;
                for ci in 0..c {
                    state.mean[ci] = keep * state.mean[ci] + momentum * mean[ci];
                    state.var[ci] = keep * state.var[ci] + momentum * var[ci];
                }
                (mean, var)
            }
            Mode::Eval => (state.mean.clone(), state.var.clone()),
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let xs = self.nodes[x].value.data();
        let g = self.nodes[gamma].value.data();
        let bt = self.nodes[beta].value.data();
        let mut out = vec![T::zero(); n * c * h * w];
        for ni in 0..n {
            for ci in 0..c {
                let base = (ni * c + ci) * h * w;
                for p in 0..h * w {
                    out[base + p] = g[ci] * (xs[base + p] - mean[ci]) * inv_std[ci] + bt[ci];
                }
            }
        }
        let rg = self.needs_grad(&[x, gamma, beta]);
        self.push(
            Tensor::new(&[n, c, h, w], out),
            rg,
            Op::BatchNorm2d { x, gamma, beta, mean, inv_std, mode },
        )
    }

    /// out = x if x >= 0 else slope * x
    pub fn leaky_relu(&mut self, x: NodeId, slope: T) -> NodeId {
        let v = &self.nodes[x].value;
        let out: Vec<T> = v.data().iter().map(|&a| if a >= T::zero() { a } else { slope * a }).collect();
        let shape = v.shape().to_vec();
        let rg = self.nodes[x].requires_grad;
        self.push(Tensor::new(&shape, out), rg, Op::LeakyRelu { x, slope })
    }

    /// Mean over the spatial extents per channel: [N,C,H,W] -> [N,C].
    pub fn global_avg_pool(&mut self, x: NodeId) -> NodeId {
        let (n, c, h, w) = self.nodes[x].value.dims4();
        let xs = self.nodes[x].value.data();
        let mut out = vec![T::zero(); n * c];
        let inv = T::one() / T::c((h * w) as f64);
        for nc in 0..n * c {
            let base = nc * h * w;
            let mut acc = T::zero();
            for p in 0..h * w {
                acc += xs[base + p];
            }
            out[nc] = acc * inv;
        }
        let rg = self.nodes[x].requires_grad;
        self.push(Tensor::new(&[n, c], out), rg, Op::GlobalAvgPool { x })
    }

    /// Mean over the batch of -log softmax(logits)[target], max-stabilized.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, targets: &[usize]) -> NodeId {
        let (n, k) = self.nodes[logits].value.dims2();
        assert_eq!(targets.len(), n, "softmax_cross_entropy: target count mismatch");
        for &t in targets {
            assert!(t < k, "softmax_cross_entropy: target {t} out of range for {k} classes");
        }
        let (probs, loss) = softmax_ce_forward(self.nodes[logits].value.data(), n, k, targets);
        let rg = self.nodes[logits].requires_grad;
        self.push(
            Tensor::scalar(loss),
            rg,
            Op::SoftmaxCrossEntropy { logits, targets: targets.to_vec(), probs },
        )
    }

    /// Soft-target cross-entropy at temperature `t`: mean over rows of
    /// -sum_k q[k] * log softmax(logits/t)[k]. `soft_targets` are constants.
    pub fn distill_cross_entropy(&mut self, logits: NodeId, soft_targets: &Tensor<T>, t: T) -> NodeId {
        let (n, k) = self.nodes[logits].value.dims2();
        assert_eq!(soft_targets.shape(), &[n, k], "distill_cross_entropy: target shape mismatch");
        assert!(t > T::zero(), "distill_cross_entropy: temperature must be positive");
        let zs = self.nodes[logits].value.data();
        let q = soft_targets.data();
        let mut probs = vec![T::zero(); n * k];
        let mut loss = T::zero();
        for i in 0..n {
            let row = &zs[i * k..(i + 1) * k];
            let max = row.iter().map(|&z| z / t).fold(T::neg_infinity(), T::max);
            let mut sum = T::zero();
            for j in 0..k {
                let e = (row[j] / t - max).exp();
                probs[i * k + j] = e;
                sum += e;
            }
            let lse = sum.ln() + max;
            for j in 0..k {
                probs[i * k + j] /= sum;
                loss += q[i * k + j] * (lse - row[j] / t);
            }
        }
        loss /= T::c(n as f64);
        let rg = self.nodes[logits].requires_grad;
        self.push(
            Tensor::scalar(loss),
            rg,
            Op::DistillCrossEntropy { logits, soft_targets: q.to_vec(), temperature: t, probs },
        )
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.nodes[a].value.shape(), self.nodes[b].value.shape(), "add: shape mismatch");
        let out: Vec<T> = self.nodes[a]
            .value
            .data()
            .iter()
            .zip(self.nodes[b].value.data())
            .map(|(&x, &y)| x + y)
            .collect();
        let shape = self.nodes[a].value.shape().to_vec();
        let rg = self.needs_grad(&[a, b]);
        self.push(Tensor::new(&shape, out), rg, Op::Add { a, b })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.nodes[a].value.shape(), self.nodes[b].value.shape(), "mul: shape mismatch");
        let out: Vec<T> = self.nodes[a]
            .value
            .data()
            .iter()
            .zip(self.nodes[b].value.data())
            .map(|(&x, &y)| x * y)
            .collect();
        let shape = self.nodes[a].value.shape().to_vec();
        let rg = self.needs_grad(&[a, b]);
        self.push(Tensor::new(&shape, out), rg, Op::Mul { a, b })
    }

    pub fn scale(&mut self, x: NodeId, c: T) -> NodeId {
        let out: Vec<T> = self.nodes[x].value.data().iter().map(|&v| c * v).collect();
        let shape = self.nodes[x].value.shape().to_vec();
        let rg = self.nodes[x].requires_grad;
        self.push(Tensor::new(&shape, out), rg, Op::Scale { x, c })
    }

    /// First `count` columns of a rank-2 tensor.
    pub fn take_cols(&mut self, x: NodeId, count: usize) -> NodeId {
        let (n, k) = self.nodes[x].value.dims2();
        assert!(count >= 1 && count <= k, "take_cols: count {count} out of range for {k} columns");
        let xs = self.nodes[x].value.data();
        let mut out = vec![T::zero(); n * count];
        for i in 0..n {
            out[i * count..(i + 1) * count].copy_from_slice(&xs[i * k..i * k + count]);
        }
        let rg = self.nodes[x].requires_grad;
        self.push(Tensor::new(&[n, count], out), rg, Op::TakeCols { x, count })
    }

    /// Gather the given rows of a rank-2 tensor.
    pub fn select_rows(&mut self, x: NodeId, rows: &[usize]) -> NodeId {
        let (n, k) = self.nodes[x].value.dims2();
        assert!(!rows.is_empty(), "select_rows: empty row set");
        for &r in rows {
            assert!(r < n, "select_rows: row {r} out of range for {n} rows");
        }
        let xs = self.nodes[x].value.data();
        let mut out = vec![T::zero(); rows.len() * k];
        for (i, &r) in rows.iter().enumerate() {
            out[i * k..(i + 1) * k].copy_from_slice(&xs[r * k..(r + 1) * k]);
        }
        let rg = self.nodes[x].requires_grad;
        self.push(Tensor::new(&[rows.len(), k], out), rg, Op::SelectRows { x, rows: rows.to_vec() })
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let mut acc = T::zero();
        for &v in self.nodes[x].value.data() {
            acc += v;
        }
        let rg = self.nodes[x].requires_grad;
        self.push(Tensor::scalar(acc), rg, Op::Sum { x })
    }

    /// Single element at flat `index`, as a scalar node.
    pub fn pick(&mut self, x: NodeId, index: usize) -> NodeId {
        let v = self.nodes[x].value.data();
        assert!(index < v.len(), "pick: index {index} out of range");
        let rg = self.nodes[x].requires_grad;
        self.push(Tensor::scalar(v[index]), rg, Op::Pick { x, index })
    }

    fn add_grad(&mut self, id: NodeId, delta: &[T]) {
        let node = &mut self.nodes[id];
        debug_assert_eq!(delta.len(), node.value.len());
        match &mut node.grad {
            Some(g) => {
                for (gi, &d) in g.iter_mut().zip(delta) {
                    *gi += d;
                }
            }
            None => node.grad = Some(delta.to_vec()),
        }
    }

    /// Reverse pass from a scalar loss. Populates node gradients and
    /// accumulates into every reachable parameter; parameter gradients keep
    /// accumulating across backward calls until explicitly zeroed.
    pub fn backward(&mut self, loss: NodeId) {
        assert!(!self.consumed, "re-entrant backward on a consumed graph");
        assert!(!self.nodes.is_empty(), "backward on an empty graph");
        assert_eq!(self.nodes[loss].value.len(), 1, "backward requires a scalar loss");
        self.consumed = true;
        self.nodes[loss].grad = Some(vec![T::one()]);
        for id in (0..=loss).rev() {
            if self.nodes[id].grad.is_none() || !self.nodes[id].requires_grad {
                continue;
            }
            let op = std::mem::replace(&mut self.nodes[id].op, Op::Const);
            let gout = self.nodes[id].grad.take().expect("grad present");
            self.backward_op(&op, &gout);
            self.nodes[id].grad = Some(gout);
            self.nodes[id].op = op;
        }
    }

    fn backward_op(&mut self, op: &Op<T>, gout: &[T]) {
        match op {
            Op::Const => {}
            Op::Param(p) => {
                let mut p = p.borrow_mut();
                assert_eq!(p.grad.len(), gout.len(), "parameter grad buffer shape drift");
                for (g, &d) in p.grad.iter_mut().zip(gout) {
                    *g += d;
                }
            }
            Op::Linear { x, w, b } => {
                let (n, d) = self.nodes[*x].value.dims2();
                let (_, k) = self.nodes[*w].value.dims2();
                if self.nodes[*x].requires_grad {
                    // dx = gout . w^T
                    let wt = transpose(self.nodes[*w].value.data(), d, k);
                    let dx = matmul(gout, &wt, n, k, d);
                    self.add_grad(*x, &dx);
                }
                if self.nodes[*w].requires_grad {
                    // dw = x^T . gout
                    let xt = transpose(self.nodes[*x].value.data(), n, d);
                    let dw = matmul(&xt, gout, d, n, k);
                    self.add_grad(*w, &dw);
                }
                if self.nodes[*b].requires_grad {
                    let mut db = vec![T::zero(); k];
                    for i in 0..n {
                        for j in 0..k {
                            db[j] += gout[i * k + j];
                        }
                    }
                    self.add_grad(*b, &db);
                }
            }
            Op::Conv2d { x, w, b, stride } => {
                let (n, c, h, wd) = self.nodes[*x].value.dims4();
                let (k, _, _, _) = self.nodes[*w].value.dims4();
                let oh = (h + 2 - 3) / stride + 1;
                let ow = (wd + 2 - 3) / stride + 1;
                // gout as [K, N*OH*OW]
                let mut gmat = vec![T::zero(); k * n * oh * ow];
                for ni in 0..n {
                    for kk in 0..k {
                        for p in 0..oh * ow {
                            gmat[kk * n * oh * ow + ni * oh * ow + p] = gout[(ni * k + kk) * oh * ow + p];
                        }
                    }
                }
                if self.nodes[*w].requires_grad {
                    let cols = im2col(self.nodes[*x].value.data(), n, c, h, wd, oh, ow, *stride);
                    let colst = transpose(&cols, c * 9, n * oh * ow);
                    let dw = matmul(&gmat, &colst, k, n * oh * ow, c * 9);
                    self.add_grad(*w, &dw);
                }
                if self.nodes[*x].requires_grad {
                    let wt = transpose(self.nodes[*w].value.data(), k, c * 9);
                    let dcols = matmul(&wt, &gmat, c * 9, k, n * oh * ow);
                    let dx = col2im(&dcols, n, c, h, wd, oh, ow, *stride);
                    self.add_grad(*x, &dx);
                }
                if self.nodes[*b].requires_grad {
                    let mut db = vec![T::zero(); k];
                    for kk in 0..k {
                        for p in 0..n * oh * ow {
                            db[kk] += gmat[kk * n * oh * ow + p];
                        }
                    }
                    self.add_grad(*b, &db);
                }
            }
            Op::BatchNorm2d { x, gamma, beta, mean, inv_std, mode } => {
                let (n, c, h, w) = self.nodes[*x].value.dims4();
                let m = n * h * w;
                let want_x = self.nodes[*x].requires_grad;
                let want_gamma = self.nodes[*gamma].requires_grad;
                let want_beta = self.nodes[*beta].requires_grad;
                let (dg, db, dx) = {
                    let xs = self.nodes[*x].value.data();
                    let g = self.nodes[*gamma].value.data();
                    // xhat recomputed from the saved statistics
                    let xhat = |ni: usize, ci: usize, p: usize| {
                        (xs[(ni * c + ci) * h * w + p] - mean[ci]) * inv_std[ci]
                    };
                    let mut dg = vec![T::zero(); c];
                    let mut db = vec![T::zero(); c];
                    for ni in 0..n {
                        for ci in 0..c {
                            let base = (ni * c + ci) * h * w;
                            for p in 0..h * w {
                                dg[ci] += gout[base + p] * xhat(ni, ci, p);
                                db[ci] += gout[base + p];
                            }
                        }
                    }
                    let mut dx = vec![T::zero(); if want_x { n * c * h * w } else { 0 }];
                    if want_x {
                        match mode {
                            Mode::Eval => {
                                // running statistics are constants
                                for ni in 0..n {
                                    for ci in 0..c {
                                        let base = (ni * c + ci) * h * w;
                                        for p in 0..h * w {
                                            dx[base + p] = gout[base + p] * g[ci] * inv_std[ci];
                                        }
                                    }
                                }
                            }
                            Mode::Train => {
                                // dx = inv_std/m * (m*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
                                let mf = T::c(m as f64);
                                for ci in 0..c {
                                    let mut sum_dxh = T::zero();
                                    let mut sum_dxh_xh = T::zero();
                                    for ni in 0..n {
                                        let base = (ni * c + ci) * h * w;
                                        for p in 0..h * w {
                                            let dxh = gout[base + p] * g[ci];
                                            sum_dxh += dxh;
                                            sum_dxh_xh += dxh * xhat(ni, ci, p);
                                        }
                                    }
                                    for ni in 0..n {
                                        let base = (ni * c + ci) * h * w;
                                        for p in 0..h * w {
                                            let dxh = gout[base + p] * g[ci];
                                            dx[base + p] = inv_std[ci] / mf
                                                * (mf * dxh - sum_dxh - xhat(ni, ci, p) * sum_dxh_xh);
                                        }
                                    }
                                }
                            }
                        }
                    }
                    (dg, db, dx)
                };
                if want_gamma {
                    self.add_grad(*gamma, &dg);
                }
                if want_beta {
                    self.add_grad(*beta, &db);
                }
                if want_x {
                    self.add_grad(*x, &dx);
                }
            }
            Op::LeakyRelu { x, slope } => {
                if self.nodes[*x].requires_grad {
                    let xs = self.nodes[*x].value.data();
                    let dx: Vec<T> = xs
                        .iter()
                        .zip(gout)
                        .map(|(&v, &go)| if v >= T::zero() { go } else { *slope * go })
                        .collect();
                    self.add_grad(*x, &dx);
                }
            }
            Op::GlobalAvgPool { x } => {
                if self.nodes[*x].requires_grad {
                    let (n, c, h, w) = self.nodes[*x].value.dims4();
                    let inv = T::one() / T::c((h * w) as f64);
                    let mut dx = vec![T::zero(); n * c * h * w];
                    for nc in 0..n * c {
                        let go = gout[nc] * inv;
                        for p in 0..h * w {
                            dx[nc * h * w + p] = go;
                        }
                    }
                    self.add_grad(*x, &dx);
                }
            }
            Op::SoftmaxCrossEntropy { logits, targets, probs } => {
                if self.nodes[*logits].requires_grad {
                    let (n, k) = self.nodes[*logits].value.dims2();
                    let scale = gout[0] / T::c(n as f64);
                    let mut dz = vec![T::zero(); n * k];
                    for i in 0..n {
                        for j in 0..k {
                            let indicator = if targets[i] == j { T::one() } else { T::zero() };
                            dz[i * k + j] = (probs[i * k + j] - indicator) * scale;
                        }
                    }
                    self.add_grad(*logits, &dz);
                }
            }
            Op::DistillCrossEntropy { logits, soft_targets, temperature, probs } => {
                if self.nodes[*logits].requires_grad {
                    let (n, k) = self.nodes[*logits].value.dims2();
                    let scale = gout[0] / (T::c(n as f64) * *temperature);
                    let dz: Vec<T> = probs
                        .iter()
                        .zip(soft_targets)
                        .map(|(&p, &q)| (p - q) * scale)
                        .collect();
                    debug_assert_eq!(dz.len(), n * k);
                    self.add_grad(*logits, &dz);
                }
            }
            Op::Add { a, b } => {
                if self.nodes[*a].requires_grad {
                    self.add_grad(*a, gout);
                }
                if self.nodes[*b].requires_grad {
                    self.add_grad(*b, gout);
                }
            }
            Op::Mul { a, b } => {
                if self.nodes[*a].requires_grad {
                    let da: Vec<T> =
                        gout.iter().zip(self.nodes[*b].value.data()).map(|(&g, &v)| g * v).collect();
                    self.add_grad(*a, &da);
                }
                if self.nodes[*b].requires_grad {
                    let db: Vec<T> =
                        gout.iter().zip(self.nodes[*a].value.data()).map(|(&g, &v)| g * v).collect();
                    self.add_grad(*b, &db);
                }
            }
            Op::Scale { x, c } => {
                if self.nodes[*x].requires_grad {
                    let dx: Vec<T> = gout.iter().map(|&g| g * *c).collect();
                    self.add_grad(*x, &dx);
                }
            }
            Op::TakeCols { x, count } => {
                if self.nodes[*x].requires_grad {
                    let (n, k) = self.nodes[*x].value.dims2();
                    let mut dx = vec![T::zero(); n * k];
                    for i in 0..n {
                        dx[i * k..i * k + count].copy_from_slice(&gout[i * count..(i + 1) * count]);
                    }
                    self.add_grad(*x, &dx);
                }
            }
            Op::SelectRows { x, rows } => {
                if self.nodes[*x].requires_grad {
                    let (n, k) = self.nodes[*x].value.dims2();
                    let mut dx = vec![T::zero(); n * k];
                    for (i, &r) in rows.iter().enumerate() {
                        for j in 0..k {
                            dx[r * k + j] += gout[i * k + j];
                        }
                    }
                    self.add_grad(*x, &dx);
                }
            }
            Op::Sum { x } => {
                if self.nodes[*x].requires_grad {
                    let dx = vec![gout[0]; self.nodes[*x].value.len()];
                    self.add_grad(*x, &dx);
                }
            }
            Op::Pick { x, index } => {
                if self.nodes[*x].requires_grad {
                    let mut dx = vec![T::zero(); self.nodes[*x].value.len()];
                    dx[*index] = gout[0];
                    self.add_grad(*x, &dx);
                }
            }
        }
    }
}

fn softmax_ce_forward<T: Real>(zs: &[T], n: usize, k: usize, targets: &[usize]) -> (Vec<T>, T) {
    let mut probs = vec![T::zero(); n * k];
    let mut loss = T::zero();
    for i in 0..n {
        let row = &zs[i * k..(i + 1) * k];
        let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for j in 0..k {
            let e = (row[j] - max).exp();
            probs[i * k + j] = e;
            sum += e;
        }
        let lse = sum.ln() + max;
        loss += lse - row[targets[i]];
        for j in 0..k {
            probs[i * k + j] /= sum;
        }
    }
    (probs, loss / T::c(n as f64))
}

/// Patch matrix for a 3x3 kernel with zero padding 1:
/// cols[(c*9 + kr*3 + kc), n*OH*OW + oh*OW + ow] = x[n, c, oh*s + kr - 1, ow*s + kc - 1]
fn im2col<T: Real>(
    x: &[T],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
    stride: usize,
) -> Vec<T> {
    let span = n * oh * ow;
    let mut cols = vec![T::zero(); c * 9 * span];
    for ci in 0..c {
        for kr in 0..3 {
            for kc in 0..3 {
                let row_base = (ci * 9 + kr * 3 + kc) * span;
                for ni in 0..n {
                    let x_base = (ni * c + ci) * h * w;
                    for ohi in 0..oh {
                        let ih = (ohi * stride + kr) as isize - 1;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let col_base = row_base + ni * oh * ow + ohi * ow;
                        let x_row = x_base + ih as usize * w;
                        for owi in 0..ow {
                            let iw = (owi * stride + kc) as isize - 1;
                            if iw < 0 || iw >= w as isize {
                                continue;
                            }
                            cols[col_base + owi] = x[x_row + iw as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-add patch gradients back onto the input.
fn col2im<T: Real>(
    dcols: &[T],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
    stride: usize,
) -> Vec<T> {
    let span = n * oh * ow;
    let mut dx = vec![T::zero(); n * c * h * w];
    for ci in 0..c {
        for kr in 0..3 {
            for kc in 0..3 {
                let row_base = (ci * 9 + kr * 3 + kc) * span;
                for ni in 0..n {
                    let x_base = (ni * c + ci) * h * w;
                    for ohi in 0..oh {
                        let ih = (ohi * stride + kr) as isize - 1;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let col_base = row_base + ni * oh * ow + ohi * ow;
                        let x_row = x_base + ih as usize * w;
                        for owi in 0..ow {
                            let iw = (owi * stride + kc) as isize - 1;
                            if iw < 0 || iw >= w as isize {
                                continue;
                            }
                            dx[x_row + iw as usize] += dcols[col_base + owi];
                        }
                    }
                }
            }
        }
    }
    dx
}
