//! Tour of the tensor engine: build a graph, run backward, and fit a tiny
//! softmax classifier with SGD.
//!
//! ```bash
//! cargo run --release --example autodiff_engine
//! ```

use dualinc::tensor::{sgd_step, Graph, Parameter, ParamGroup, Tensor};

fn main() {
    // forward pass records nodes; backward fills gradients
    let x = Parameter::new(Tensor::new(&[3], vec![1.0, 2.0, 3.0]));
    let mut g = Graph::new();
    let xn = g.param(&x);
    let sq = g.mul(xn, xn);
    let loss = g.sum(sq);
    println!("sum(x^2) at [1,2,3] = {}", g.value(loss).item());
    g.backward(loss);
    println!("d/dx sum(x^2)      = {:?} (expect [2,4,6])", x.borrow().grad);

    // gradients accumulate until zeroed
    let mut g = Graph::new();
    let xn = g.param(&x);
    let loss = g.sum(xn);
    g.backward(loss);
    println!("after a second backward of sum(x): {:?}", x.borrow().grad);
    x.borrow_mut().zero_grad();

    // fit w,b so that class = argmax(w^T p + b) separates two point clouds
    let points: Vec<[f32; 2]> = (0..40)
        .map(|i| {
            let t = i as f32 * 0.37;
            if i % 2 == 0 {
                [1.2 + t.sin() * 0.4, 0.8 + t.cos() * 0.4]
            } else {
                [-0.9 + t.cos() * 0.4, -1.1 + t.sin() * 0.4]
            }
        })
        .collect();
    let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
    let flat: Vec<f32> = points.iter().flatten().copied().collect();

    let w = Parameter::new(Tensor::zeros(&[2, 2]));
    let b = Parameter::new(Tensor::zeros(&[2]));
    let mut group = ParamGroup::new(vec![w.clone(), b.clone()], 0.5, 0.9, 0.0);
    for epoch in 0..30 {
        let mut g = Graph::new();
        let xs = g.constant(Tensor::new(&[40, 2], flat.clone()));
        let wn = g.param(&w);
        let bn = g.param(&b);
        let logits = g.linear(xs, wn, bn);
        let loss = g.softmax_cross_entropy(logits, &labels);
        g.backward(loss);
        sgd_step(&mut group);
        group.zero_grad();
        if epoch % 10 == 0 || epoch == 29 {
            println!("epoch {epoch:2}: cross-entropy = {:.5}", g.value(loss).item());
        }
    }
}
