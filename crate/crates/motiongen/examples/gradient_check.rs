//! The finite-difference oracle against reverse-mode gradients on a small
//! composite network, including the second-order path used by R1.

use motiongen::numerics::{finite_diff_gradient, relative_error, RngKey, Tape, Tensor};
use motiongen::pipeline::r1_penalty;

fn main() {
    // loss(x) = sum(softplus(W2 * lrelu(W1 x)))^2-ish composite
    let w1 = Tensor::new(vec![5, 4], RngKey::new(1, "w1", 0).normal_vec(20)).unwrap();
    let w2 = Tensor::new(vec![3, 5], RngKey::new(1, "w2", 0).normal_vec(15)).unwrap();
    let x0 = Tensor::from_vec(RngKey::new(1, "x", 0).normal_vec(4));

    let eval = |x: &Tensor| -> motiongen::Result<f64> {
        let mut tape = Tape::new();
        let xl = tape.leaf(x.clone().with_grad());
        let w1n = tape.constant(w1.clone());
        let w2n = tape.constant(w2.clone());
        let xc = tape.reshape(xl, vec![4, 1])?;
        let h = tape.matmul(w1n, xc)?;
        let h = tape.leaky_relu(h, 0.2);
        let y = tape.matmul(w2n, h)?;
        let y = tape.softplus(y);
        let loss = tape.sum_squares(y);
        tape.value(loss).item()
    };

    let fd = finite_diff_gradient(eval, &x0, 1e-3).unwrap();

    let mut tape = Tape::new();
    let xl = tape.leaf(x0.clone().with_grad());
    let w1n = tape.constant(w1.clone());
    let w2n = tape.constant(w2.clone());
    let xc = tape.reshape(xl, vec![4, 1]).unwrap();
    let h = tape.matmul(w1n, xc).unwrap();
    let h = tape.leaky_relu(h, 0.2);
    let y = tape.matmul(w2n, h).unwrap();
    let y = tape.softplus(y);
    let loss = tape.sum_squares(y);
    let grads = tape.backward(loss).unwrap();
    let ad = grads.tensor(&tape, xl);

    println!("reverse-mode: {:?}", ad.data());
    println!("finite diff : {:?}", fd.data());
    println!("relative error: {:.2e}", relative_error(&ad, &fd));

    // Second order: gradient of an R1-style penalty.
    let mut tape = Tape::new();
    let w = tape.leaf(Tensor::from_vec(vec![0.4, -0.7, 1.1]).with_grad());
    let x = tape.leaf(Tensor::from_vec(vec![2.0, 0.5, -1.0]).with_grad());
    let prod = tape.mul(w, x).unwrap();
    let logit = tape.sum(prod);
    let pen = r1_penalty(&mut tape, logit, &[x], 2.0).unwrap();
    let g = tape.backward_wrt(pen, &[w]).unwrap();
    println!(
        "d/dw of R1 penalty for D(x) = w.x: {:?} (analytic: gamma * w = [0.8, -1.4, 2.2])",
        g.tensor(&tape, w).data()
    );
}
