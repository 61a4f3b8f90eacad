//! Central finite differences, the independent gradient oracle.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Central-difference gradient of a scalar function at `x`.
///
/// `(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)` per coordinate. The closure
/// is evaluated `2 * numel` times; any non-finite evaluation aborts.
pub fn finite_diff_gradient<F>(mut f: F, x: &Tensor, eps: f64) -> Result<Tensor>
where
    F: FnMut(&Tensor) -> Result<f64>,
{
    if !(eps > 0.0) {
        return Err(Error::config(format!("finite difference eps {eps} must be positive")));
    }
    let mut grad = vec![0.0; x.numel()];
    let mut probe = x.clone();
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let fp = f(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let fm = f(&probe)?;
        probe.data_mut()[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::numerics(format!(
                "non-finite evaluation during finite differences at coordinate {i}: {fp}, {fm}"
            )));
        }
        grad[i] = (fp - fm) / (2.0 * eps);
    }
    Tensor::new(x.shape().to_vec(), grad)
}

/// Norm-wise relative error between two gradients.
pub fn relative_error(a: &Tensor, b: &Tensor) -> f64 {
    let diff: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale = a.l2_norm().max(b.l2_norm()).max(1e-12);
    diff / scale
}
