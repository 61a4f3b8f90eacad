//! B-spline basis functions over a knot sequence.

use crate::error::{Error, Result};

/// Spline order and knot spacing for anchor interpolation. Knots sit on the
/// anchor timestamps `t_i = i * interval` (uniform, unbounded both ways).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BSplineConfig {
    /// Order `k`; the curve is a piecewise polynomial of degree `k - 1`.
    pub order: usize,
    pub interval: f64,
}

impl BSplineConfig {
    pub fn new(order: usize, interval: f64) -> Result<Self> {
        if order < 2 {
            return Err(Error::config(format!("spline order {order} must be at least 2")));
        }
        if !(interval > 0.0) {
            return Err(Error::config(format!("knot interval {interval} must be positive")));
        }
        Ok(BSplineConfig { order, interval })
    }

    pub fn knot(&self, i: i64) -> f64 {
        i as f64 * self.interval
    }
}

/// `omega_{i,k}(t) = (t - t_i) / (t_{i+k} - t_i)`, zero on degenerate spacing.
fn omega(i: i64, k: usize, t: f64, knots: &dyn Fn(i64) -> f64) -> f64 {
    let ti = knots(i);
    let tik = knots(i + k as i64);
    if tik != ti {
        (t - ti) / (tik - ti)
    } else {
        0.0
    }
}

/// `B_{i,k}(t)` by the Cox-de Boor recursion.
///
/// Order 1 is the half-open indicator of `[t_i, t_{i+1})`; higher orders
/// blend neighbors: `B_{i,k+1} = omega_{i,k} B_{i,k} + (1 - omega_{i+1,k}) B_{i+1,k}`.
/// Support is exactly `[t_i, t_{i+k})`.
pub fn bspline_basis(i: i64, k: usize, t: f64, knots: &dyn Fn(i64) -> f64) -> f64 {
    if k == 1 {
        return if knots(i) <= t && t < knots(i + 1) { 1.0 } else { 0.0 };
    }
    let left = omega(i, k - 1, t, knots);
    let right = 1.0 - omega(i + 1, k - 1, t, knots);
    let mut acc = 0.0;
    if left != 0.0 {
        acc += left * bspline_basis(i, k - 1, t, knots);
    }
    if right != 0.0 {
        acc += right * bspline_basis(i + 1, k - 1, t, knots);
    }
    acc
}

/// Index of the interval containing `t`: `t_l <= t < t_{l+1}`.
pub fn locate_interval(t: f64, interval: f64) -> Result<i64> {
    if !t.is_finite() {
        return Err(Error::domain(format!("cannot locate interval of non-finite t = {t}")));
    }
    Ok((t / interval).floor() as i64)
}

/// Nonzero blend weights at time `t`: `(anchor index, weight)` pairs.
///
/// The basis attached to anchor `a_i` is centered on `t_i` (index offset
/// `floor(k/2)`), which makes order 2 coincide with linear interpolation
/// between the bracketing anchors and keeps higher orders symmetric around
/// the query time.
pub fn blend_weights(cfg: &BSplineConfig, t: f64) -> Result<Vec<(i64, f64)>> {
    let l = locate_interval(t, cfg.interval)?;
    let k = cfg.order as i64;
    let shift = k / 2;
    let knots = |i: i64| cfg.knot(i);
    let mut out = Vec::with_capacity(cfg.order);
    for j in (l - k + 1)..=l {
        let w = bspline_basis(j, cfg.order, t, &knots);
        out.push((j + shift, w));
    }
    Ok(out)
}
