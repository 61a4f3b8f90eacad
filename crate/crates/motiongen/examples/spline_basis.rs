//! B-spline basis functions on uniform knots: partition of unity, local
//! support, and the order-2 = linear-interpolation identity.

use motiongen::motion::{blend_weights, bspline_basis, BSplineConfig};
use motiongen::numerics::RngKey;

fn main() {
    let knots = |i: i64| i as f64;

    println!("B_(0,k)(t) on knots 0,1,2,3,...");
    for k in 1..=4usize {
        let row: Vec<String> = (0..=12)
            .map(|j| format!("{:.3}", bspline_basis(0, k, j as f64 * 0.25, &knots)))
            .collect();
        println!("  k={k}: [{}]", row.join(", "));
    }

    let cfg = BSplineConfig::new(3, 64.0).unwrap();
    let key = RngKey::new(7, "t", 0);
    let mut worst: f64 = 0.0;
    for s in 0..10_000 {
        let t = (key.uniform(s) - 0.25) * 20.0 * cfg.interval;
        let sum: f64 = blend_weights(&cfg, t).unwrap().iter().map(|(_, w)| w).sum();
        worst = worst.max((sum - 1.0).abs());
    }
    println!("partition of unity over 10k random times: worst |sum - 1| = {worst:.2e}");

    // Order 2 reproduces linear interpolation between the bracketing anchors.
    let cfg2 = BSplineConfig::new(2, 64.0).unwrap();
    let t = 80.0;
    let w = blend_weights(&cfg2, t).unwrap();
    println!("order-2 weights at t = {t}: {w:?} (anchors 1 and 2, 0.75/0.25)");
}
