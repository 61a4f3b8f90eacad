//! Low-rank temporal modulation: the motion-path weight is rank-bounded by
//! construction, and a rank-C_out factorization reproduces the full path.

use motiongen::modulation::{modulated_weight, ModLayerConfig, ModLayerWeights};
use motiongen::numerics::linalg::singular_values;
use motiongen::numerics::{RngKey, Tape, Tensor};

fn main() {
    let (c_in, c_out) = (8usize, 6usize);
    for r in [1usize, 2, 4] {
        let cfg = ModLayerConfig::lowrank(c_in, c_out, 4, 4, Some(r));
        let layer = ModLayerWeights::init(cfg, r as u64, "demo").unwrap();
        let m = layer.motion_weight_matrix().unwrap();
        let sv = singular_values(c_out, c_in * 9, m.data()).unwrap();
        println!(
            "rank {r}: sigma_1 = {:.4}, sigma_{} = {:.2e} (ratio {:.1e})",
            sv[0],
            r + 1,
            sv[r],
            sv[r] / sv[0]
        );
    }

    // Style scaling invariance under demodulation.
    let cfg = ModLayerConfig::full(8, 8, 4, 4);
    let layer = ModLayerWeights::init(cfg, 3, "full").unwrap();
    let mut tape = Tape::new();
    let nodes = layer.constants(&mut tape);
    let u = tape.constant(Tensor::from_vec(RngKey::new(1, "u", 0).normal_vec(4)));
    let v = tape.constant(Tensor::from_vec(RngKey::new(1, "v", 0).normal_vec(4)));
    let w = modulated_weight(&mut tape, &nodes, u, v).unwrap();
    let filter_norms: Vec<f64> = (0..8)
        .map(|o| {
            tape.value(w).data()[o * 8 * 9..(o + 1) * 8 * 9]
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    println!("demodulated filter norms (all ~1): {filter_norms:.3?}");
}
