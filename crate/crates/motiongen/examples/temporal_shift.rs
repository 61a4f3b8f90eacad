//! Temporal channel shift: which channels of each frame come from where.

use motiongen::numerics::Tensor;
use motiongen::temporal::{tsm_shift, FrameStack};

fn main() {
    // Encode provenance: frame index + 1 in the integer part, channel in
    // the fraction, so routing is visible by eye and 0.0 marks the zero
    // boundary.
    let (n_t, c) = (3usize, 8usize);
    let mut data = Vec::new();
    for t in 0..n_t {
        for ch in 0..c {
            data.push((t + 1) as f64 + ch as f64 / 10.0);
        }
    }
    let stack = FrameStack::new(
        Tensor::new(vec![n_t, c, 1, 1], data).unwrap(),
        vec![0.0, 1.0, 2.0],
    )
    .unwrap();

    let shifted = tsm_shift(&stack).unwrap();
    println!("value f.c means: came from frame f-1, channel c (0.0 = zero boundary)");
    for t in 0..n_t {
        let row: Vec<String> = (0..c)
            .map(|ch| format!("{:.1}", shifted.frames.data()[t * c + ch]))
            .collect();
        println!("  out frame {t}: [{}]", row.join(", "));
    }
    println!("each interior frame borrows 2*C/8 = {} of its {c} channels from neighbors", c / 4);
}
