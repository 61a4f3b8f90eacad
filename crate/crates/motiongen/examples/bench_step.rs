//! Quick training-throughput probe: a few steps of the default video stage.

use std::time::Instant;

use motiongen::pipeline::{TrainConfig, Trainer};

fn main() {
    let cfg = TrainConfig::desk_video(1);
    let mut t = Trainer::new(cfg, "video").unwrap();
    let start = Instant::now();
    for _ in 0..8 {
        let s = t.step().unwrap();
        println!("step {}: loss_g {:.3} loss_d {:.3} r1 {:.3}", s.step, s.loss_g, s.loss_d, s.r1);
    }
    let dt = start.elapsed().as_secs_f64() / 8.0;
    println!("avg step: {dt:.3}s -> 2000 steps ~ {:.1} min", dt * 2000.0 / 60.0);
}
