//! Generate frames a million timesteps out: the anchor track extends
//! lazily, so far-future frames cost the same as early ones and only a
//! handful of anchor features ever materialize.

use motiongen::motion::MotionMode;
use motiongen::numerics::RngKey;
use motiongen::pipeline::{generate_frames, write_ppm, GeneratorConfig, GeneratorWeights};

fn main() {
    let mut cfg = GeneratorConfig::default();
    cfg.motion.mode = MotionMode::BSpline;
    let weights = GeneratorWeights::init(cfg, 42).unwrap();
    let u = RngKey::new(9, "content", 0).normal_vec(weights.cfg.dim_u);

    let out = std::env::temp_dir().join("motiongen_long");
    std::fs::create_dir_all(&out).unwrap();

    for t0 in [0.0, 1.0e6] {
        let ts: Vec<f64> = (0..16).map(|i| t0 + i as f64).collect();
        let start = std::time::Instant::now();
        let (frames, anchors) = generate_frames(&weights, &u, &ts).unwrap();
        let dt = start.elapsed().as_secs_f64();
        for (i, f) in frames.iter().enumerate() {
            write_ppm(&out.join(format!("t{}_{i:02}.ppm", t0 as u64)), f).unwrap();
        }
        println!("t0 = {t0:>9}: 16 frames in {dt:.2}s, {anchors} anchor features materialized");
    }
    println!("frames under {}", out.display());
}
