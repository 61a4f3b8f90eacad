//! Export motion-embedding trajectories in both interpolation modes and
//! compare first-order continuity at anchor crossings.

use motiongen::motion::{continuity, MotionConfig, MotionEval, MotionMode, MotionWeights};

fn main() {
    let out = std::env::temp_dir().join("motiongen_trajectory");
    std::fs::create_dir_all(&out).unwrap();

    for mode in [MotionMode::Linear, MotionMode::BSpline] {
        let cfg = MotionConfig {
            seed: 11,
            code_dim: 16,
            interval: 64.0,
            order: 3,
            mode,
            hidden: 16,
        };
        let weights = MotionWeights::init(&cfg, 11, "motion").unwrap();
        let mut eval = MotionEval::new(&cfg, &weights);

        let step = 0.25;
        let grid: Vec<f64> = (0..=(256.0 / step) as usize).map(|i| i as f64 * step).collect();
        let traj = eval.trajectory(&grid).unwrap();
        let report = continuity::continuity_report(&traj, cfg.interval, step).unwrap();

        let tag = match mode {
            MotionMode::Linear => "linear",
            MotionMode::BSpline => "bspline",
        };
        traj.write_csv(&out.join(format!("trajectory_{tag}.csv"))).unwrap();
        report.write_json(&out.join(format!("continuity_{tag}.json"))).unwrap();

        println!("{tag}:");
        for c in &report.crossings {
            println!(
                "  anchor t={:>5.0}  slopes {:.3}/{:.3}  mismatch {:.4}  jitter {:.3}",
                c.t_anchor, c.left_slope_norm, c.right_slope_norm, c.mismatch, c.jitter
            );
        }
    }
    println!("CSV/JSON written under {}", out.display());
}
