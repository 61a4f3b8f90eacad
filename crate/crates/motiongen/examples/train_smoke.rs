//! Short end-to-end training run writing the standard run directory
//! (manifest.json, losses.csv, checkpoints, metrics.json).

use motiongen::pipeline::{train_stage, TrainConfig};

fn main() {
    let mut cfg = TrainConfig::desk_video(7);
    cfg.steps = 60;
    cfg.eval.n_clips = 64;

    let out = std::env::temp_dir().join("motiongen_train_smoke");
    let _ = std::fs::remove_dir_all(&out);
    let outcome = train_stage(&cfg, "video", &out, None, None).unwrap();

    println!("run directory: {}", outcome.run_dir.display());
    println!("final checkpoint: {}", outcome.final_ckpt.display());
    if let (Some(a), Some(b)) = (outcome.initial_fvd16, outcome.final_fvd16) {
        println!("fvd16 proxy {a:.1} -> {b:.1} (random embedder; within-run ordering only)");
    }
    let losses = std::fs::read_to_string(out.join("losses.csv")).unwrap();
    for line in losses.lines().take(4) {
        println!("  {line}");
    }
}
