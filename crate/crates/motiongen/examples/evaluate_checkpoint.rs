//! Evaluate a freshly trained checkpoint: FVD proxies, anchor-window
//! comparison, jitter, and the sticking autocorrelation.

use motiongen::numerics::{io, ParamStore};
use motiongen::pipeline::{train_stage, EvalContext, GeneratorWeights, MetricSet, TrainConfig};

fn main() {
    let mut cfg = TrainConfig::desk_video(3);
    cfg.steps = 40;
    cfg.eval.n_clips = 0;

    let out = std::env::temp_dir().join("motiongen_eval_demo");
    let _ = std::fs::remove_dir_all(&out);
    let outcome = train_stage(&cfg, "video", &out, None, None).unwrap();
    println!("trained {} steps -> {}", cfg.steps, outcome.final_ckpt.display());

    // Reload the generator half of the checkpoint.
    let init = GeneratorWeights::init(cfg.gen.clone(), 0).unwrap();
    let mut store = ParamStore::new();
    init.register(&mut store);
    for name in io::checkpoint_names(&outcome.final_ckpt).unwrap() {
        if name.starts_with("gen.") {
            let t = io::load_tensor(&outcome.final_ckpt, &name).unwrap();
            store.set(&name, t).unwrap();
        }
    }
    let gen = GeneratorWeights::from_store(cfg.gen.clone(), &store).unwrap();

    let ctx = EvalContext::new(&gen, &cfg.data, cfg.eval.seed, 64).unwrap();
    let snap = ctx.snapshot(cfg.steps, MetricSet::All).unwrap();
    println!("{}", serde_json::to_string_pretty(&snap).unwrap());
    println!("(random-embedder proxies: compare within a run, not across tools)");
}
