//! File-oriented command line for the motiongen library: trajectory export,
//! continuity analysis, training, evaluation, and frame generation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use motiongen::error::{Error, Result};
use motiongen::metrics::MetricsSnapshot;
use motiongen::motion::{continuity, MotionConfig, MotionEval, MotionMode, MotionWeights};
use motiongen::numerics::{io as tio, ParamStore, RngKey};
use motiongen::pipeline::{
    self, final_checkpoint, generate_frames, write_ppm, EvalContext, GeneratorWeights, MetricSet,
    PipelineConfig, TrainConfig,
};

#[derive(Parser)]
#[command(name = "motiongen", version, about = "Continuous-time motion toolkit: export trajectories, train the toy video GAN, evaluate checkpoints, generate frames.")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Linear,
    Bspline,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Pretrain,
    Video,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricsArg {
    All,
    Fvd,
    Anchor,
    Jitter,
}

#[derive(Subcommand)]
enum Cmd {
    /// Export a motion-embedding trajectory CSV and its continuity report.
    Trajectory {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ModeArg::Linear)]
        mode: ModeArg,
        /// B-spline order (>= 2).
        #[arg(long, default_value_t = 3)]
        order: usize,
        /// Frames between anchors.
        #[arg(long, default_value_t = 64.0)]
        interval: f64,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long, default_value_t = 256.0)]
        t1: f64,
        /// Grid step; must divide the interval.
        #[arg(long, default_value_t = 0.25)]
        step: f64,
        /// Output directory for trajectory.csv and continuity.json.
        #[arg(long)]
        out: PathBuf,
        /// Embedding width (anchor code dimension).
        #[arg(long, default_value_t = 16)]
        code_dim: usize,
    },
    /// Train the adversarial pipeline from a config file or a preset.
    Train {
        /// Pipeline config JSON (see `PipelineConfig`).
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Ladder preset config-a .. config-f.
        #[arg(long)]
        preset: Option<String>,
        /// Seed for preset-built configs.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = StageArg::Both)]
        stage: StageArg,
    },
    /// Evaluate a checkpoint and write a metrics.json snapshot.
    Eval {
        /// Checkpoint directory (ckpt_<step> with config.json).
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricsArg::All)]
        metrics: MetricsArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate frames from a checkpoint, plus a sticking-probe timeline.
    Gen {
        #[arg(long)]
        ckpt: PathBuf,
        /// Seed for the content code.
        #[arg(long, default_value_t = 0)]
        u_seed: u64,
        /// First frame time; may be arbitrarily large.
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        /// Number of frames.
        #[arg(long, default_value_t = 16)]
        frames: usize,
        /// Time increment between consecutive frames, in frame units.
        #[arg(long, default_value_t = 1.0)]
        fps_units: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Json(_) => ExitCode::from(2),
                Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Trajectory { seed, mode, order, interval, t0, t1, step, out, code_dim } => {
            cmd_trajectory(seed, mode, order, interval, t0, t1, step, &out, code_dim)
        }
        Cmd::Train { config, preset, seed, out, stage } => cmd_train(config, preset, seed, &out, stage),
        Cmd::Eval { ckpt, metrics, out } => cmd_eval(&ckpt, metrics, &out),
        Cmd::Gen { ckpt, u_seed, t0, frames, fps_units, out_dir } => {
            cmd_gen(&ckpt, u_seed, t0, frames, fps_units, &out_dir)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_trajectory(
    seed: u64,
    mode: ModeArg,
    order: usize,
    interval: f64,
    t0: f64,
    t1: f64,
    step: f64,
    out: &Path,
    code_dim: usize,
) -> Result<()> {
    if t0 >= t1 {
        return Err(Error::config(format!("t0 {t0} must be below t1 {t1}")));
    }
    if !(step > 0.0) {
        return Err(Error::config("step must be positive".to_string()));
    }
    let cfg = MotionConfig {
        seed,
        code_dim,
        interval,
        order,
        mode: match mode {
            ModeArg::Linear => MotionMode::Linear,
            ModeArg::Bspline => MotionMode::BSpline,
        },
        hidden: code_dim,
    };
    cfg.spline()?;
    let weights = MotionWeights::init(&cfg, seed, "motion")?;
    let mut eval = MotionEval::new(&cfg, &weights);
    let n = ((t1 - t0) / step).round() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| t0 + i as f64 * step).collect();
    let traj = eval.trajectory(&grid)?;
    let report = continuity::continuity_report(&traj, interval, step)?;
    std::fs::create_dir_all(out)?;
    traj.write_csv(&out.join("trajectory.csv"))?;
    report.write_json(&out.join("continuity.json"))?;
    println!(
        "wrote {} rows; {} anchor crossings, max slope mismatch {:.3e}",
        traj.ts.len(),
        report.crossings.len(),
        report.max_mismatch()
    );
    Ok(())
}

fn load_pipeline_config(
    config: Option<PathBuf>,
    preset: Option<String>,
    seed: u64,
) -> Result<PipelineConfig> {
    let cfg = match (config, preset) {
        (Some(path), None) => {
            let bytes = std::fs::read(&path)
                .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_slice(&bytes)?
        }
        (None, Some(name)) => PipelineConfig::preset(&name, seed)?,
        (None, None) => return Err(Error::config("pass --config or --preset".to_string())),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(
    config: Option<PathBuf>,
    preset: Option<String>,
    seed: u64,
    out: &Path,
    stage: StageArg,
) -> Result<()> {
    let cfg = load_pipeline_config(config, preset, seed)?;
    let preset_name = cfg.preset.as_deref();
    match stage {
        StageArg::Pretrain => {
            let p = cfg
                .pretrain
                .as_ref()
                .ok_or_else(|| Error::config("config has no pretrain stage".to_string()))?;
            let outcome = pipeline::train_stage(p, "pretrain", &out.join("pretrain"), None, preset_name)?;
            println!("pretrain finished: {}", outcome.final_ckpt.display());
        }
        StageArg::Video => {
            let warm = match &cfg.pretrain {
                Some(_) => {
                    let dir = out.join("pretrain");
                    if dir.exists() {
                        Some(final_checkpoint(&dir)?)
                    } else {
                        None
                    }
                }
                None => None,
            };
            let outcome = pipeline::train_stage(
                &cfg.video,
                "video",
                &out.join("video"),
                warm.as_deref(),
                preset_name,
            )?;
            report_video(&outcome);
        }
        StageArg::Both => match &cfg.pretrain {
            Some(p) => {
                let (_, v) = pipeline::pretrain_then_finetune(p, &cfg.video, out, preset_name)?;
                report_video(&v);
            }
            None => {
                let outcome =
                    pipeline::train_stage(&cfg.video, "video", &out.join("video"), None, preset_name)?;
                report_video(&outcome);
            }
        },
    }
    Ok(())
}

fn report_video(outcome: &pipeline::StageOutcome) {
    match (outcome.initial_fvd16, outcome.final_fvd16) {
        (Some(a), Some(b)) => println!(
            "video finished: {} (fvd16 proxy {a:.2} -> {b:.2}; random embedder, within-run ordering only)",
            outcome.final_ckpt.display()
        ),
        _ => println!("video finished: {}", outcome.final_ckpt.display()),
    }
}

fn load_generator(ckpt: &Path) -> Result<(GeneratorWeights, TrainConfig)> {
    let cfg_bytes = std::fs::read(ckpt.join("config.json"))
        .map_err(|e| Error::config(format!("checkpoint {} has no config.json: {e}", ckpt.display())))?;
    let cfg: TrainConfig = serde_json::from_slice(&cfg_bytes)?;
    let gen_init = GeneratorWeights::init(cfg.gen.clone(), 0)?;
    let mut store = ParamStore::new();
    gen_init.register(&mut store);
    // Load only generator tensors; the checkpoint also holds the
    // discriminator, which evaluation does not need.
    for name in tio::checkpoint_names(ckpt)? {
        if !name.starts_with("gen.") {
            continue;
        }
        let t = tio::load_tensor(ckpt, &name)?;
        let current = store.get(&name).ok_or_else(|| {
            Error::checkpoint(format!("checkpoint parameter {name} unknown to this model"))
        })?;
        if current.shape() != t.shape() {
            return Err(Error::checkpoint(format!(
                "parameter {name}: checkpoint shape {:?} vs model {:?}",
                t.shape(),
                current.shape()
            )));
        }
        store.set(&name, t)?;
    }
    Ok((GeneratorWeights::from_store(cfg.gen.clone(), &store)?, cfg))
}

fn ckpt_step(ckpt: &Path) -> u64 {
    ckpt.file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.strip_prefix("ckpt_"))
        .and_then(|n| n.parse().ok())
        .unwrap_or(0)
}

fn cmd_eval(ckpt: &Path, metrics: MetricsArg, out: &Path) -> Result<()> {
    let (gen, cfg) = load_generator(ckpt)?;
    let set = match metrics {
        MetricsArg::All => MetricSet::All,
        MetricsArg::Fvd => MetricSet::Fvd,
        MetricsArg::Anchor => MetricSet::Anchor,
        MetricsArg::Jitter => MetricSet::Jitter,
    };
    let n_clips = cfg.eval.n_clips.max(64);
    let ctx = EvalContext::new(&gen, &cfg.data, cfg.eval.seed, n_clips)?;
    let snap: MetricsSnapshot = ctx.snapshot(ckpt_step(ckpt), set)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(out, serde_json::to_vec_pretty(&snap)?)?;
    println!(
        "wrote {} (random-embedder proxies; within-run ordering only)",
        out.display()
    );
    Ok(())
}

fn cmd_gen(ckpt: &Path, u_seed: u64, t0: f64, frames: usize, fps_units: f64, out_dir: &Path) -> Result<()> {
    if frames == 0 {
        return Err(Error::config("need at least one frame".to_string()));
    }
    if !(fps_units > 0.0) {
        return Err(Error::config("fps-units must be positive".to_string()));
    }
    let (gen, _cfg) = load_generator(ckpt)?;
    let u = RngKey::new(u_seed, "gen.u", 0).normal_vec(gen.cfg.dim_u);
    std::fs::create_dir_all(out_dir)?;
    let ts: Vec<f64> = (0..frames).map(|i| t0 + i as f64 * fps_units).collect();
    let mut peak_anchors = 0usize;
    // Chunked generation bounds tape memory for long rollouts.
    let mut all_frames = Vec::with_capacity(frames);
    for chunk in ts.chunks(32) {
        let (fs, anchors) = generate_frames(&gen, &u, chunk)?;
        peak_anchors = peak_anchors.max(anchors);
        all_frames.extend(fs);
    }
    for (i, f) in all_frames.iter().enumerate() {
        write_ppm(&out_dir.join(format!("frame_{i:05}.ppm")), f)?;
    }
    if frames >= 3 {
        let column = gen.cfg.resolution / 2;
        let probe = motiongen::metrics::sticking_probe(
            |t| {
                let idx = ((t - t0) / fps_units).round() as usize;
                Ok(all_frames[idx].clone())
            },
            column,
            &ts,
        )?;
        // Normalize rows into an image-friendly range before export.
        write_ppm(&out_dir.join("timeline.ppm"), &probe.image)?;
        println!(
            "wrote {frames} frames + timeline.ppm (column {column}, autocorr {:.3}); peak anchor features {peak_anchors}",
            probe.autocorr
        );
    } else {
        println!("wrote {frames} frame(s); peak anchor features {peak_anchors}");
    }
    Ok(())
}
