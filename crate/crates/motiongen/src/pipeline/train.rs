//! Adversarial trainer and the two-stage pretrain/finetune schedule.
//!
//! One trainer owns all mutable state. Every random draw is keyed by
//! `(seed, stream, step)` through the counter RNG, so a run is a pure
//! function of its manifest: repeated runs produce byte-identical loss
//! curves and checkpoints.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::{RunManifest, TrainConfig, TOOL_VERSION};
use super::discriminator::{DiscriminatorNodes, DiscriminatorWeights};
use super::eval::EvalContext;
use super::generator::{GeneratorNodes, GeneratorWeights};
use super::losses::{r1_penalty, sample_timesteps};
use crate::error::{Error, Result};
use crate::metrics::MetricsSnapshot;
use crate::numerics::{io, AdamState, NodeId, ParamStore, RngKey, Tape, Tensor};

/// Per-step scalar diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct StepStats {
    pub step: u64,
    pub loss_g: f64,
    pub loss_d: f64,
    /// Unweighted penalty value; zero on steps where lazy R1 is skipped.
    pub r1: f64,
}

pub struct Trainer {
    pub cfg: TrainConfig,
    pub stage: String,
    pub store: ParamStore,
    adam_g: AdamState,
    adam_d: AdamState,
    step: u64,
}

impl Trainer {
    /// Fresh parameters for one stage. Initialization streams are keyed by
    /// `(seed, stage)` so a reinitialized stage never aliases another.
    pub fn new(cfg: TrainConfig, stage: &str) -> Result<Self> {
        cfg.validate()?;
        let init_seed = RngKey::new(cfg.seed, stage, 0).bits(0);
        let gen = GeneratorWeights::init(cfg.gen.clone(), init_seed)?;
        let disc = DiscriminatorWeights::init(cfg.disc.clone(), init_seed)?;
        let mut store = ParamStore::new();
        gen.register(&mut store);
        disc.register(&mut store);
        Ok(Trainer {
            adam_g: AdamState::new(cfg.adam),
            adam_d: AdamState::new(cfg.adam),
            cfg,
            stage: stage.to_string(),
            store,
            step: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Copy the deepest generator blocks and the output head from another
    /// run's checkpoint. Everything else keeps this stage's fresh init.
    /// Returns the loaded parameter names.
    pub fn load_deep_generator_layers(&mut self, ckpt: &Path) -> Result<Vec<String>> {
        let gen = GeneratorWeights::from_store(self.cfg.gen.clone(), &self.store)?;
        let prefixes = gen.deep_layer_prefixes();
        let available = io::checkpoint_names(ckpt)?;
        let mut loaded = Vec::new();
        for name in available {
            if !prefixes.iter().any(|p| name.starts_with(p.as_str())) {
                continue;
            }
            let t = io::load_tensor(ckpt, &name)?;
            let current = self.store.get(&name).ok_or_else(|| {
                Error::checkpoint(format!("checkpoint parameter {name} unknown to this model"))
            })?;
            if current.shape() != t.shape() {
                return Err(Error::checkpoint(format!(
                    "parameter {name}: checkpoint shape {:?} vs model {:?}",
                    t.shape(),
                    current.shape()
                )));
            }
            self.store.set(&name, t)?;
            loaded.push(name);
        }
        if loaded.is_empty() {
            return Err(Error::checkpoint(format!(
                "no deep-layer parameters found in {}",
                ckpt.display()
            )));
        }
        Ok(loaded)
    }

    fn clip_inputs(&self, stream_tag: &str, slot: i64) -> (i64, Vec<f64>, Vec<f64>) {
        let cfg = &self.cfg;
        let clip = RngKey::new(cfg.seed, &format!("{}.clip", stream_tag), slot)
            .uniform_int(0, u64::from(cfg.data.n_clips)) as i64;
        let ts = sample_timesteps(
            cfg.seed,
            &format!("{}.ts", stream_tag),
            slot,
            cfg.n_t,
            cfg.data.timeline,
        );
        let u = RngKey::new(cfg.seed, &format!("{}.u", stream_tag), slot).normal_vec(cfg.gen.dim_u);
        (clip, ts, u)
    }

    /// One discriminator update. Returns `(loss_d, r1_value)`.
    pub fn d_step(&mut self) -> Result<(f64, f64)> {
        let cfg = self.cfg.clone();
        let r1_due = cfg.r1_gamma > 0.0 && self.step % cfg.r1_interval == 0;
        let mut tape = Tape::new();
        let params = self.store.nodes_with_grad_prefix(&mut tape, "disc.");
        let disc = DiscriminatorNodes::from_params(cfg.disc.clone(), &params)?;
        let mut gen = GeneratorNodes::from_params(cfg.gen.clone(), &params)?;

        let mut loss_terms: Vec<NodeId> = Vec::with_capacity(cfg.batch);
        let mut penalty_terms: Vec<NodeId> = Vec::new();
        for b in 0..cfg.batch {
            let slot = (self.step * cfg.batch as u64 + b as u64) as i64;
            let (clip, ts, u) = self.clip_inputs("d", slot);
            let real = cfg.data.clip(clip, &ts)?;
            let real_ids: Vec<NodeId> = real
                .into_iter()
                .map(|f| if r1_due { tape.leaf(f.with_grad()) } else { tape.constant(f) })
                .collect();
            let u_node = tape.constant(Tensor::from_vec(u));
            let fake_ids = gen.frames(&mut tape, u_node, &ts)?;
            let l_real = disc.logit(&mut tape, &real_ids, &ts)?;
            let l_fake = disc.logit(&mut tape, &fake_ids, &ts)?;
            let neg_real = tape.neg(l_real);
            let a = tape.softplus(neg_real);
            let c = tape.softplus(l_fake);
            loss_terms.push(tape.add(a, c)?);
            if r1_due {
                penalty_terms.push(r1_penalty(&mut tape, l_real, &real_ids, cfg.r1_gamma)?);
            }
        }
        let loss_d = mean_of(&mut tape, &loss_terms)?;
        let (total, r1_value) = if r1_due {
            let pen = mean_of(&mut tape, &penalty_terms)?;
            let weighted = tape.mul_scalar(pen, cfg.r1_interval as f64);
            (tape.add(loss_d, weighted)?, tape.value(pen).item()?)
        } else {
            (loss_d, 0.0)
        };
        let loss_val = tape.value(loss_d).item()?;
        if !loss_val.is_finite() || !r1_value.is_finite() {
            return Err(Error::numerics(format!(
                "discriminator loss diverged at step {}: loss {loss_val}, r1 {r1_value}",
                self.step
            )));
        }
        let disc_names = self.store.names_with_prefix("disc.");
        let targets: Vec<NodeId> =
            disc_names.iter().map(|n| params.id(n)).collect::<Result<_>>()?;
        let grads = tape.backward_wrt(total, &targets)?;
        let mut grad_map = HashMap::new();
        for (name, id) in disc_names.iter().zip(&targets) {
            grad_map.insert(name.clone(), grads.tensor(&tape, *id));
        }
        self.adam_d.step(&mut self.store, &grad_map)?;
        Ok((loss_val, r1_value))
    }

    /// One generator update. Returns `loss_g`.
    pub fn g_step(&mut self) -> Result<f64> {
        let cfg = self.cfg.clone();
        let mut tape = Tape::new();
        let params = self.store.nodes_with_grad_prefix(&mut tape, "gen.");
        let disc = DiscriminatorNodes::from_params(cfg.disc.clone(), &params)?;
        let mut gen = GeneratorNodes::from_params(cfg.gen.clone(), &params)?;

        let mut loss_terms: Vec<NodeId> = Vec::with_capacity(cfg.batch);
        for b in 0..cfg.batch {
            let slot = (self.step * cfg.batch as u64 + b as u64) as i64;
            let (_, ts, u) = self.clip_inputs("g", slot);
            let u_node = tape.constant(Tensor::from_vec(u));
            let fake_ids = gen.frames(&mut tape, u_node, &ts)?;
            let l_fake = disc.logit(&mut tape, &fake_ids, &ts)?;
            let neg = tape.neg(l_fake);
            loss_terms.push(tape.softplus(neg));
        }
        let loss_g = mean_of(&mut tape, &loss_terms)?;
        let loss_val = tape.value(loss_g).item()?;
        if !loss_val.is_finite() {
            return Err(Error::numerics(format!(
                "generator loss diverged at step {}: {loss_val}",
                self.step
            )));
        }
        let gen_names = self.store.names_with_prefix("gen.");
        let targets: Vec<NodeId> = gen_names.iter().map(|n| params.id(n)).collect::<Result<_>>()?;
        let grads = tape.backward_wrt(loss_g, &targets)?;
        let mut grad_map = HashMap::new();
        for (name, id) in gen_names.iter().zip(&targets) {
            grad_map.insert(name.clone(), grads.tensor(&tape, *id));
        }
        self.adam_g.step(&mut self.store, &grad_map)?;
        Ok(loss_val)
    }

    /// Alternating D then G update.
    pub fn step(&mut self) -> Result<StepStats> {
        let (loss_d, r1) = self.d_step()?;
        let loss_g = self.g_step()?;
        let stats = StepStats { step: self.step, loss_g, loss_d, r1 };
        self.step += 1;
        Ok(stats)
    }

    pub fn save_checkpoint(&self, dir: &Path) -> Result<()> {
        io::save_checkpoint(dir, &self.store)
    }

    pub fn generator_weights(&self) -> Result<GeneratorWeights> {
        GeneratorWeights::from_store(self.cfg.gen.clone(), &self.store)
    }
}

fn mean_of(tape: &mut Tape, terms: &[NodeId]) -> Result<NodeId> {
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = tape.add(acc, t)?;
    }
    Ok(tape.mul_scalar(acc, 1.0 / terms.len() as f64))
}

/// Outcome of one trained stage.
#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub run_dir: PathBuf,
    pub final_ckpt: PathBuf,
    pub initial_fvd16: Option<f64>,
    pub final_fvd16: Option<f64>,
}

/// Train one stage into `out_dir`, producing the spec'd run layout:
/// `manifest.json`, `losses.csv`, `ckpt_<step>/`, `metrics.json`.
pub fn train_stage(
    cfg: &TrainConfig,
    stage: &str,
    out_dir: &Path,
    warm_from: Option<&Path>,
    preset: Option<&str>,
) -> Result<StageOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let manifest = RunManifest {
        version: TOOL_VERSION.to_string(),
        stage: stage.to_string(),
        preset: preset.map(str::to_string),
        config: cfg.clone(),
    };
    fs::write(out_dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;

    let mut trainer = Trainer::new(cfg.clone(), stage)?;
    if let Some(ckpt) = warm_from {
        let loaded = trainer.load_deep_generator_layers(ckpt)?;
        eprintln!("{stage}: warm-started {} deep-layer tensors", loaded.len());
    }
    save_stage_checkpoint(&trainer, out_dir, 0, cfg)?;

    let mut snapshots: Vec<MetricsSnapshot> = Vec::new();
    if cfg.eval.n_clips > 0 {
        let gen = trainer.generator_weights()?;
        let ctx = EvalContext::new(&gen, &cfg.data, cfg.eval.seed, cfg.eval.n_clips)?;
        snapshots.push(ctx.fvd16_only(0)?);
    }

    let losses_path = out_dir.join("losses.csv");
    let mut losses = std::io::BufWriter::new(fs::File::create(&losses_path)?);
    writeln!(losses, "step,loss_g,loss_d,r1")?;

    for _ in 0..cfg.steps {
        let stats = trainer.step().map_err(|e| {
            // Divergence keeps the last periodic checkpoint on disk.
            Error::numerics(format!("aborted; last saved checkpoint retained: {e}"))
        })?;
        writeln!(
            losses,
            "{},{:.16e},{:.16e},{:.16e}",
            stats.step, stats.loss_g, stats.loss_d, stats.r1
        )?;
        let done = stats.step + 1;
        if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done != cfg.steps {
            save_stage_checkpoint(&trainer, out_dir, done, cfg)?;
        }
    }
    losses.flush()?;
    let final_ckpt = save_stage_checkpoint(&trainer, out_dir, cfg.steps, cfg)?;

    if cfg.eval.n_clips > 0 {
        let gen = trainer.generator_weights()?;
        let ctx = EvalContext::new(&gen, &cfg.data, cfg.eval.seed, cfg.eval.n_clips)?;
        snapshots.push(ctx.fvd16_only(cfg.steps)?);
    }
    fs::write(out_dir.join("metrics.json"), serde_json::to_vec_pretty(&snapshots)?)?;

    let first = snapshots.first().and_then(|s| s.fvd16_proxy);
    let last = snapshots.last().and_then(|s| s.fvd16_proxy);
    Ok(StageOutcome {
        run_dir: out_dir.to_path_buf(),
        final_ckpt,
        initial_fvd16: first,
        final_fvd16: if snapshots.len() > 1 { last } else { None },
    })
}

fn save_stage_checkpoint(trainer: &Trainer, out_dir: &Path, step: u64, cfg: &TrainConfig) -> Result<PathBuf> {
    let dir = out_dir.join(format!("ckpt_{step}"));
    trainer.save_checkpoint(&dir)?;
    // Each checkpoint carries its config so evaluation is self-contained.
    fs::write(dir.join("config.json"), serde_json::to_vec_pretty(cfg)?)?;
    Ok(dir)
}

/// Stage 1 with `N_t = 1` and a small R1 weight, then stage 2 warm-started
/// from its deepest generator layers.
pub fn pretrain_then_finetune(
    pretrain: &TrainConfig,
    video: &TrainConfig,
    out_dir: &Path,
    preset: Option<&str>,
) -> Result<(StageOutcome, StageOutcome)> {
    let p = train_stage(pretrain, "pretrain", &out_dir.join("pretrain"), None, preset)?;
    let v = train_stage(video, "video", &out_dir.join("video"), Some(&p.final_ckpt), preset)?;
    Ok((p, v))
}

/// Locate the final checkpoint of a finished stage directory.
pub fn final_checkpoint(stage_dir: &Path) -> Result<PathBuf> {
    let manifest: RunManifest =
        serde_json::from_slice(&fs::read(stage_dir.join("manifest.json"))?)?;
    let dir = stage_dir.join(format!("ckpt_{}", manifest.config.steps));
    if !dir.exists() {
        return Err(Error::checkpoint(format!("final checkpoint {} missing", dir.display())));
    }
    Ok(dir)
}
