//! Training configuration, the two-stage schedule, and ladder presets.

use serde::{Deserialize, Serialize};

use super::discriminator::DiscriminatorConfig;
use super::generator::GeneratorConfig;
use super::synth::SyntheticVideoSpec;
use crate::error::{Error, Result};
use crate::modulation::ModVariant;
use crate::motion::MotionMode;
use crate::numerics::AdamConfig;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalSettings {
    /// Clips per Fréchet fit; 0 disables in-loop evaluation.
    pub n_clips: usize,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings { n_clips: 64, seed: 0xE3BED }
    }
}

/// Everything one training stage needs. Serialized verbatim into the run
/// manifest; a run is reproducible from the manifest alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub steps: u64,
    pub batch: usize,
    /// Frames sampled per clip (sparse sampling).
    pub n_t: usize,
    pub r1_gamma: f64,
    /// Lazy regularization: the penalty applies every this many steps with
    /// matching extra weight.
    pub r1_interval: u64,
    pub adam: AdamConfig,
    pub data: SyntheticVideoSpec,
    pub gen: GeneratorConfig,
    pub disc: DiscriminatorConfig,
    /// Extra checkpoints every `checkpoint_every` steps (0: start/end only).
    pub checkpoint_every: u64,
    pub eval: EvalSettings,
    /// Permit ladder-inconsistent combinations (low-rank without B-spline).
    pub allow_mode_mismatch: bool,
}

impl TrainConfig {
    /// Desk-scale video stage: 32x32 frames, three sparse frames per clip,
    /// anchors every 64 frames.
    pub fn desk_video(seed: u64) -> Self {
        let gen = GeneratorConfig::default();
        let disc = DiscriminatorConfig {
            n_t: 3,
            resolution: gen.resolution,
            img_channels: gen.img_channels,
            interval: gen.motion.interval,
            ..DiscriminatorConfig::default()
        };
        TrainConfig {
            seed,
            steps: 2000,
            batch: 2,
            n_t: 3,
            r1_gamma: 4.0,
            r1_interval: 16,
            adam: AdamConfig::default(),
            data: SyntheticVideoSpec { seed, ..SyntheticVideoSpec::default() },
            gen,
            disc,
            checkpoint_every: 0,
            eval: EvalSettings::default(),
            allow_mode_mismatch: false,
        }
    }

    /// Image pretraining stage: single-frame clips, small R1 weight.
    pub fn desk_pretrain(seed: u64) -> Self {
        let mut cfg = TrainConfig::desk_video(seed);
        cfg.steps = 600;
        cfg.n_t = 1;
        cfg.disc.n_t = 1;
        cfg.r1_gamma = 0.25;
        cfg.eval.n_clips = 0;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.gen.validate()?;
        self.disc.validate()?;
        if self.n_t != self.disc.n_t {
            return Err(Error::config(format!(
                "n_t {} does not match discriminator head n_t {}",
                self.n_t, self.disc.n_t
            )));
        }
        if self.gen.resolution != self.disc.resolution || self.gen.resolution != self.data.resolution {
            return Err(Error::config("generator, discriminator, and data resolutions must agree".to_string()));
        }
        if self.batch == 0 || self.steps == 0 {
            return Err(Error::config("steps and batch must be positive".to_string()));
        }
        if self.gen.variant == ModVariant::LowRank
            && self.gen.motion.mode == MotionMode::Linear
            && !self.allow_mode_mismatch
        {
            return Err(Error::config(
                "low-rank modulation expects the b-spline motion mode (set allow_mode_mismatch to override)"
                    .to_string(),
            ));
        }
        Ok(())
    }
}

/// The `--config` file: an optional pretraining stage plus the video stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub pretrain: Option<TrainConfig>,
    pub video: TrainConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.pretrain {
            p.validate()?;
        }
        self.video.validate()
    }

    /// Named ladder presets. Each step adds one capability:
    /// a/b cold-start linear baseline (no anti-aliased backbone at this
    /// scale, so b equals a), c adds image pretraining, d adds the temporal
    /// shift, e adds the B-spline motion mode, f adds low-rank modulation.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let mut video = TrainConfig::desk_video(seed);
        let mut pretrain = None;
        match name {
            "config-a" | "config-b" => {}
            "config-c" => {
                pretrain = Some(TrainConfig::desk_pretrain(seed));
            }
            "config-d" => {
                pretrain = Some(TrainConfig::desk_pretrain(seed));
                video.disc.tsm = true;
            }
            "config-e" => {
                pretrain = Some(TrainConfig::desk_pretrain(seed));
                video.disc.tsm = true;
                video.gen.motion.mode = MotionMode::BSpline;
            }
            "config-f" => {
                pretrain = Some(TrainConfig::desk_pretrain(seed));
                video.disc.tsm = true;
                video.gen.motion.mode = MotionMode::BSpline;
                video.gen.variant = ModVariant::LowRank;
            }
            other => {
                return Err(Error::config(format!(
                    "unknown preset {other}; expected config-a through config-f"
                )));
            }
        }
        if let Some(p) = &mut pretrain {
            p.gen = video.gen.clone();
            p.disc = video.disc.clone();
            p.disc.n_t = 1;
        }
        Ok(PipelineConfig { preset: Some(name.to_string()), pretrain, video })
    }
}

/// Echo of one stage's configuration written into its run directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub stage: String,
    #[serde(default)]
    pub preset: Option<String>,
    pub config: TrainConfig,
}
