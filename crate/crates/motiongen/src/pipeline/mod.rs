//! Desk-scale end-to-end system: synthetic continuous-time video, a tiny
//! modulated generator, a temporal discriminator, and the adversarial
//! trainer with sparse frame sampling and lazy R1 regularization.

pub mod config;
pub mod discriminator;
pub mod eval;
pub mod generator;
pub mod losses;
pub mod ppm;
pub mod synth;
pub mod train;

pub use config::{EvalSettings, PipelineConfig, RunManifest, TrainConfig, TOOL_VERSION};
pub use discriminator::{DiscriminatorConfig, DiscriminatorNodes, DiscriminatorWeights};
pub use eval::{EvalContext, MetricSet};
pub use generator::{generate_frames, GeneratorConfig, GeneratorNodes, GeneratorWeights};
pub use losses::{gan_losses, r1_penalty, sample_timesteps};
pub use ppm::write_ppm;
pub use synth::SyntheticVideoSpec;
pub use train::{final_checkpoint, pretrain_then_finetune, train_stage, StageOutcome, Trainer};
