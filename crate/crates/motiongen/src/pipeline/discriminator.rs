//! Tiny clip discriminator: per-frame conv stack with optional temporal
//! channel shifting, global pooling, frame fusion, and a time-conditioned
//! logit head.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Conv2dNodes, Conv2dWeights, MlpNodes, MlpWeights};
use crate::numerics::{NodeId, ParamNodes, ParamStore, Tape, Tensor};
use crate::temporal::{temporal_fuse, time_conditioned_logit, tsm_shift_nodes};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    /// `channels[0]` after the input conv, then one entry per stride-2 block.
    pub channels: Vec<usize>,
    pub resolution: usize,
    pub img_channels: usize,
    pub n_t: usize,
    /// Insert the temporal shift before every downsampling conv.
    pub tsm: bool,
    /// Per-block TSM override; `None` means every block follows `tsm`.
    pub tsm_mask: Option<Vec<bool>>,
    pub head_hidden: usize,
    /// Condition the head on raw timestamps instead of normalized offsets.
    pub raw_time: bool,
    /// Anchor interval used to normalize timestamp offsets.
    pub interval: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            channels: vec![8, 16, 16, 16],
            resolution: 32,
            img_channels: 1,
            n_t: 3,
            tsm: false,
            tsm_mask: None,
            head_hidden: 32,
            raw_time: false,
            interval: 64.0,
        }
    }
}

impl DiscriminatorConfig {
    pub fn n_down(&self) -> usize {
        self.channels.len() - 1
    }

    pub fn final_channels(&self) -> usize {
        *self.channels.last().expect("non-empty")
    }

    pub fn head_input_dim(&self) -> usize {
        self.n_t * self.final_channels() + self.n_t
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.len() < 2 {
            return Err(Error::config("discriminator needs at least one downsampling block".to_string()));
        }
        if self.resolution % (1 << self.n_down()) != 0 {
            return Err(Error::config(format!(
                "resolution {} not divisible by 2^{}",
                self.resolution,
                self.n_down()
            )));
        }
        if self.n_t == 0 {
            return Err(Error::config("n_t must be at least 1".to_string()));
        }
        if let Some(mask) = &self.tsm_mask {
            if mask.len() != self.n_down() {
                return Err(Error::config(format!(
                    "tsm mask has {} entries for {} blocks",
                    mask.len(),
                    self.n_down()
                )));
            }
        }
        if self.tsm {
            for c in &self.channels[..self.channels.len() - 1] {
                if c % 8 != 0 {
                    return Err(Error::config(format!(
                        "tsm requires block channels divisible by 8, got {c}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn shift_at(&self, block: usize) -> bool {
        if !self.tsm {
            return false;
        }
        self.tsm_mask.as_ref().map_or(true, |m| m[block])
    }
}

#[derive(Debug, Clone)]
pub struct DiscriminatorWeights {
    pub cfg: DiscriminatorConfig,
    pub from_rgb: Conv2dWeights,
    pub blocks: Vec<Conv2dWeights>,
    pub head: MlpWeights,
}

impl DiscriminatorWeights {
    pub fn init(cfg: DiscriminatorConfig, init_seed: u64) -> Result<Self> {
        cfg.validate()?;
        let from_rgb = Conv2dWeights::init(init_seed, "disc.fromrgb", cfg.img_channels, cfg.channels[0])?;
        let blocks = (0..cfg.n_down())
            .map(|b| Conv2dWeights::init(init_seed, &format!("disc.block{b}"), cfg.channels[b], cfg.channels[b + 1]))
            .collect::<Result<Vec<_>>>()?;
        let head = MlpWeights::init(init_seed, "disc.head", cfg.head_input_dim(), cfg.head_hidden, 1)?;
        Ok(DiscriminatorWeights { cfg, from_rgb, blocks, head })
    }

    pub fn register(&self, store: &mut ParamStore) {
        self.from_rgb.register(store, "disc.fromrgb");
        for (b, block) in self.blocks.iter().enumerate() {
            block.register(store, &format!("disc.block{b}"));
        }
        self.head.register(store, "disc.head");
    }

    pub fn from_store(cfg: DiscriminatorConfig, store: &ParamStore) -> Result<Self> {
        cfg.validate()?;
        let from_rgb = Conv2dWeights::from_store(store, "disc.fromrgb")?;
        let blocks = (0..cfg.n_down())
            .map(|b| Conv2dWeights::from_store(store, &format!("disc.block{b}")))
            .collect::<Result<Vec<_>>>()?;
        let head = MlpWeights::from_store(store, "disc.head")?;
        Ok(DiscriminatorWeights { cfg, from_rgb, blocks, head })
    }
}

pub struct DiscriminatorNodes {
    pub cfg: DiscriminatorConfig,
    pub from_rgb: Conv2dNodes,
    pub blocks: Vec<Conv2dNodes>,
    pub head: MlpNodes,
}

impl DiscriminatorNodes {
    pub fn from_params(cfg: DiscriminatorConfig, params: &ParamNodes) -> Result<Self> {
        let blocks = (0..cfg.n_down())
            .map(|b| Conv2dNodes::from_params(params, &format!("disc.block{b}")))
            .collect::<Result<Vec<_>>>()?;
        Ok(DiscriminatorNodes {
            from_rgb: Conv2dNodes::from_params(params, "disc.fromrgb")?,
            blocks,
            head: MlpNodes::from_params(params, "disc.head")?,
            cfg,
        })
    }

    pub fn constants(tape: &mut Tape, weights: &DiscriminatorWeights) -> Self {
        DiscriminatorNodes {
            from_rgb: weights.from_rgb.constants(tape),
            blocks: weights.blocks.iter().map(|b| b.constants(tape)).collect(),
            head: weights.head.constants(tape),
            cfg: weights.cfg.clone(),
        }
    }

    /// Per-frame pooled features `y_i` before fusion.
    pub fn frame_features(&self, tape: &mut Tape, frames: &[NodeId]) -> Result<Vec<NodeId>> {
        let mut xs = Vec::with_capacity(frames.len());
        for &f in frames {
            let x = self.from_rgb.forward(tape, f, 1)?;
            xs.push(tape.leaky_relu(x, 0.2));
        }
        for (b, block) in self.blocks.iter().enumerate() {
            if self.cfg.shift_at(b) {
                xs = tsm_shift_nodes(tape, &xs)?;
            }
            let mut next = Vec::with_capacity(xs.len());
            for &x in &xs {
                let y = block.forward(tape, x, 2)?;
                next.push(tape.leaky_relu(y, 0.2));
            }
            xs = next;
        }
        xs.iter().map(|&x| tape.global_avg_pool(x)).collect()
    }

    /// Clip logit `l = M(fuse(y_i) ++ tau)`.
    pub fn logit(&self, tape: &mut Tape, frames: &[NodeId], timestamps: &[f64]) -> Result<NodeId> {
        if frames.len() != self.cfg.n_t {
            return Err(Error::shape(format!(
                "discriminator configured for {} frames, got {}",
                self.cfg.n_t,
                frames.len()
            )));
        }
        if timestamps.len() != frames.len() {
            return Err(Error::shape("one timestamp per frame required".to_string()));
        }
        let feats = self.frame_features(tape, frames)?;
        let fused = temporal_fuse(tape, &feats)?;
        time_conditioned_logit(tape, &self.head, fused, timestamps, self.cfg.interval, self.cfg.raw_time)
    }
}

/// Frozen-weight logit on tensor frames.
pub fn logit_values(weights: &DiscriminatorWeights, frames: &[Tensor], timestamps: &[f64]) -> Result<f64> {
    let mut tape = Tape::new();
    let d = DiscriminatorNodes::constants(&mut tape, weights);
    let ids: Vec<NodeId> = frames.iter().map(|f| tape.constant(f.clone())).collect();
    let l = d.logit(&mut tape, &ids, timestamps)?;
    tape.value(l).item()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngKey;

    fn tiny_cfg(n_t: usize, tsm: bool) -> DiscriminatorConfig {
        DiscriminatorConfig {
            channels: vec![8, 8, 16],
            resolution: 16,
            n_t,
            tsm,
            head_hidden: 8,
            ..DiscriminatorConfig::default()
        }
    }

    fn frames(n: usize, seed: u64) -> Vec<Tensor> {
        (0..n)
            .map(|i| {
                Tensor::new(vec![1, 16, 16], RngKey::new(seed, "f", i as i64).normal_vec(256)).unwrap()
            })
            .collect()
    }

    #[test]
    fn without_tsm_the_clip_factorizes_into_per_frame_features() {
        let w = DiscriminatorWeights::init(tiny_cfg(3, false), 3).unwrap();
        let fs = frames(3, 1);
        let ts = [0.0, 4.0, 9.0];

        // Features of the clip...
        let mut tape = Tape::new();
        let d = DiscriminatorNodes::constants(&mut tape, &w);
        let ids: Vec<NodeId> = fs.iter().map(|f| tape.constant(f.clone())).collect();
        let clip_feats: Vec<Vec<f64>> = d
            .frame_features(&mut tape, &ids)
            .unwrap()
            .into_iter()
            .map(|id| tape.value(id).data().to_vec())
            .collect();

        // ...equal features of each frame processed alone.
        for (i, f) in fs.iter().enumerate() {
            let mut tape1 = Tape::new();
            let d1 = DiscriminatorNodes::constants(&mut tape1, &w);
            let id = tape1.constant(f.clone());
            let solo = d1.frame_features(&mut tape1, &[id]).unwrap();
            assert_eq!(clip_feats[i], tape1.value(solo[0]).data(), "frame {i}");
        }
        // And the logit is reproducible.
        let a = logit_values(&w, &fs, &ts).unwrap();
        let b = logit_values(&w, &fs, &ts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tsm_makes_neighbors_matter() {
        let w = DiscriminatorWeights::init(tiny_cfg(3, true), 3).unwrap();
        let fs = frames(3, 2);
        let ts = [0.0, 1.0, 2.0];
        let base = logit_values(&w, &fs, &ts).unwrap();
        // Perturb frame 0 only; with TSM the change must reach the clip logit
        // through frame 1's shifted channels even if we freeze frame 1 and 2.
        let mut fs2 = fs.clone();
        for v in fs2[0].data_mut().iter_mut() {
            *v += 0.5;
        }
        let moved = logit_values(&w, &fs2, &ts).unwrap();
        assert!((base - moved).abs() > 1e-12);
    }

    #[test]
    fn wrong_frame_count_is_a_shape_error() {
        let w = DiscriminatorWeights::init(tiny_cfg(3, false), 3).unwrap();
        let fs = frames(2, 3);
        assert!(matches!(
            logit_values(&w, &fs, &[0.0, 1.0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn tsm_with_odd_channels_is_rejected_at_config_time() {
        let mut cfg = tiny_cfg(3, true);
        cfg.channels = vec![6, 8, 8];
        assert!(matches!(DiscriminatorWeights::init(cfg, 1), Err(Error::Config(_))));
    }

    #[test]
    fn single_frame_mode_works_with_tsm_boundaries() {
        let w = DiscriminatorWeights::init(tiny_cfg(1, true), 5).unwrap();
        let fs = frames(1, 4);
        let l = logit_values(&w, &fs, &[10.0]).unwrap();
        assert!(l.is_finite());
    }
}
