//! Tiny modulated-convolution generator conditioned on content and motion.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modulation::{modulated_conv_forward, ModLayerConfig, ModLayerNodes, ModLayerWeights, ModVariant};
use crate::motion::{embedding_nodes, feature_node, AnchorTrack, MotionConfig, MotionNodes, MotionWeights};
use crate::numerics::{init_normal, NodeId, ParamNodes, ParamStore, Tape, Tensor};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Content code dimension.
    pub dim_u: usize,
    /// Output channels per block; block 0 runs at the 4x4 base, each later
    /// block doubles the resolution first.
    pub channels: Vec<usize>,
    pub base: usize,
    pub resolution: usize,
    pub img_channels: usize,
    pub variant: ModVariant,
    /// Low-rank motion-path rank override (`None`: `ceil(c_in/8)`).
    pub rank: Option<usize>,
    pub demodulate: bool,
    pub motion: MotionConfig,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            dim_u: 64,
            channels: vec![16, 16, 8, 8],
            base: 4,
            resolution: 32,
            img_channels: 1,
            variant: ModVariant::Full,
            rank: None,
            demodulate: true,
            motion: MotionConfig { interval: 64.0, ..MotionConfig::default() },
        }
    }
}

impl GeneratorConfig {
    pub fn dim_v(&self) -> usize {
        2 * self.motion.code_dim
    }

    pub fn n_blocks(&self) -> usize {
        self.channels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::config("generator needs at least one block".to_string()));
        }
        let expected = self.base << (self.channels.len() - 1);
        if expected != self.resolution {
            return Err(Error::config(format!(
                "{} blocks from base {} reach {expected}, not resolution {}",
                self.channels.len(),
                self.base,
                self.resolution
            )));
        }
        Ok(())
    }

    fn block_cfg(&self, b: usize) -> ModLayerConfig {
        let c_in = if b == 0 { self.channels[0] } else { self.channels[b - 1] };
        let mut cfg = match self.variant {
            ModVariant::Full => ModLayerConfig::full(c_in, self.channels[b], self.dim_u, self.dim_v()),
            ModVariant::LowRank => {
                ModLayerConfig::lowrank(c_in, self.channels[b], self.dim_u, self.dim_v(), self.rank)
            }
        };
        cfg.demodulate = self.demodulate;
        cfg
    }

    fn torgb_cfg(&self) -> ModLayerConfig {
        let c_in = *self.channels.last().expect("non-empty");
        let mut cfg = match self.variant {
            ModVariant::Full => ModLayerConfig::full(c_in, self.img_channels, self.dim_u, self.dim_v()),
            ModVariant::LowRank => {
                ModLayerConfig::lowrank(c_in, self.img_channels, self.dim_u, self.dim_v(), self.rank)
            }
        };
        // Output layer maps features to pixels without renormalization.
        cfg.demodulate = false;
        cfg
    }
}

/// Owned generator parameters.
#[derive(Debug, Clone)]
pub struct GeneratorWeights {
    pub cfg: GeneratorConfig,
    pub const_input: Tensor,
    pub blocks: Vec<ModLayerWeights>,
    pub torgb: ModLayerWeights,
    pub motion: MotionWeights,
}

impl GeneratorWeights {
    pub fn init(cfg: GeneratorConfig, init_seed: u64) -> Result<Self> {
        cfg.validate()?;
        let const_input = init_normal(
            init_seed,
            "gen.const",
            vec![cfg.channels[0], cfg.base, cfg.base],
            1.0,
        )?;
        let blocks = (0..cfg.n_blocks())
            .map(|b| ModLayerWeights::init(cfg.block_cfg(b), init_seed, &format!("gen.block{b}")))
            .collect::<Result<Vec<_>>>()?;
        let torgb = ModLayerWeights::init(cfg.torgb_cfg(), init_seed, "gen.torgb")?;
        let motion = MotionWeights::init(&cfg.motion, init_seed, "gen.motion")?;
        Ok(GeneratorWeights { cfg, const_input, blocks, torgb, motion })
    }

    pub fn register(&self, store: &mut ParamStore) {
        store.insert("gen.const", self.const_input.clone());
        for (b, block) in self.blocks.iter().enumerate() {
            block.register(store, &format!("gen.block{b}"));
        }
        self.torgb.register(store, "gen.torgb");
        self.motion.register(store, "gen.motion");
    }

    pub fn from_store(cfg: GeneratorConfig, store: &ParamStore) -> Result<Self> {
        cfg.validate()?;
        let const_input = store
            .get("gen.const")
            .cloned()
            .ok_or_else(|| Error::contract("missing parameter gen.const".to_string()))?;
        let blocks = (0..cfg.n_blocks())
            .map(|b| ModLayerWeights::from_store(store, cfg.block_cfg(b), &format!("gen.block{b}")))
            .collect::<Result<Vec<_>>>()?;
        let torgb = ModLayerWeights::from_store(store, cfg.torgb_cfg(), "gen.torgb")?;
        let motion = MotionWeights::from_store(store, "gen.motion")?;
        Ok(GeneratorWeights { cfg, const_input, blocks, torgb, motion })
    }

    /// Deep-layer parameter names: the deepest `ceil(L/2)` blocks plus the
    /// output head. These are what a warm start loads from a pretrained
    /// checkpoint.
    pub fn deep_layer_prefixes(&self) -> Vec<String> {
        let l = self.cfg.n_blocks();
        let first_deep = l - l.div_ceil(2);
        let mut out: Vec<String> = (first_deep..l).map(|b| format!("gen.block{b}")).collect();
        out.push("gen.torgb".to_string());
        out
    }
}

/// Node-side generator inside one tape.
pub struct GeneratorNodes {
    pub cfg: GeneratorConfig,
    pub const_input: NodeId,
    pub blocks: Vec<ModLayerNodes>,
    pub torgb: ModLayerNodes,
    pub motion: MotionNodes,
    pub track: AnchorTrack,
    feature_memo: HashMap<i64, NodeId>,
}

impl GeneratorNodes {
    pub fn from_params(cfg: GeneratorConfig, params: &ParamNodes) -> Result<Self> {
        let blocks = (0..cfg.n_blocks())
            .map(|b| ModLayerNodes::from_params(params, cfg.block_cfg(b), &format!("gen.block{b}")))
            .collect::<Result<Vec<_>>>()?;
        Ok(GeneratorNodes {
            const_input: params.id("gen.const")?,
            blocks,
            torgb: ModLayerNodes::from_params(params, cfg.torgb_cfg(), "gen.torgb")?,
            motion: MotionNodes::from_params(params, "gen.motion")?,
            track: AnchorTrack::from_config(&cfg.motion),
            feature_memo: HashMap::new(),
            cfg,
        })
    }

    pub fn constants(tape: &mut Tape, weights: &GeneratorWeights) -> Self {
        GeneratorNodes {
            const_input: tape.constant(weights.const_input.clone()),
            blocks: weights.blocks.iter().map(|b| b.constants(tape)).collect(),
            torgb: weights.torgb.constants(tape),
            motion: MotionNodes::constants(tape, &weights.motion),
            track: AnchorTrack::from_config(&weights.cfg.motion),
            feature_memo: HashMap::new(),
            cfg: weights.cfg.clone(),
        }
    }

    /// Number of distinct anchor features materialized on this tape.
    pub fn anchors_materialized(&self) -> usize {
        self.feature_memo.len()
    }

    /// The fused motion embedding `v_t` for one time.
    pub fn motion_embedding(&mut self, tape: &mut Tape, t: f64) -> Result<NodeId> {
        let track = self.track.clone();
        let kernel = self.motion.kernel;
        let memo = &mut self.feature_memo;
        let mut feat = |tape: &mut Tape, i: i64| -> Result<NodeId> {
            if let Some(&id) = memo.get(&i) {
                return Ok(id);
            }
            let id = feature_node(tape, &track, kernel, i)?;
            memo.insert(i, id);
            Ok(id)
        };
        let e = embedding_nodes(tape, &self.cfg.motion, &self.motion, t, &mut feat)?;
        Ok(e.fused)
    }

    /// One frame `I_t = G(u, v_t)`, `[img_channels, H, W]`.
    pub fn frame(&mut self, tape: &mut Tape, u: NodeId, t: f64) -> Result<NodeId> {
        let v = self.motion_embedding(tape, t)?;
        let mut x = self.const_input;
        for (b, block) in self.blocks.clone().iter().enumerate() {
            if b > 0 {
                x = tape.upsample2x(x)?;
            }
            x = modulated_conv_forward(tape, block, x, u, v)?;
            x = tape.leaky_relu(x, 0.2);
        }
        modulated_conv_forward(tape, &self.torgb.clone(), x, u, v)
    }

    /// Frames for several times with a shared content code.
    pub fn frames(&mut self, tape: &mut Tape, u: NodeId, ts: &[f64]) -> Result<Vec<NodeId>> {
        ts.iter().map(|&t| self.frame(tape, u, t)).collect()
    }
}

/// Frozen-weight generation: frames plus the count of anchor features that
/// were materialized (laziness instrumentation).
pub fn generate_frames(weights: &GeneratorWeights, u: &[f64], ts: &[f64]) -> Result<(Vec<Tensor>, usize)> {
    if u.len() != weights.cfg.dim_u {
        return Err(Error::shape(format!(
            "content code has dim {}, generator expects {}",
            u.len(),
            weights.cfg.dim_u
        )));
    }
    let mut tape = Tape::new();
    let mut gen = GeneratorNodes::constants(&mut tape, weights);
    let u_node = tape.constant(Tensor::from_vec(u.to_vec()));
    let ids = gen.frames(&mut tape, u_node, ts)?;
    let frames = ids.into_iter().map(|id| tape.value(id).clone()).collect();
    Ok((frames, gen.anchors_materialized()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngKey;

    fn tiny_cfg() -> GeneratorConfig {
        GeneratorConfig {
            dim_u: 8,
            channels: vec![8, 8],
            base: 4,
            resolution: 8,
            img_channels: 1,
            motion: MotionConfig {
                seed: 5,
                code_dim: 6,
                interval: 16.0,
                order: 3,
                mode: crate::motion::MotionMode::BSpline,
                hidden: 8,
            },
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn resolution_mismatch_is_rejected() {
        let mut cfg = tiny_cfg();
        cfg.resolution = 16;
        assert!(GeneratorWeights::init(cfg, 1).is_err());
    }

    #[test]
    fn same_inputs_give_identical_frames_and_duplicates_duplicate() {
        let w = GeneratorWeights::init(tiny_cfg(), 3).unwrap();
        let u = RngKey::new(1, "u", 0).normal_vec(8);
        let (f1, _) = generate_frames(&w, &u, &[7.0, 7.0, 21.5]).unwrap();
        let (f2, _) = generate_frames(&w, &u, &[7.0, 7.0, 21.5]).unwrap();
        assert_eq!(f1[0].data(), f2[0].data());
        assert_eq!(f1[0].data(), f1[1].data(), "duplicate t duplicates the frame");
        assert_ne!(f1[0].data(), f1[2].data());
        assert_eq!(f1[0].shape(), &[1, 8, 8]);
    }

    #[test]
    fn outputs_stay_finite_over_random_codes_and_times() {
        let w = GeneratorWeights::init(tiny_cfg(), 4).unwrap();
        for s in 0..25 {
            let u = RngKey::new(s, "u", 1).normal_vec(8);
            let t = RngKey::new(s, "t", 1).uniform(0) * 2000.0;
            let (frames, _) = generate_frames(&w, &u, &[t]).unwrap();
            frames[0].check_finite("generator output").unwrap();
        }
    }

    #[test]
    fn store_roundtrip_preserves_outputs() {
        let w = GeneratorWeights::init(tiny_cfg(), 9).unwrap();
        let mut store = ParamStore::new();
        w.register(&mut store);
        let w2 = GeneratorWeights::from_store(tiny_cfg(), &store).unwrap();
        let u = RngKey::new(2, "u", 0).normal_vec(8);
        let (a, _) = generate_frames(&w, &u, &[3.25]).unwrap();
        let (b, _) = generate_frames(&w2, &u, &[3.25]).unwrap();
        assert_eq!(a[0].data(), b[0].data());
    }

    #[test]
    fn far_future_generation_touches_few_anchors() {
        let w = GeneratorWeights::init(tiny_cfg(), 9).unwrap();
        let u = RngKey::new(2, "u", 0).normal_vec(8);
        let t0 = 1.0e6;
        let ts: Vec<f64> = (0..16).map(|i| t0 + i as f64).collect();
        let (frames, anchors) = generate_frames(&w, &u, &ts).unwrap();
        assert_eq!(frames.len(), 16);
        // order k = 3: at most k + 2 features even with an interval crossing
        assert!(anchors <= 3 + 2, "materialized {anchors} anchors");
    }

    #[test]
    fn deep_layer_prefixes_cover_the_deepest_half() {
        let mut cfg = tiny_cfg();
        cfg.channels = vec![8, 8, 8, 8];
        cfg.resolution = 32;
        let w = GeneratorWeights::init(cfg, 1).unwrap();
        assert_eq!(
            w.deep_layer_prefixes(),
            vec!["gen.block2".to_string(), "gen.block3".to_string(), "gen.torgb".to_string()]
        );
    }
}
