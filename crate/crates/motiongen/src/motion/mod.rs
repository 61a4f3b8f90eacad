//! Continuous-time motion representation.
//!
//! A seeded track of anchor codes `A_i` sits on timestamps `t_i = i * interval`.
//! A width-3 temporal convolution turns codes into anchor features `a_i`.
//! At a continuous time `t`, the motion embedding combines:
//!
//! - `v_pe`: a wave `<alpha sin(beta t + gamma), alpha cos(beta t + gamma)>`
//!   whose parameters are predicted from a reference anchor feature, and
//! - `v_me`: anchor features interpolated at `t` (linearly between the
//!   bracketing anchors, or as a B-spline blend which is first-order smooth
//!   across anchors).
//!
//! The track extends lazily over all signed indices, so any `t` is valid and
//! generation never materializes anchor history.

pub mod bspline;
pub mod continuity;

use std::collections::HashMap;

pub use bspline::{blend_weights, bspline_basis, locate_interval, BSplineConfig};

use crate::error::{Error, Result};
use crate::nn::{MlpNodes, MlpWeights};
use crate::numerics::{init_normal, NodeId, Pad1d, ParamNodes, ParamStore, RngKey, Tape, Tensor};

/// Interpolation scheme for the motion embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionMode {
    Linear,
    BSpline,
}

/// Construction parameters for the motion path.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MotionConfig {
    pub seed: u64,
    /// Dimension `D` of anchor codes and features.
    pub code_dim: usize,
    /// Frames between consecutive anchors.
    pub interval: f64,
    /// B-spline order `k` (ignored in linear mode).
    pub order: usize,
    pub mode: MotionMode,
    /// Hidden width of the wave-head MLPs.
    pub hidden: usize,
}

impl Default for MotionConfig {
    fn default() -> Self {
        MotionConfig {
            seed: 0,
            code_dim: 16,
            interval: 256.0,
            order: 3,
            mode: MotionMode::Linear,
            hidden: 16,
        }
    }
}

impl MotionConfig {
    pub fn spline(&self) -> Result<BSplineConfig> {
        BSplineConfig::new(self.order, self.interval)
    }
}

/// Seeded, lazily-extendable sequence of anchor codes.
///
/// `code(i)` is a pure function of `(seed, i)`; there is nothing to
/// materialize ahead of time and nothing that caching could change.
#[derive(Debug, Clone)]
pub struct AnchorTrack {
    pub seed: u64,
    pub code_dim: usize,
    pub interval: f64,
}

impl AnchorTrack {
    pub fn new(seed: u64, code_dim: usize, interval: f64) -> Self {
        AnchorTrack { seed, code_dim, interval }
    }

    pub fn from_config(cfg: &MotionConfig) -> Self {
        AnchorTrack::new(cfg.seed, cfg.code_dim, cfg.interval)
    }

    /// Raw anchor code `A_i`.
    pub fn code(&self, i: i64) -> Vec<f64> {
        RngKey::new(self.seed, "anchor", i).normal_vec(self.code_dim)
    }

    pub fn timestamp(&self, i: i64) -> f64 {
        i as f64 * self.interval
    }
}

// ── learnable weights ────────────────────────────────────────────────────

/// Three wave-head MLPs (amplitude, frequency, phase) plus the anchor
/// convolution kernel.
#[derive(Debug, Clone)]
pub struct MotionWeights {
    /// Width-3 temporal kernel `[3, D, D]`.
    pub kernel: Tensor,
    pub alpha: MlpWeights,
    pub beta: MlpWeights,
    pub gamma: MlpWeights,
}

impl MotionWeights {
    /// Fresh weights keyed by `(seed, stream)` names under `prefix`.
    pub fn init(cfg: &MotionConfig, init_seed: u64, prefix: &str) -> Result<Self> {
        let d = cfg.code_dim;
        let kernel_std = 1.0 / (3.0 * d as f64).sqrt();
        let kernel = init_normal(init_seed, &format!("{prefix}.kernel"), vec![3, d, d], kernel_std)?;
        let alpha = MlpWeights::init(init_seed, &format!("{prefix}.alpha"), d, cfg.hidden, d)?;
        let beta = MlpWeights::init(init_seed, &format!("{prefix}.beta"), d, cfg.hidden, d)?;
        let gamma = MlpWeights::init(init_seed, &format!("{prefix}.gamma"), d, cfg.hidden, d)?;
        let mut w = MotionWeights { kernel, alpha, beta, gamma };
        // Amplitude biased to one so the wave term is present from init;
        // frequency biased low (softplus(-2) ~ 0.13 rad/frame).
        w.alpha.b2 = Tensor::ones(vec![d]);
        w.beta.b2 = Tensor::full(vec![d], -2.0);
        Ok(w)
    }

    pub fn register(&self, store: &mut ParamStore, prefix: &str) {
        store.insert(format!("{prefix}.kernel"), self.kernel.clone());
        self.alpha.register(store, &format!("{prefix}.alpha"));
        self.beta.register(store, &format!("{prefix}.beta"));
        self.gamma.register(store, &format!("{prefix}.gamma"));
    }

    pub fn from_store(store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(MotionWeights {
            kernel: store
                .get(&format!("{prefix}.kernel"))
                .cloned()
                .ok_or_else(|| Error::contract(format!("missing parameter {prefix}.kernel")))?,
            alpha: MlpWeights::from_store(store, &format!("{prefix}.alpha"))?,
            beta: MlpWeights::from_store(store, &format!("{prefix}.beta"))?,
            gamma: MlpWeights::from_store(store, &format!("{prefix}.gamma"))?,
        })
    }
}

// ── tape-side assembly ───────────────────────────────────────────────────

/// Node-side view of [`MotionWeights`] inside one tape.
#[derive(Clone, Copy)]
pub struct MotionNodes {
    pub kernel: NodeId,
    pub alpha: MlpNodes,
    pub beta: MlpNodes,
    pub gamma: MlpNodes,
}

impl MotionNodes {
    /// Reference trainable parameters registered under `prefix`.
    pub fn from_params(params: &ParamNodes, prefix: &str) -> Result<Self> {
        Ok(MotionNodes {
            kernel: params.id(&format!("{prefix}.kernel"))?,
            alpha: MlpNodes::from_params(params, &format!("{prefix}.alpha"))?,
            beta: MlpNodes::from_params(params, &format!("{prefix}.beta"))?,
            gamma: MlpNodes::from_params(params, &format!("{prefix}.gamma"))?,
        })
    }

    /// Insert frozen weights as constants (evaluation path).
    pub fn constants(tape: &mut Tape, w: &MotionWeights) -> Self {
        MotionNodes {
            kernel: tape.constant(w.kernel.clone()),
            alpha: w.alpha.constants(tape),
            beta: w.beta.constants(tape),
            gamma: w.gamma.constants(tape),
        }
    }
}

/// Anchor feature `a_i` on the tape: center output of the width-3 temporal
/// convolution over `(A_{i-1}, A_i, A_{i+1})`.
pub fn feature_node(tape: &mut Tape, track: &AnchorTrack, kernel: NodeId, i: i64) -> Result<NodeId> {
    let d = track.code_dim;
    let mut window = Vec::with_capacity(3 * d);
    for j in [i - 1, i, i + 1] {
        window.extend(track.code(j));
    }
    let win = tape.constant(Tensor::new(vec![3, d], window)?);
    let conv = tape.conv1d(win, kernel, Pad1d::NeighborExtend)?;
    let flat = tape.reshape(conv, vec![3 * d])?;
    tape.slice_vec(flat, d, d)
}

/// The wave positional embedding split into sin/cos halves.
pub struct WaveNodes {
    pub sin_half: NodeId,
    pub cos_half: NodeId,
}

/// `<alpha sin(beta t + gamma), alpha cos(beta t + gamma)>` with the three
/// parameter vectors predicted from `a_ref`. The frequency passes through a
/// softplus so it stays non-negative.
pub fn wave_nodes(tape: &mut Tape, m: &MotionNodes, a_ref: NodeId, t: f64) -> Result<WaveNodes> {
    let alpha = m.alpha.forward(tape, a_ref)?;
    let beta_raw = m.beta.forward(tape, a_ref)?;
    let beta = tape.softplus(beta_raw);
    let gamma = m.gamma.forward(tape, a_ref)?;
    let bt = tape.mul_scalar(beta, t);
    let arg = tape.add(bt, gamma)?;
    let s = tape.sin(arg);
    let c = tape.cos(arg);
    Ok(WaveNodes { sin_half: tape.mul(alpha, s)?, cos_half: tape.mul(alpha, c)? })
}

/// Pure-value wave components for a fixed parameter triple. Used by tests
/// that force exact alpha/beta/gamma values.
pub fn wave_components(alpha: &[f64], beta: &[f64], gamma: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
    let s = alpha
        .iter()
        .zip(beta)
        .zip(gamma)
        .map(|((&a, &b), &g)| a * (b * t + g).sin())
        .collect();
    let c = alpha
        .iter()
        .zip(beta)
        .zip(gamma)
        .map(|((&a, &b), &g)| a * (b * t + g).cos())
        .collect();
    (s, c)
}

/// Linear interpolation between the bracketing anchor features, as values.
/// `v(t_l) = a_l` and `v(t) -> a_r` as `t -> t_r`.
pub fn lerp_values(a_l: &[f64], a_r: &[f64], t: f64, t_l: f64, t_r: f64) -> Result<Vec<f64>> {
    if !(t_l <= t && t < t_r) {
        return Err(Error::domain(format!("t = {t} outside interpolation interval [{t_l}, {t_r})")));
    }
    let u = (t - t_l) / (t_r - t_l);
    Ok(a_l.iter().zip(a_r).map(|(&x, &y)| (1.0 - u) * x + u * y).collect())
}

/// Tape nodes of one assembled motion embedding.
pub struct EmbeddingNodes {
    /// `[2D]`: sin half then cos half.
    pub v_pe: NodeId,
    /// `[D]`: interpolated anchor features at `t`.
    pub v_me: NodeId,
    /// `[2D]`: `(v_me + sin half) ++ cos half` — what the generator consumes.
    pub fused: NodeId,
}

/// Assemble `v_t` on the tape. `feat` maps an anchor index to its feature
/// node (memoized by the caller so several frames share anchors).
pub fn embedding_nodes(
    tape: &mut Tape,
    cfg: &MotionConfig,
    m: &MotionNodes,
    t: f64,
    feat: &mut dyn FnMut(&mut Tape, i64) -> Result<NodeId>,
) -> Result<EmbeddingNodes> {
    if !t.is_finite() {
        return Err(Error::domain(format!("motion embedding at non-finite t = {t}")));
    }
    let (a_ref, v_me) = match cfg.mode {
        MotionMode::Linear => {
            let l = locate_interval(t, cfg.interval)?;
            let a_l = feat(tape, l)?;
            let a_r = feat(tape, l + 1)?;
            let u = (t - l as f64 * cfg.interval) / cfg.interval;
            let left = tape.mul_scalar(a_l, 1.0 - u);
            let right = tape.mul_scalar(a_r, u);
            let v_me = tape.add(left, right)?;
            (a_l, v_me)
        }
        MotionMode::BSpline => {
            let weights = blend_weights(&cfg.spline()?, t)?;
            let mut acc: Option<NodeId> = None;
            for (i, w) in weights {
                if w == 0.0 {
                    continue;
                }
                let f = feat(tape, i)?;
                let scaled = tape.mul_scalar(f, w);
                acc = Some(match acc {
                    None => scaled,
                    Some(prev) => tape.add(prev, scaled)?,
                });
            }
            let blended = acc.ok_or_else(|| Error::numerics("empty spline blend".to_string()))?;
            // The smooth blend replaces the discretized feature everywhere:
            // both the interpolated embedding and the wave reference use it.
            (blended, blended)
        }
    };
    let wave = wave_nodes(tape, m, a_ref, t)?;
    let v_pe = tape.concat(&[wave.sin_half, wave.cos_half])?;
    let me_plus_sin = tape.add(v_me, wave.sin_half)?;
    let fused = tape.concat(&[me_plus_sin, wave.cos_half])?;
    Ok(EmbeddingNodes { v_pe, v_me, fused })
}

// ── evaluation session ───────────────────────────────────────────────────

/// One assembled motion embedding, as values.
#[derive(Debug, Clone)]
pub struct MotionEmbedding {
    pub t: f64,
    pub mode: MotionMode,
    pub v_pe: Vec<f64>,
    pub v_me: Vec<f64>,
    pub fused: Vec<f64>,
}

/// Frozen-weight evaluation session with a lazy anchor-feature cache.
///
/// Values are pure functions of `(track seed, weights, t)`; the cache only
/// avoids recomputation and its peak size is instrumented so callers can
/// verify that long-horizon generation touches O(order) anchors.
pub struct MotionEval<'a> {
    pub cfg: &'a MotionConfig,
    pub track: AnchorTrack,
    weights: &'a MotionWeights,
    features: HashMap<i64, Vec<f64>>,
    peak_cache: usize,
}

impl<'a> MotionEval<'a> {
    pub fn new(cfg: &'a MotionConfig, weights: &'a MotionWeights) -> Self {
        MotionEval {
            cfg,
            track: AnchorTrack::from_config(cfg),
            weights,
            features: HashMap::new(),
            peak_cache: 0,
        }
    }

    /// Largest number of anchor features simultaneously cached.
    pub fn peak_cache(&self) -> usize {
        self.peak_cache
    }

    /// Anchor feature `a_i`, cached.
    pub fn feature(&mut self, i: i64) -> Result<Vec<f64>> {
        if let Some(f) = self.features.get(&i) {
            return Ok(f.clone());
        }
        let mut tape = Tape::new();
        let kernel = tape.constant(self.weights.kernel.clone());
        let node = feature_node(&mut tape, &self.track, kernel, i)?;
        let value = tape.value(node).data().to_vec();
        self.features.insert(i, value.clone());
        self.peak_cache = self.peak_cache.max(self.features.len());
        Ok(value)
    }

    /// List of features for a contiguous index range (inclusive).
    pub fn anchor_features(&mut self, i_lo: i64, i_hi: i64) -> Result<Vec<Vec<f64>>> {
        if i_lo > i_hi {
            return Err(Error::contract(format!("anchor range [{i_lo}, {i_hi}] is empty")));
        }
        (i_lo..=i_hi).map(|i| self.feature(i)).collect()
    }

    /// The B-spline blended anchor feature at `t` (bspline mode's `v_me`).
    pub fn blended_feature(&mut self, t: f64) -> Result<Vec<f64>> {
        let weights = blend_weights(&self.cfg.spline()?, t)?;
        let d = self.cfg.code_dim;
        let mut acc = vec![0.0; d];
        for (i, w) in weights {
            if w == 0.0 {
                continue;
            }
            let f = self.feature(i)?;
            for (a, v) in acc.iter_mut().zip(&f) {
                *a += w * v;
            }
        }
        Ok(acc)
    }

    /// Linearly interpolated anchor feature at `t` (linear mode's `v_me`).
    pub fn lerp_feature(&mut self, t: f64) -> Result<Vec<f64>> {
        let l = locate_interval(t, self.cfg.interval)?;
        let a_l = self.feature(l)?;
        let a_r = self.feature(l + 1)?;
        lerp_values(&a_l, &a_r, t, self.track.timestamp(l), self.track.timestamp(l + 1))
    }

    /// Full motion embedding at `t` under the session's mode.
    pub fn embedding(&mut self, t: f64) -> Result<MotionEmbedding> {
        // Warm the cache through the same lazy path the tape will use.
        match self.cfg.mode {
            MotionMode::Linear => {
                let l = locate_interval(t, self.cfg.interval)?;
                self.feature(l)?;
                self.feature(l + 1)?;
            }
            MotionMode::BSpline => {
                for (i, _) in blend_weights(&self.cfg.spline()?, t)? {
                    self.feature(i)?;
                }
            }
        }
        let mut tape = Tape::new();
        let nodes = MotionNodes::constants(&mut tape, self.weights);
        let features = &self.features;
        let d = self.cfg.code_dim;
        let mut feat = |tape: &mut Tape, i: i64| -> Result<NodeId> {
            let v = features
                .get(&i)
                .ok_or_else(|| Error::contract(format!("feature {i} not warmed")))?;
            Ok(tape.constant(Tensor::new(vec![d], v.clone())?))
        };
        let e = embedding_nodes(&mut tape, self.cfg, &nodes, t, &mut feat)?;
        Ok(MotionEmbedding {
            t,
            mode: self.cfg.mode,
            v_pe: tape.value(e.v_pe).data().to_vec(),
            v_me: tape.value(e.v_me).data().to_vec(),
            fused: tape.value(e.fused).data().to_vec(),
        })
    }

    /// Fused embeddings over a sorted grid, one row per grid point.
    pub fn trajectory(&mut self, t_grid: &[f64]) -> Result<continuity::Trajectory> {
        if t_grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::config("trajectory grid must be sorted".to_string()));
        }
        let mut rows = Vec::with_capacity(t_grid.len());
        for &t in t_grid {
            rows.push(self.embedding(t)?.fused);
        }
        Ok(continuity::Trajectory { ts: t_grid.to_vec(), rows })
    }
}
