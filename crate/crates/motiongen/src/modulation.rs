//! Style-modulated 3x3 convolution.
//!
//! The full variant scales the base weight per input channel with a style
//! predicted from the joint content/motion code. The low-rank variant splits
//! the weight into a content path `W_co * M_co(u)` and a motion path
//! `W_mo * M_mo(v)` where `W_mo = U V` has rank at most `r`, limiting how
//! much content the motion code can express. Demodulation rescales each
//! output filter to unit norm (StyleGAN2 convention) and is on by default.

use crate::error::{Error, Result};
use crate::nn::{LinearNodes, LinearWeights};
use crate::numerics::{init_normal, NodeId, ParamNodes, ParamStore, Tape, Tensor};

const DEMOD_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModVariant {
    Full,
    LowRank,
}

/// Static description of one modulated layer.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ModLayerConfig {
    pub c_in: usize,
    pub c_out: usize,
    pub dim_u: usize,
    pub dim_v: usize,
    pub variant: ModVariant,
    /// Motion-path rank; defaults to `ceil(c_in / 8)`.
    pub rank: usize,
    pub demodulate: bool,
}

impl ModLayerConfig {
    pub fn full(c_in: usize, c_out: usize, dim_u: usize, dim_v: usize) -> Self {
        ModLayerConfig {
            c_in,
            c_out,
            dim_u,
            dim_v,
            variant: ModVariant::Full,
            rank: c_in.div_ceil(8),
            demodulate: true,
        }
    }

    pub fn lowrank(c_in: usize, c_out: usize, dim_u: usize, dim_v: usize, rank: Option<usize>) -> Self {
        ModLayerConfig {
            c_in,
            c_out,
            dim_u,
            dim_v,
            variant: ModVariant::LowRank,
            rank: rank.unwrap_or_else(|| c_in.div_ceil(8)),
            demodulate: true,
        }
    }
}

/// Owned weights of one modulated layer.
///
/// Full variant: base weight `W` plus one affine over `u ++ v`. Low-rank
/// variant: content weight `W_co` with affine over `u`, and a motion weight
/// `W_mo = U V` with its own affine over `v`.
#[derive(Debug, Clone)]
pub struct ModLayerWeights {
    pub cfg: ModLayerConfig,
    pub weight: Tensor,
    pub affine: LinearWeights,
    pub u: Option<Tensor>,
    pub v: Option<Tensor>,
    pub affine_mo: Option<LinearWeights>,
    pub bias: Tensor,
}

impl ModLayerWeights {
    pub fn init(cfg: ModLayerConfig, seed: u64, name: &str) -> Result<Self> {
        let w_std = 1.0 / ((cfg.c_in * 9) as f64).sqrt();
        let weight = init_normal(seed, &format!("{name}.weight"), vec![cfg.c_out, cfg.c_in, 3, 3], w_std)?;
        let (affine, u, v, affine_mo) = match cfg.variant {
            ModVariant::Full => {
                let affine = LinearWeights::init(
                    seed,
                    &format!("{name}.affine"),
                    cfg.dim_u + cfg.dim_v,
                    cfg.c_in,
                    1.0 / ((cfg.dim_u + cfg.dim_v) as f64).sqrt(),
                    1.0,
                )?;
                (affine, None, None, None)
            }
            ModVariant::LowRank => {
                let affine = LinearWeights::init(
                    seed,
                    &format!("{name}.affine"),
                    cfg.dim_u,
                    cfg.c_in,
                    1.0 / (cfg.dim_u as f64).sqrt(),
                    1.0,
                )?;
                let r_std = 1.0 / (cfg.rank as f64).sqrt();
                let u = init_normal(seed, &format!("{name}.u"), vec![cfg.c_out, cfg.rank], r_std)?;
                let v = init_normal(seed, &format!("{name}.v"), vec![cfg.rank, cfg.c_in * 9], r_std)?;
                let affine_mo = LinearWeights::init(
                    seed,
                    &format!("{name}.affine_mo"),
                    cfg.dim_v,
                    cfg.c_in,
                    1.0 / (cfg.dim_v as f64).sqrt(),
                    1.0,
                )?;
                (affine, Some(u), Some(v), Some(affine_mo))
            }
        };
        let bias = Tensor::zeros(vec![cfg.c_out]);
        Ok(ModLayerWeights { cfg, weight, affine, u, v, affine_mo, bias })
    }

    pub fn register(&self, store: &mut ParamStore, prefix: &str) {
        store.insert(format!("{prefix}.weight"), self.weight.clone());
        self.affine.register(store, &format!("{prefix}.affine"));
        if let (Some(u), Some(v), Some(mo)) = (&self.u, &self.v, &self.affine_mo) {
            store.insert(format!("{prefix}.u"), u.clone());
            store.insert(format!("{prefix}.v"), v.clone());
            mo.register(store, &format!("{prefix}.affine_mo"));
        }
        store.insert(format!("{prefix}.bias"), self.bias.clone());
    }

    pub fn from_store(store: &ParamStore, cfg: ModLayerConfig, prefix: &str) -> Result<Self> {
        let get = |n: &str| -> Result<Tensor> {
            store
                .get(&format!("{prefix}.{n}"))
                .cloned()
                .ok_or_else(|| Error::contract(format!("missing parameter {prefix}.{n}")))
        };
        let (u, v, affine_mo) = match cfg.variant {
            ModVariant::Full => (None, None, None),
            ModVariant::LowRank => (
                Some(get("u")?),
                Some(get("v")?),
                Some(LinearWeights::from_store(store, &format!("{prefix}.affine_mo"))?),
            ),
        };
        Ok(ModLayerWeights {
            cfg,
            weight: get("weight")?,
            affine: LinearWeights::from_store(store, &format!("{prefix}.affine"))?,
            u,
            v,
            affine_mo,
            bias: get("bias")?,
        })
    }

    pub fn constants(&self, tape: &mut Tape) -> ModLayerNodes {
        ModLayerNodes {
            cfg: self.cfg.clone(),
            weight: tape.constant(self.weight.clone()),
            affine: self.affine.constants(tape),
            u: self.u.as_ref().map(|t| tape.constant(t.clone())),
            v: self.v.as_ref().map(|t| tape.constant(t.clone())),
            affine_mo: self.affine_mo.as_ref().map(|a| a.constants(tape)),
            bias: tape.constant(self.bias.clone()),
        }
    }

    /// The materialized motion weight `U V`, matricized as `[C_out, C_in*9]`.
    pub fn motion_weight_matrix(&self) -> Result<Tensor> {
        let (u, v) = match (&self.u, &self.v) {
            (Some(u), Some(v)) => (u, v),
            _ => return Err(Error::contract("motion weight only exists in low-rank layers".to_string())),
        };
        let mut tape = Tape::new();
        let un = tape.constant(u.clone());
        let vn = tape.constant(v.clone());
        let m = tape.matmul(un, vn)?;
        Ok(tape.value(m).clone())
    }
}

/// Node-side view of one modulated layer.
#[derive(Clone)]
pub struct ModLayerNodes {
    pub cfg: ModLayerConfig,
    pub weight: NodeId,
    pub affine: LinearNodes,
    pub u: Option<NodeId>,
    pub v: Option<NodeId>,
    pub affine_mo: Option<LinearNodes>,
    pub bias: NodeId,
}

impl ModLayerNodes {
    pub fn from_params(params: &ParamNodes, cfg: ModLayerConfig, prefix: &str) -> Result<Self> {
        let (u, v, affine_mo) = match cfg.variant {
            ModVariant::Full => (None, None, None),
            ModVariant::LowRank => (
                Some(params.id(&format!("{prefix}.u"))?),
                Some(params.id(&format!("{prefix}.v"))?),
                Some(LinearNodes::from_params(params, &format!("{prefix}.affine_mo"))?),
            ),
        };
        Ok(ModLayerNodes {
            weight: params.id(&format!("{prefix}.weight"))?,
            affine: LinearNodes::from_params(params, &format!("{prefix}.affine"))?,
            u,
            v,
            affine_mo,
            bias: params.id(&format!("{prefix}.bias"))?,
            cfg,
        })
    }
}

fn scale_in_channels(tape: &mut Tape, w: NodeId, style: NodeId) -> Result<NodeId> {
    let shape = tape.value(w).shape().to_vec();
    let s = tape.broadcast_axis(style, &shape, 1)?;
    tape.mul(w, s)
}

fn demodulate(tape: &mut Tape, w: NodeId) -> Result<NodeId> {
    let shape = tape.value(w).shape().to_vec();
    let sq = tape.square(w);
    let sums = tape.reduce_axis(sq, 0)?;
    let sums = tape.add_scalar(sums, DEMOD_EPS);
    let root = tape.sqrt(sums);
    let d = tape.recip(root);
    let d = tape.broadcast_axis(d, &shape, 0)?;
    tape.mul(w, d)
}

/// The per-sample weight `W'` for content code `u` and motion code `v`.
pub fn modulated_weight(tape: &mut Tape, layer: &ModLayerNodes, u: NodeId, v: NodeId) -> Result<NodeId> {
    check_code_dims(tape, layer, u, v)?;
    let w = match layer.cfg.variant {
        ModVariant::Full => {
            let uv = tape.concat(&[u, v])?;
            let style = layer.affine.forward(tape, uv)?;
            scale_in_channels(tape, layer.weight, style)?
        }
        ModVariant::LowRank => {
            let style_co = layer.affine.forward(tape, u)?;
            let style_mo = layer
                .affine_mo
                .as_ref()
                .ok_or_else(|| Error::contract("low-rank layer missing motion affine".to_string()))?
                .forward(tape, v)?;
            let (un, vn) = (
                layer.u.ok_or_else(|| Error::contract("low-rank layer missing U".to_string()))?,
                layer.v.ok_or_else(|| Error::contract("low-rank layer missing V".to_string()))?,
            );
            let w_mo_flat = tape.matmul(un, vn)?;
            let w_mo = tape.reshape(w_mo_flat, vec![layer.cfg.c_out, layer.cfg.c_in, 3, 3])?;
            let content = scale_in_channels(tape, layer.weight, style_co)?;
            let motion = scale_in_channels(tape, w_mo, style_mo)?;
            tape.add(content, motion)?
        }
    };
    if layer.cfg.demodulate {
        demodulate(tape, w)
    } else {
        Ok(w)
    }
}

fn check_code_dims(tape: &Tape, layer: &ModLayerNodes, u: NodeId, v: NodeId) -> Result<()> {
    let (du, dv) = (tape.value(u).numel(), tape.value(v).numel());
    if du != layer.cfg.dim_u || dv != layer.cfg.dim_v {
        return Err(Error::shape(format!(
            "modulation codes have dims ({du}, {dv}), layer expects ({}, {})",
            layer.cfg.dim_u, layer.cfg.dim_v
        )));
    }
    Ok(())
}

/// Modulated convolution: `conv2d(x, W'(u, v)) + bias`, stride 1.
pub fn modulated_conv_forward(
    tape: &mut Tape,
    layer: &ModLayerNodes,
    x: NodeId,
    u: NodeId,
    v: NodeId,
) -> Result<NodeId> {
    let w = modulated_weight(tape, layer, u, v)?;
    let y = tape.conv2d(x, w, 1)?;
    tape.add(y, layer.bias)
}
