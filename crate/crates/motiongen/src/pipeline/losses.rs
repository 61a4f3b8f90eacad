//! Non-saturating logistic GAN losses, the R1 gradient penalty, and sparse
//! timestep sampling.

use crate::error::Result;
use crate::numerics::{NodeId, RngKey, Tape};

/// `loss_D = softplus(-l_real) + softplus(l_fake)`,
/// `loss_G = softplus(-l_fake)`.
pub fn gan_losses(tape: &mut Tape, l_real: NodeId, l_fake: NodeId) -> Result<(NodeId, NodeId)> {
    let neg_fake = tape.neg(l_fake);
    let loss_g = tape.softplus(neg_fake);
    let neg_real = tape.neg(l_real);
    let d_real = tape.softplus(neg_real);
    let d_fake = tape.softplus(l_fake);
    let loss_d = tape.add(d_real, d_fake)?;
    Ok((loss_g, loss_d))
}

/// `gamma/2 * |grad_x logit|^2` over the given input leaves.
///
/// The gradient is produced as tape nodes, so the returned penalty is itself
/// differentiable with respect to everything upstream (second-order).
pub fn r1_penalty(tape: &mut Tape, logit: NodeId, inputs: &[NodeId], gamma: f64) -> Result<NodeId> {
    let grads = tape.backward_wrt(logit, inputs)?;
    let mut acc: Option<NodeId> = None;
    for &x in inputs {
        if let Some(g) = grads.node(x) {
            let sq = tape.sum_squares(g);
            acc = Some(match acc {
                None => sq,
                Some(prev) => tape.add(prev, sq)?,
            });
        }
    }
    let total = match acc {
        Some(t) => t,
        None => tape.scalar(0.0),
    };
    Ok(tape.mul_scalar(total, gamma / 2.0))
}

/// Sorted sparse timestamps: `t_0` uniform over the usable timeline, then
/// integer gaps uniform in `[1, 16]`.
pub fn sample_timesteps(seed: u64, stream: &str, index: i64, n_t: usize, timeline: f64) -> Vec<f64> {
    let key = RngKey::new(seed, stream, index);
    let max_span = 16.0 * (n_t as f64 - 1.0);
    let usable = (timeline - max_span - 1.0).max(1.0);
    let mut t = key.uniform(0) * usable;
    let mut out = Vec::with_capacity(n_t);
    out.push(t);
    for j in 1..n_t {
        let gap = 1 + key.uniform_int(j as u64, 16);
        t += gap as f64;
        out.push(t);
    }
    out
}
