//! Continuous-time motion representations for toy video GANs.
//!
//! The crate builds a desk-scale adversarial video pipeline around three
//! ideas: a wave positional embedding with parameters predicted from anchor
//! features, anchor interpolation that is either linear or B-spline based
//! (the spline variant is first-order smooth across anchors), and a
//! discriminator with temporal channel shifting plus a time-conditioned
//! logit. A low-rank split of the modulated convolution weights limits how
//! much content the motion code can carry.
//!
//! Modules:
//! - [`numerics`]: tensors, reverse-mode tape, Adam, counter-based RNG,
//!   finite differences, tensor file I/O.
//! - [`motion`]: anchor tracks, wave embedding, linear/B-spline
//!   interpolation, continuity analysis.
//! - [`temporal`]: temporal shift, frame fusion, time-conditioned logit.
//! - [`modulation`]: modulated convolution, full and low-rank variants.
//! - [`pipeline`]: synthetic video source, tiny generator/discriminator,
//!   adversarial trainer.
//! - [`metrics`]: Fréchet-distance proxies, jitter scores, sticking probe.
//!
//! See the `examples/` directory for runnable entry points per capability,
//! and the `motiongen` binary for the file-oriented CLI.

pub mod error;
pub mod metrics;
pub mod modulation;
pub mod motion;
pub mod nn;
pub mod numerics;
pub mod pipeline;
pub mod temporal;

pub use error::{Error, Result};
