//! Minimal dense-tensor engine: tensors, a reverse-mode tape, Adam,
//! counter-based RNG, a finite-difference oracle, and tensor file I/O.

pub mod adam;
pub mod gradcheck;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod params;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{finite_diff_gradient, relative_error};
pub use kernels::Pad1d;
pub use params::{ParamNodes, ParamStore};
pub use rng::RngKey;
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::Tensor;

use crate::error::Result;

/// He-style initializer: `N(0, scale^2 / fan_in)` entries keyed by name.
pub fn init_normal(seed: u64, name: &str, shape: Vec<usize>, std: f64) -> Result<Tensor> {
    let n: usize = shape.iter().product();
    let data = RngKey::new(seed, name, 0)
        .normal_vec(n)
        .into_iter()
        .map(|v| v * std)
        .collect();
    Tensor::new(shape, data)
}
