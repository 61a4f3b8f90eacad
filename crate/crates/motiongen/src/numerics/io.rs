//! Tensor and checkpoint file formats.
//!
//! A tensor `name` is stored as `name.bin` (little-endian IEEE-754 float64
//! payload) next to `name.json` (`{"shape":[...],"dtype":"f64"}`). A
//! checkpoint is a directory of such pairs plus a `manifest.json` holding
//! the parameter names in load order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Sidecar {
    shape: Vec<usize>,
    dtype: String,
}

pub fn save_tensor(dir: &Path, name: &str, t: &Tensor) -> Result<()> {
    let mut bytes = Vec::with_capacity(t.numel() * 8);
    for v in t.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(dir.join(format!("{name}.bin")), bytes)?;
    let sidecar = Sidecar { shape: t.shape().to_vec(), dtype: "f64".to_string() };
    fs::write(dir.join(format!("{name}.json")), serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(())
}

pub fn load_tensor(dir: &Path, name: &str) -> Result<Tensor> {
    let sidecar: Sidecar =
        serde_json::from_slice(&fs::read(dir.join(format!("{name}.json")))?)?;
    if sidecar.dtype != "f64" {
        return Err(Error::checkpoint(format!(
            "tensor {name}: unsupported dtype {}",
            sidecar.dtype
        )));
    }
    let bytes = fs::read(dir.join(format!("{name}.bin")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::checkpoint(format!("tensor {name}: truncated payload")));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Tensor::new(sidecar.shape, data)
        .map_err(|e| Error::checkpoint(format!("tensor {name}: {e}")))
}

/// Write all parameters of `store` into `dir` (created if missing).
pub fn save_checkpoint(dir: &Path, store: &ParamStore) -> Result<()> {
    fs::create_dir_all(dir)?;
    for name in store.names() {
        save_tensor(dir, name, store.get(name).expect("named parameter"))?;
    }
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&store.names())?)?;
    Ok(())
}

/// Read the parameter names stored in a checkpoint, in load order.
pub fn checkpoint_names(dir: &Path) -> Result<Vec<String>> {
    let names: Vec<String> = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    Ok(names)
}

/// Load a checkpoint into an existing store. Every stored name must exist in
/// `store` with an identical shape.
pub fn load_checkpoint(dir: &Path, store: &mut ParamStore) -> Result<()> {
    for name in checkpoint_names(dir)? {
        let t = load_tensor(dir, &name)?;
        let current = store
            .get(&name)
            .ok_or_else(|| Error::checkpoint(format!("checkpoint has unknown parameter {name}")))?;
        if current.shape() != t.shape() {
            return Err(Error::checkpoint(format!(
                "parameter {name}: checkpoint shape {:?} does not match model shape {:?}",
                t.shape(),
                current.shape()
            )));
        }
        store.set(&name, t)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::RngKey;

    #[test]
    fn tensor_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let t = Tensor::new(vec![3, 2], RngKey::new(1, "io", 0).normal_vec(6)).unwrap();
        save_tensor(dir.path(), "w", &t).unwrap();
        let back = load_tensor(dir.path(), "w").unwrap();
        assert_eq!(t.shape(), back.shape());
        assert_eq!(t.data(), back.data());
    }

    #[test]
    fn checkpoint_roundtrip_and_shape_check() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = ParamStore::new();
        store.insert("a", Tensor::from_vec(vec![1.0, 2.0]));
        store.insert("b", Tensor::new(vec![2, 2], vec![0.0, 1.0, 2.0, 3.0]).unwrap());
        save_checkpoint(dir.path(), &store).unwrap();
        assert_eq!(checkpoint_names(dir.path()).unwrap(), vec!["a", "b"]);

        let mut target = ParamStore::new();
        target.insert("a", Tensor::zeros(vec![2]));
        target.insert("b", Tensor::zeros(vec![2, 2]));
        load_checkpoint(dir.path(), &mut target).unwrap();
        assert_eq!(target.get("a").unwrap().data(), &[1.0, 2.0]);

        let mut wrong = ParamStore::new();
        wrong.insert("a", Tensor::zeros(vec![3]));
        wrong.insert("b", Tensor::zeros(vec![2, 2]));
        assert!(matches!(
            load_checkpoint(dir.path(), &mut wrong),
            Err(Error::Checkpoint(_))
        ));
    }
}
