//! Binary PPM (P6, 8-bit) frame export.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Write a frame as binary PPM. Single-channel frames replicate to gray;
/// values clamp to `[0, 1]` before quantization.
pub fn write_ppm(path: &Path, frame: &Tensor) -> Result<()> {
    let s = frame.shape();
    let (c, h, w) = match s.len() {
        3 => (s[0], s[1], s[2]),
        2 => (1, s[0], s[1]),
        _ => return Err(Error::shape(format!("ppm export expects [C,H,W] or [H,W], got {s:?}"))),
    };
    if c != 1 && c != 3 {
        return Err(Error::shape(format!("ppm export supports 1 or 3 channels, got {c}")));
    }
    let mut out = Vec::with_capacity(h * w * 3 + 32);
    write!(out, "P6\n{w} {h}\n255\n")?;
    let plane = h * w;
    let data = if s.len() == 2 { frame.data() } else { frame.data() };
    for p in 0..plane {
        for ch in 0..3 {
            let v = if c == 3 { data[ch * plane + p] } else { data[p] };
            out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}
