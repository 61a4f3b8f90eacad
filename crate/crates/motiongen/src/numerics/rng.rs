//! Counter-based deterministic random numbers.
//!
//! Every sample is a pure function of `(seed, stream, index, slot)`. No
//! generator state is carried between calls, so anchor codes, batch draws,
//! and parameter initializers can be queried in any order (including
//! negative indices) and always reproduce the same values.

/// A keyed sample source: `(seed, stream label, signed index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngKey {
    key: u64,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

// SplitMix64 finalizer; statistically strong for keyed counters.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_label(label: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl RngKey {
    pub fn new(seed: u64, stream: &str, index: i64) -> Self {
        let k = mix(mix(mix(seed) ^ hash_label(stream)) ^ (index as u64));
        RngKey { key: k }
    }

    /// Raw 64 bits for sample slot `slot`.
    pub fn bits(&self, slot: u64) -> u64 {
        mix(self.key ^ mix(slot))
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&self, slot: u64) -> f64 {
        (self.bits(slot) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`.
    pub fn uniform_int(&self, slot: u64, n: u64) -> u64 {
        // 64-bit multiply-shift; bias is negligible for n << 2^64.
        ((self.bits(slot) as u128 * n as u128) >> 64) as u64
    }

    /// Standard normal via Box-Muller. Each slot yields one sample.
    pub fn normal(&self, slot: u64) -> f64 {
        // Two uniforms per slot, drawn from disjoint sub-slots.
        let u1 = ((self.bits(2 * slot) >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
        let u2 = (self.bits(2 * slot + 1) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn normal_vec(&self, n: usize) -> Vec<f64> {
        (0..n).map(|j| self.normal(j as u64)).collect()
    }

    pub fn uniform_vec(&self, n: usize) -> Vec<f64> {
        (0..n).map(|j| self.uniform(j as u64)).collect()
    }
}

/// Convenience one-shot sampler.
pub fn normal_samples(seed: u64, stream: &str, index: i64, n: usize) -> Vec<f64> {
    RngKey::new(seed, stream, index).normal_vec(n)
}
