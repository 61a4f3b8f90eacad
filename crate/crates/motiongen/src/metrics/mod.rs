//! Quantitative evaluation: Fréchet-distance proxies over a frozen random
//! embedder, pixel-level jitter scores, and the texture-sticking probe.
//!
//! The embedder is a seeded random conv net, never trained, so absolute
//! values are not comparable to numbers computed with pretrained backbones;
//! only within-run orderings are meaningful. Every report that includes
//! these values carries that caveat.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Conv2dWeights;
use crate::numerics::linalg::sym_eigen;
use crate::numerics::{Tape, Tensor};

/// Frozen, seeded random conv network: three stride-2 blocks, global pool.
#[derive(Debug, Clone)]
pub struct FeatureEmbedder {
    convs: Vec<Conv2dWeights>,
    pub image_dim: usize,
}

impl FeatureEmbedder {
    pub fn new(seed: u64, img_channels: usize) -> Result<Self> {
        let widths = [img_channels, 8, 16, 32];
        let convs = (0..3)
            .map(|i| Conv2dWeights::init(seed, &format!("embed.conv{i}"), widths[i], widths[i + 1]))
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureEmbedder { convs, image_dim: 32 })
    }

    /// Clip embeddings carry mean frame features plus mean first-difference
    /// features (crude motion sensitivity).
    pub fn clip_dim(&self) -> usize {
        2 * self.image_dim
    }

    pub fn embed_image(&self, frame: &Tensor) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let mut x = tape.constant(frame.clone());
        for conv in &self.convs {
            let nodes = conv.constants(&mut tape);
            x = nodes.forward(&mut tape, x, 2)?;
            x = tape.leaky_relu(x, 0.2);
        }
        let pooled = tape.global_avg_pool(x)?;
        Ok(tape.value(pooled).data().to_vec())
    }

    pub fn embed_clip(&self, frames: &[Tensor]) -> Result<Vec<f64>> {
        if frames.is_empty() {
            return Err(Error::contract("cannot embed an empty clip".to_string()));
        }
        let mut mean = vec![0.0; self.image_dim];
        for f in frames {
            for (m, v) in mean.iter_mut().zip(self.embed_image(f)?) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= frames.len() as f64;
        }
        let mut diff_mean = vec![0.0; self.image_dim];
        if frames.len() > 1 {
            for pair in frames.windows(2) {
                let d = Tensor::new(
                    pair[0].shape().to_vec(),
                    pair[1].data().iter().zip(pair[0].data()).map(|(a, b)| a - b).collect(),
                )?;
                for (m, v) in diff_mean.iter_mut().zip(self.embed_image(&d)?) {
                    *m += v;
                }
            }
            for m in &mut diff_mean {
                *m /= (frames.len() - 1) as f64;
            }
        }
        mean.extend(diff_mean);
        Ok(mean)
    }
}

/// Mean and covariance of a sample of embeddings.
#[derive(Debug, Clone)]
pub struct GaussianStats {
    pub mean: Vec<f64>,
    /// Row-major `dim x dim`, symmetrized.
    pub cov: Vec<f64>,
    pub count: usize,
}

impl GaussianStats {
    pub fn fit(samples: &[Vec<f64>]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::contract("cannot fit statistics to zero samples".to_string()));
        }
        let dim = samples[0].len();
        let n = samples.len() as f64;
        let mut mean = vec![0.0; dim];
        for s in samples {
            if s.len() != dim {
                return Err(Error::shape("inconsistent embedding dimensions".to_string()));
            }
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut cov = vec![0.0; dim * dim];
        for s in samples {
            for i in 0..dim {
                let di = s[i] - mean[i];
                for j in i..dim {
                    cov[i * dim + j] += di * (s[j] - mean[j]);
                }
            }
        }
        let denom = if samples.len() > 1 { n - 1.0 } else { 1.0 };
        for i in 0..dim {
            for j in i..dim {
                let v = cov[i * dim + j] / denom;
                cov[i * dim + j] = v;
                cov[j * dim + i] = v;
            }
        }
        Ok(GaussianStats { mean, cov, count: samples.len() })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (vals, _) = sym_eigen(self.dim(), &self.cov)?;
        Ok(vals[0])
    }

    pub fn add_ridge(&mut self, eps: f64) {
        let d = self.dim();
        for i in 0..d {
            self.cov[i * d + i] += eps;
        }
    }
}

/// Symmetric PSD square root via eigendecomposition. Eigenvalues below
/// `-1e-10 * scale` are a hard error; small negatives clamp to zero.
fn psd_sqrt(dim: usize, m: &[f64]) -> Result<Vec<f64>> {
    let (vals, vecs) = sym_eigen(dim, m)?;
    let scale = vals.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-30);
    let mut out = vec![0.0; dim * dim];
    for k in 0..dim {
        let v = vals[k];
        if v < -1e-10 * scale {
            return Err(Error::numerics(format!(
                "matrix is not PSD within tolerance: eigenvalue {v} (scale {scale})"
            )));
        }
        let r = v.max(0.0).sqrt();
        for i in 0..dim {
            for j in 0..dim {
                out[i * dim + j] += r * vecs[i * dim + k] * vecs[j * dim + k];
            }
        }
    }
    Ok(out)
}

fn mat_mul(dim: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; dim * dim];
    crate::numerics::kernels::matmul_acc(dim, dim, dim, a, b, &mut out);
    out
}

/// `|mu1 - mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2))`, with the cross term
/// computed from the symmetrized product `S1^(1/2) S2 S1^(1/2)`.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::shape(format!(
            "statistics dims {} vs {} disagree",
            a.dim(),
            b.dim()
        )));
    }
    let dim = a.dim();
    let mean_term: f64 = a
        .mean
        .iter()
        .zip(&b.mean)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let tr_a: f64 = (0..dim).map(|i| a.cov[i * dim + i]).sum();
    let tr_b: f64 = (0..dim).map(|i| b.cov[i * dim + i]).sum();
    let root_a = psd_sqrt(dim, &a.cov)?;
    let inner = mat_mul(dim, &mat_mul(dim, &root_a, &b.cov), &root_a);
    // Symmetrize against round-off before the second eigendecomposition.
    let mut sym = inner.clone();
    for i in 0..dim {
        for j in 0..dim {
            sym[i * dim + j] = 0.5 * (inner[i * dim + j] + inner[j * dim + i]);
        }
    }
    let (vals, _) = sym_eigen(dim, &sym)?;
    let scale = vals.iter().fold(0.0f64, |acc, &v| acc.max(v.abs())).max(1e-30);
    let mut tr_cross = 0.0;
    for &v in &vals {
        if v < -1e-10 * scale {
            return Err(Error::numerics(format!(
                "cross covariance is not PSD within tolerance: eigenvalue {v}"
            )));
        }
        tr_cross += v.max(0.0).sqrt();
    }
    Ok(mean_term + tr_a + tr_b - 2.0 * tr_cross)
}

/// A Fréchet proxy value plus whether a diagonal ridge was needed.
#[derive(Debug, Clone, Copy)]
pub struct FvdValue {
    pub value: f64,
    pub ridge_applied: bool,
}

const RIDGE: f64 = 1e-6;
const DEGENERATE_EIG: f64 = 1e-9;

/// Fréchet distance between two embedding samples, adding a logged ridge to
/// both covariances when either is degenerate.
pub fn frechet_from_samples(real: &[Vec<f64>], generated: &[Vec<f64>]) -> Result<FvdValue> {
    let mut sa = GaussianStats::fit(real)?;
    let mut sb = GaussianStats::fit(generated)?;
    let ridge = sa.min_eigenvalue()? < DEGENERATE_EIG || sb.min_eigenvalue()? < DEGENERATE_EIG;
    if ridge {
        sa.add_ridge(RIDGE);
        sb.add_ridge(RIDGE);
    }
    Ok(FvdValue { value: frechet_distance(&sa, &sb)?, ridge_applied: ridge })
}

/// Fréchet video distance proxy over `n_clips` clips of `span` frames from
/// each source.
pub fn fvd_proxy<R, G>(
    embedder: &FeatureEmbedder,
    n_clips: usize,
    span: usize,
    mut real: R,
    mut generated: G,
) -> Result<FvdValue>
where
    R: FnMut(usize) -> Result<Vec<Tensor>>,
    G: FnMut(usize) -> Result<Vec<Tensor>>,
{
    if n_clips < 64 {
        return Err(Error::config(format!("fvd proxy needs at least 64 clips, got {n_clips}")));
    }
    let mut real_emb = Vec::with_capacity(n_clips);
    let mut gen_emb = Vec::with_capacity(n_clips);
    for i in 0..n_clips {
        let rc = real(i)?;
        let gc = generated(i)?;
        if rc.len() != span || gc.len() != span {
            return Err(Error::contract(format!(
                "clip {i} has {} / {} frames, expected {span}",
                rc.len(),
                gc.len()
            )));
        }
        real_emb.push(embedder.embed_clip(&rc)?);
        gen_emb.push(embedder.embed_clip(&gc)?);
    }
    frechet_from_samples(&real_emb, &gen_emb)
}

/// Image-level Fréchet proxy over single frames.
pub fn fid_proxy<R, G>(
    embedder: &FeatureEmbedder,
    n_images: usize,
    mut real: R,
    mut generated: G,
) -> Result<FvdValue>
where
    R: FnMut(usize) -> Result<Tensor>,
    G: FnMut(usize) -> Result<Tensor>,
{
    let mut real_emb = Vec::with_capacity(n_images);
    let mut gen_emb = Vec::with_capacity(n_images);
    for i in 0..n_images {
        real_emb.push(embedder.embed_image(&real(i)?)?);
        gen_emb.push(embedder.embed_image(&generated(i)?)?);
    }
    frechet_from_samples(&real_emb, &gen_emb)
}

/// Pixel-level jitter diagnostics over a uniform frame grid.
#[derive(Debug, Clone, Serialize)]
pub struct JitterReport {
    /// Max over the grid of the mean-squared scaled second difference.
    pub score: f64,
    /// Max score per anchor-phase bin (`t mod interval`, 16 bins).
    pub phase_histogram: Vec<f64>,
}

/// Scans `t0..=t1` in steps of `h` and scores each interior point by the
/// mean over pixels of `((f(t+h) - 2 f(t) + f(t-h)) / h^2)^2`. Linear pixel
/// motion scores zero; slope breaks spike.
pub fn video_jitter_score<F>(mut frame: F, t0: f64, t1: f64, h: f64, interval: f64) -> Result<JitterReport>
where
    F: FnMut(f64) -> Result<Tensor>,
{
    if !(h > 0.0) || t1 <= t0 {
        return Err(Error::config("jitter scan needs h > 0 and t1 > t0".to_string()));
    }
    let steps = ((t1 - t0) / h).round() as usize;
    if steps < 2 {
        return Err(Error::config("jitter scan needs at least 3 grid points".to_string()));
    }
    let mut frames = Vec::with_capacity(steps + 1);
    for j in 0..=steps {
        frames.push(frame(t0 + j as f64 * h)?);
    }
    let n_px = frames[0].numel() as f64;
    let mut score = 0.0f64;
    let mut hist = vec![0.0f64; 16];
    for j in 1..steps {
        let ms = frames[j - 1]
            .data()
            .iter()
            .zip(frames[j].data().iter().zip(frames[j + 1].data()))
            .map(|(&a, (&b, &c))| {
                let d = (c - 2.0 * b + a) / (h * h);
                d * d
            })
            .sum::<f64>()
            / n_px;
        score = score.max(ms);
        let t = t0 + j as f64 * h;
        let phase = (t / interval).rem_euclid(1.0);
        let bin = ((phase * 16.0) as usize).min(15);
        hist[bin] = hist[bin].max(ms);
    }
    Ok(JitterReport { score, phase_histogram: hist })
}

/// Fixed-column timeline image and its mean lag-1 temporal autocorrelation.
#[derive(Debug, Clone)]
pub struct StickingProbe {
    /// `[H, T]`: row y holds pixel (y, column) over time.
    pub image: Tensor,
    pub autocorr: f64,
}

pub fn sticking_probe<F>(mut frame: F, column: usize, ts: &[f64]) -> Result<StickingProbe>
where
    F: FnMut(f64) -> Result<Tensor>,
{
    if ts.len() < 3 {
        return Err(Error::config("sticking probe needs at least 3 frames".to_string()));
    }
    let first = frame(ts[0])?;
    let s = first.shape().to_vec();
    if s.len() != 3 || column >= s[2] {
        return Err(Error::config(format!("column {column} outside frame {s:?}")));
    }
    let h = s[1];
    let t_len = ts.len();
    let mut image = vec![0.0; h * t_len];
    for (j, &t) in ts.iter().enumerate() {
        let f = if j == 0 { first.clone() } else { frame(t)? };
        for y in 0..h {
            // channel 0 of the fixed column
            image[y * t_len + j] = f.data()[y * s[2] + column];
        }
    }
    let mut acc = 0.0;
    for y in 0..h {
        let row = &image[y * t_len..(y + 1) * t_len];
        let mu = row.iter().sum::<f64>() / t_len as f64;
        let var: f64 = row.iter().map(|v| (v - mu) * (v - mu)).sum();
        if var < 1e-12 {
            acc += 1.0; // perfectly constant row
            continue;
        }
        let cov: f64 = row.windows(2).map(|w| (w[0] - mu) * (w[1] - mu)).sum();
        acc += cov / var;
    }
    Ok(StickingProbe {
        image: Tensor::new(vec![h, t_len], image)?,
        autocorr: acc / h as f64,
    })
}

/// One metrics.json entry. Fields are filled per the requested metric set.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub step: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fid_proxy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fvd16_proxy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fvd128_proxy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fvd16_anchor_proxy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fvd16_mid_proxy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sticking_autocorr: Option<f64>,
}
