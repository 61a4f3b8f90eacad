//! Checkpoint evaluation: wires the synthetic source and a frozen generator
//! into the metric suite.

use super::generator::{generate_frames, GeneratorWeights};
use super::synth::SyntheticVideoSpec;
use crate::error::Result;
use crate::metrics::{
    fid_proxy, fvd_proxy, sticking_probe, video_jitter_score, FeatureEmbedder, FvdValue,
    MetricsSnapshot,
};
use crate::numerics::{RngKey, Tensor};

/// Which metric families to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricSet {
    All,
    Fvd,
    Anchor,
    Jitter,
}

pub struct EvalContext<'a> {
    pub gen: &'a GeneratorWeights,
    pub data: &'a SyntheticVideoSpec,
    pub embedder: FeatureEmbedder,
    pub seed: u64,
    pub n_clips: usize,
}

impl<'a> EvalContext<'a> {
    pub fn new(
        gen: &'a GeneratorWeights,
        data: &'a SyntheticVideoSpec,
        seed: u64,
        n_clips: usize,
    ) -> Result<Self> {
        let embedder = FeatureEmbedder::new(seed, gen.cfg.img_channels)?;
        Ok(EvalContext { gen, data, embedder, seed, n_clips })
    }

    fn real_clip(&self, i: usize, span: usize) -> Result<Vec<Tensor>> {
        let key = RngKey::new(self.seed, "eval.real", i as i64);
        let clip = key.uniform_int(0, u64::from(self.data.n_clips)) as i64;
        let usable = (self.data.timeline - span as f64).max(1.0);
        let t0 = (key.uniform(1) * usable).floor();
        let ts: Vec<f64> = (0..span).map(|j| t0 + j as f64).collect();
        self.data.clip(clip, &ts)
    }

    fn gen_clip_at(&self, i: usize, ts: &[f64]) -> Result<Vec<Tensor>> {
        let u = RngKey::new(self.seed, "eval.u", i as i64).normal_vec(self.gen.cfg.dim_u);
        let (frames, _) = generate_frames(self.gen, &u, ts)?;
        Ok(frames)
    }

    fn gen_clip(&self, i: usize, span: usize) -> Result<Vec<Tensor>> {
        let key = RngKey::new(self.seed, "eval.gen_t", i as i64);
        let usable = (self.data.timeline - span as f64).max(1.0);
        let t0 = (key.uniform(0) * usable).floor();
        let ts: Vec<f64> = (0..span).map(|j| t0 + j as f64).collect();
        self.gen_clip_at(i, &ts)
    }

    pub fn fvd(&self, span: usize) -> Result<FvdValue> {
        fvd_proxy(
            &self.embedder,
            self.n_clips,
            span,
            |i| self.real_clip(i, span),
            |i| self.gen_clip(i, span),
        )
    }

    pub fn fid(&self) -> Result<FvdValue> {
        fid_proxy(
            &self.embedder,
            self.n_clips.max(64),
            |i| Ok(self.real_clip(i, 1)?.remove(0)),
            |i| Ok(self.gen_clip(i, 1)?.remove(0)),
        )
    }

    /// 16-frame windows centered on anchors versus centered mid-interval,
    /// both scored against real clips.
    pub fn anchor_window(&self) -> Result<(FvdValue, FvdValue)> {
        let span = 16usize;
        let interval = self.gen.cfg.motion.interval;
        let anchor_ts = |i: usize| -> Vec<f64> {
            let t_a = (1 + i) as f64 * interval;
            (0..span).map(|j| t_a - 8.0 + j as f64).collect()
        };
        let mid_ts = |i: usize| -> Vec<f64> {
            let t_m = (1 + i) as f64 * interval + interval / 2.0;
            (0..span).map(|j| t_m - 8.0 + j as f64).collect()
        };
        let at_anchor = fvd_proxy(
            &self.embedder,
            self.n_clips,
            span,
            |i| self.real_clip(i, span),
            |i| self.gen_clip_at(i, &anchor_ts(i)),
        )?;
        let at_mid = fvd_proxy(
            &self.embedder,
            self.n_clips,
            span,
            |i| self.real_clip(i, span),
            |i| self.gen_clip_at(i, &mid_ts(i)),
        )?;
        Ok((at_anchor, at_mid))
    }

    /// Pixel-level jitter of generated video across two anchor intervals.
    pub fn jitter(&self) -> Result<f64> {
        let u = RngKey::new(self.seed, "eval.jitter_u", 0).normal_vec(self.gen.cfg.dim_u);
        let interval = self.gen.cfg.motion.interval;
        let h = 0.5;
        let report = video_jitter_score(
            |t| {
                let (frames, _) = generate_frames(self.gen, &u, &[t])?;
                Ok(frames.into_iter().next().expect("one frame"))
            },
            interval * 0.5,
            interval * 2.5,
            h,
            interval,
        )?;
        Ok(report.score)
    }

    /// Mean temporal autocorrelation of a fixed center column.
    pub fn sticking(&self) -> Result<f64> {
        let u = RngKey::new(self.seed, "eval.stick_u", 0).normal_vec(self.gen.cfg.dim_u);
        let column = self.gen.cfg.resolution / 2;
        let ts: Vec<f64> = (0..128).map(|i| i as f64).collect();
        let probe = sticking_probe(
            |t| {
                let (frames, _) = generate_frames(self.gen, &u, &[t])?;
                Ok(frames.into_iter().next().expect("one frame"))
            },
            column,
            &ts,
        )?;
        Ok(probe.autocorr)
    }

    /// Assemble a metrics.json snapshot. Ridge events are reported on
    /// stderr, keeping the snapshot schema numeric.
    pub fn snapshot(&self, step: u64, set: MetricSet) -> Result<MetricsSnapshot> {
        let mut snap = MetricsSnapshot { step, ..Default::default() };
        let note_ridge = |label: &str, v: &FvdValue| {
            if v.ridge_applied {
                eprintln!("note: {label}: degenerate covariance, ridge 1e-6 added");
            }
        };
        if matches!(set, MetricSet::All | MetricSet::Fvd) {
            let fvd16 = self.fvd(16)?;
            note_ridge("fvd16_proxy", &fvd16);
            snap.fvd16_proxy = Some(fvd16.value);
            if set == MetricSet::All {
                let fid = self.fid()?;
                note_ridge("fid_proxy", &fid);
                snap.fid_proxy = Some(fid.value);
                let fvd128 = self.fvd(128)?;
                note_ridge("fvd128_proxy", &fvd128);
                snap.fvd128_proxy = Some(fvd128.value);
            }
        }
        if matches!(set, MetricSet::All | MetricSet::Anchor) {
            let (anchor, mid) = self.anchor_window()?;
            note_ridge("fvd16_anchor_proxy", &anchor);
            snap.fvd16_anchor_proxy = Some(anchor.value);
            snap.fvd16_mid_proxy = Some(mid.value);
        }
        if matches!(set, MetricSet::All | MetricSet::Jitter) {
            snap.jitter = Some(self.jitter()?);
            if set == MetricSet::All {
                snap.sticking_autocorr = Some(self.sticking()?);
            }
        }
        Ok(snap)
    }

    /// The quick per-run probe used by the training loop.
    pub fn fvd16_only(&self, step: u64) -> Result<MetricsSnapshot> {
        let fvd16 = self.fvd(16)?;
        if fvd16.ridge_applied {
            eprintln!("note: fvd16_proxy at step {step}: degenerate covariance, ridge 1e-6 added");
        }
        Ok(MetricsSnapshot { step, fvd16_proxy: Some(fvd16.value), ..Default::default() })
    }
}
