//! Discriminator-side temporal machinery: channel shifting across adjacent
//! frames, frame fusion, and the time-conditioned logit head.

use crate::error::{Error, Result};
use crate::nn::MlpNodes;
use crate::numerics::{NodeId, Tape, Tensor};

/// A clip of per-frame feature maps with strictly increasing timestamps.
#[derive(Debug, Clone)]
pub struct FrameStack {
    /// `[N_t, C, H, W]`.
    pub frames: Tensor,
    pub timestamps: Vec<f64>,
}

impl FrameStack {
    pub fn new(frames: Tensor, timestamps: Vec<f64>) -> Result<Self> {
        let s = frames.shape();
        if s.len() != 4 {
            return Err(Error::shape(format!("frame stack expects [N_t,C,H,W], got {s:?}")));
        }
        if timestamps.len() != s[0] {
            return Err(Error::shape(format!(
                "{} timestamps for {} frames",
                timestamps.len(),
                s[0]
            )));
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("timestamps must be strictly increasing".to_string()));
        }
        Ok(FrameStack { frames, timestamps })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn frame(&self, i: usize) -> Tensor {
        let s = self.frames.shape();
        let plane = s[1] * s[2] * s[3];
        Tensor::new(vec![s[1], s[2], s[3]], self.frames.data()[i * plane..(i + 1) * plane].to_vec())
            .expect("frame slice")
    }
}

/// Temporal channel shift over per-frame nodes.
///
/// Output frame `i` is the channel concatenation
/// `prev[0 : C/8] ++ cur[C/8 : 7C/8] ++ next[7C/8 : C]`, so a quarter of
/// each frame's channels originate from its neighbors. Frames outside the
/// clip contribute zeros. All frames are read before any is written
/// (simultaneous semantics), and the op is parameter-free and linear.
pub fn tsm_shift_nodes(tape: &mut Tape, frames: &[NodeId]) -> Result<Vec<NodeId>> {
    if frames.is_empty() {
        return Err(Error::contract("tsm over an empty clip".to_string()));
    }
    let shape = tape.value(frames[0]).shape().to_vec();
    if shape.len() != 3 {
        return Err(Error::shape(format!("tsm expects [C,H,W] frames, got {shape:?}")));
    }
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    if c % 8 != 0 {
        return Err(Error::shape(format!("tsm needs channels divisible by 8, got {c}")));
    }
    for &f in frames {
        if tape.value(f).shape() != shape.as_slice() {
            return Err(Error::shape("tsm frames must share a shape".to_string()));
        }
    }
    let c8 = c / 8;
    let n = frames.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let head = match i.checked_sub(1).map(|p| frames[p]) {
            Some(prev) => tape.chan_slice(prev, 0, c8)?,
            None => tape.constant(Tensor::zeros(vec![c8, h, w])),
        };
        let mid = tape.chan_slice(frames[i], c8, 7 * c8)?;
        let tail = match frames.get(i + 1) {
            Some(&next) => tape.chan_slice(next, 7 * c8, c)?,
            None => tape.constant(Tensor::zeros(vec![c8, h, w])),
        };
        out.push(tape.chan_concat(&[head, mid, tail])?);
    }
    Ok(out)
}

/// Value-level temporal shift of a whole stack.
pub fn tsm_shift(stack: &FrameStack) -> Result<FrameStack> {
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = (0..stack.n_frames()).map(|i| tape.constant(stack.frame(i))).collect();
    let shifted = tsm_shift_nodes(&mut tape, &ids)?;
    let mut data = Vec::with_capacity(stack.frames.numel());
    for id in shifted {
        data.extend_from_slice(tape.value(id).data());
    }
    Ok(FrameStack {
        frames: Tensor::new(stack.frames.shape().to_vec(), data)?,
        timestamps: stack.timestamps.clone(),
    })
}

/// Channel-wise concatenation of per-frame feature vectors, in frame order.
pub fn temporal_fuse(tape: &mut Tape, per_frame: &[NodeId]) -> Result<NodeId> {
    tape.concat(per_frame)
}

/// Timestamp conditioning vector: offsets from the first frame, divided by
/// the anchor interval (or raw timestamps when `raw_time` is set).
pub fn time_encoding(timestamps: &[f64], interval: f64, raw_time: bool) -> Vec<f64> {
    if raw_time {
        timestamps.to_vec()
    } else {
        let t0 = timestamps[0];
        timestamps.iter().map(|t| (t - t0) / interval).collect()
    }
}

/// `l = M(y ++ tau)`: scalar logit from fused features and encoded times.
pub fn time_conditioned_logit(
    tape: &mut Tape,
    head: &MlpNodes,
    fused: NodeId,
    timestamps: &[f64],
    interval: f64,
    raw_time: bool,
) -> Result<NodeId> {
    let tau = time_encoding(timestamps, interval, raw_time);
    let tau_node = tape.constant(Tensor::from_vec(tau));
    let input = tape.concat(&[fused, tau_node])?;
    let out = head.forward(tape, input)?;
    tape.reshape(out, vec![])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::MlpWeights;
    use crate::numerics::RngKey;

    fn stack(n_t: usize, c: usize, h: usize, w: usize, seed: u64) -> FrameStack {
        let data = RngKey::new(seed, "stack", 0).normal_vec(n_t * c * h * w);
        FrameStack::new(
            Tensor::new(vec![n_t, c, h, w], data).unwrap(),
            (0..n_t).map(|i| i as f64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn channel_routing_matches_the_formula() {
        let s = stack(3, 8, 2, 2, 1);
        let out = tsm_shift(&s).unwrap();
        let plane = 4;
        let f = |t: usize, ch: usize, p: usize| s.frames.data()[(t * 8 + ch) * plane + p];
        let o = |t: usize, ch: usize, p: usize| out.frames.data()[(t * 8 + ch) * plane + p];
        for p in 0..plane {
            // frame 1, channel 0 comes from frame 0
            assert_eq!(o(1, 0, p), f(0, 0, p));
            // channels 1..6 stay from frame 1
            for ch in 1..7 {
                assert_eq!(o(1, ch, p), f(1, ch, p));
            }
            // channel 7 comes from frame 2
            assert_eq!(o(1, 7, p), f(2, 7, p));
            // boundary frames see zeros
            assert_eq!(o(0, 0, p), 0.0);
            assert_eq!(o(2, 7, p), 0.0);
        }
    }

    #[test]
    fn all_zero_input_stays_zero_and_shape_is_preserved() {
        let z = FrameStack::new(Tensor::zeros(vec![2, 8, 3, 3]), vec![0.0, 5.0]).unwrap();
        let out = tsm_shift(&z).unwrap();
        assert_eq!(out.frames.shape(), &[2, 8, 3, 3]);
        assert!(out.frames.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_frame_zeroes_boundary_channels_only() {
        let s = stack(1, 8, 2, 2, 3);
        let out = tsm_shift(&s).unwrap();
        let plane = 4;
        for p in 0..plane {
            assert_eq!(out.frames.data()[p], 0.0); // channel 0
            assert_eq!(out.frames.data()[7 * plane + p], 0.0); // channel 7
            for ch in 1..7 {
                assert_eq!(out.frames.data()[ch * plane + p], s.frames.data()[ch * plane + p]);
            }
        }
    }

    #[test]
    fn channels_not_divisible_by_eight_are_rejected() {
        let s = FrameStack::new(Tensor::zeros(vec![2, 6, 2, 2]), vec![0.0, 1.0]).unwrap();
        assert!(matches!(tsm_shift(&s), Err(Error::Shape(_))));
    }

    #[test]
    fn shift_is_linear() {
        let (a, b) = (0.37, -1.25);
        let s1 = stack(3, 8, 2, 2, 10);
        let s2 = stack(3, 8, 2, 2, 11);
        let mixed_data: Vec<f64> = s1
            .frames
            .data()
            .iter()
            .zip(s2.frames.data())
            .map(|(x, y)| a * x + b * y)
            .collect();
        let mixed = FrameStack::new(
            Tensor::new(vec![3, 8, 2, 2], mixed_data).unwrap(),
            s1.timestamps.clone(),
        )
        .unwrap();
        let lhs = tsm_shift(&mixed).unwrap();
        let r1 = tsm_shift(&s1).unwrap();
        let r2 = tsm_shift(&s2).unwrap();
        for i in 0..lhs.frames.numel() {
            let rhs = a * r1.frames.data()[i] + b * r2.frames.data()[i];
            assert!((lhs.frames.data()[i] - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_routes_to_the_transpose_shift() {
        let mut tape = Tape::new();
        let frames: Vec<NodeId> = (0..3)
            .map(|i| {
                let data = RngKey::new(7, "g", i).normal_vec(8 * 2 * 2);
                tape.leaf(Tensor::new(vec![8, 2, 2], data).unwrap().with_grad())
            })
            .collect();
        let shifted = tsm_shift_nodes(&mut tape, &frames).unwrap();
        // Sum only frame 1's first C/8 channels; that block came from frame 0.
        let block = tape.chan_slice(shifted[1], 0, 1).unwrap();
        let loss = tape.sum(block);
        let grads = tape.backward(loss).unwrap();
        let g0 = grads.tensor(&tape, frames[0]);
        let g1 = grads.tensor(&tape, frames[1]);
        // Gradient lands on frame 0's channel 0, nowhere else.
        for p in 0..4 {
            assert_eq!(g0.data()[p], 1.0);
        }
        assert!(g0.data()[4..].iter().all(|&v| v == 0.0));
        assert!(g1.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fuse_concatenates_in_frame_order() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::from_vec(vec![1.0, 2.0]));
        let b = tape.constant(Tensor::from_vec(vec![3.0, 4.0]));
        let y = temporal_fuse(&mut tape, &[a, b]).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 2.0, 3.0, 4.0]);
        let y_swapped = temporal_fuse(&mut tape, &[b, a]).unwrap();
        assert_eq!(tape.value(y_swapped).data(), &[3.0, 4.0, 1.0, 2.0]);

        // N_t = 1: identity
        let single = temporal_fuse(&mut tape, &[a]).unwrap();
        assert_eq!(tape.value(single).data(), &[1.0, 2.0]);
    }

    #[test]
    fn logit_is_invariant_to_a_constant_time_shift() {
        let head = MlpWeights::init(5, "head", 4 + 2, 8, 1).unwrap();
        let run = |times: &[f64]| -> f64 {
            let mut tape = Tape::new();
            let h = head.constants(&mut tape);
            let y = tape.constant(Tensor::from_vec(vec![0.3, -0.2, 1.0, 0.5]));
            let l = time_conditioned_logit(&mut tape, &h, y, times, 64.0, false).unwrap();
            tape.value(l).item().unwrap()
        };
        let a = run(&[10.0, 14.0]);
        let b = run(&[110.0, 114.0]);
        assert!((a - b).abs() < 1e-12);
        // raw-time mode is sensitive to the shift
        let run_raw = |times: &[f64]| -> f64 {
            let mut tape = Tape::new();
            let h = head.constants(&mut tape);
            let y = tape.constant(Tensor::from_vec(vec![0.3, -0.2, 1.0, 0.5]));
            let l = time_conditioned_logit(&mut tape, &h, y, times, 64.0, true).unwrap();
            tape.value(l).item().unwrap()
        };
        assert!((run_raw(&[10.0, 14.0]) - run_raw(&[110.0, 114.0])).abs() > 1e-9);
    }

    #[test]
    fn zero_weight_head_returns_its_bias() {
        let mut head = MlpWeights::init(5, "head", 3 + 1, 4, 1).unwrap();
        head.w1 = Tensor::zeros(vec![4, 4]);
        head.w2 = Tensor::zeros(vec![1, 4]);
        head.b2 = Tensor::from_vec(vec![0.77]);
        let mut tape = Tape::new();
        let h = head.constants(&mut tape);
        let y = tape.constant(Tensor::from_vec(vec![9.0, -3.0, 2.0]));
        let l = time_conditioned_logit(&mut tape, &h, y, &[42.0], 64.0, false).unwrap();
        assert_eq!(tape.value(l).item().unwrap(), 0.77);
    }

    #[test]
    fn head_input_dimension_mismatch_is_a_shape_error() {
        let head = MlpWeights::init(5, "head", 10, 4, 1).unwrap();
        let mut tape = Tape::new();
        let h = head.constants(&mut tape);
        let y = tape.constant(Tensor::from_vec(vec![1.0, 2.0, 3.0]));
        let r = time_conditioned_logit(&mut tape, &h, y, &[0.0, 1.0], 64.0, false);
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn frame_stack_validation() {
        assert!(FrameStack::new(Tensor::zeros(vec![2, 4, 2, 2]), vec![1.0, 1.0]).is_err());
        assert!(FrameStack::new(Tensor::zeros(vec![2, 4, 2]), vec![0.0, 1.0]).is_err());
        assert!(FrameStack::new(Tensor::zeros(vec![2, 4, 2, 2]), vec![0.0]).is_err());
    }
}
