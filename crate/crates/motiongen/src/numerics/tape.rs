//! Reverse-mode differentiation over a linear tape of executed operations.
//!
//! Forward values are computed eagerly as nodes are pushed. `backward`
//! replays the tape in reverse and expresses every adjoint as *new tape
//! nodes*, so gradients are themselves differentiable: a second `backward`
//! over a scalar built from gradient nodes yields exact second-order
//! gradients. The R1 penalty relies on this.
//!
//! Every structured linear op (slice/pad/concat, up/downsample, pooling,
//! broadcast/reduce) is paired with its transpose, and each convolution is a
//! (forward, grad-x, grad-k) triple whose adjoints refer back to the same
//! triple. That keeps the op set closed under differentiation.

use std::collections::HashMap;

use super::kernels::{self, Pad1d};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

// The record keeps every op argument even where the adjoint re-derives it
// from node shapes, so a tape entry fully describes the executed op.
#[allow(dead_code)]
#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Neg(NodeId),
    Sin(NodeId),
    Cos(NodeId),
    Square(NodeId),
    Sqrt(NodeId),
    Recip(NodeId),
    Softplus(NodeId),
    Sigmoid(NodeId),
    LeakyRelu(NodeId, f64),
    AddScalar(NodeId, f64),
    MulScalar(NodeId, f64),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Reshape(NodeId),
    Transpose(NodeId),
    Concat(Vec<NodeId>),
    SliceVec { x: NodeId, start: usize, len: usize },
    PadVec { x: NodeId, total: usize, at: usize },
    BroadcastAxis { x: NodeId, axis: usize },
    ReduceAxis { x: NodeId, axis: usize },
    Sum(NodeId),
    Fill(NodeId),
    MatMul(NodeId, NodeId),
    Conv1d { x: NodeId, k: NodeId, pad: Pad1d },
    Conv1dGradX { g: NodeId, k: NodeId, pad: Pad1d },
    Conv1dGradK { g: NodeId, x: NodeId, pad: Pad1d },
    Conv2d { x: NodeId, k: NodeId, stride: usize },
    Conv2dGradX { g: NodeId, k: NodeId, stride: usize },
    Conv2dGradK { g: NodeId, x: NodeId, stride: usize },
    ChanSlice { x: NodeId, from: usize, to: usize },
    ChanPad { x: NodeId, total: usize, at: usize },
    ChanConcat(Vec<NodeId>),
    Upsample2x(NodeId),
    Downsum2x(NodeId),
    GlobalAvgPool(NodeId),
    SpreadAvg { x: NodeId, h: usize, w: usize },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// Ordered record of executed differentiable operations.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradient map produced by [`Tape::backward`]: node ids of the adjoints.
pub struct Gradients {
    map: HashMap<usize, NodeId>,
}

impl Gradients {
    pub fn node(&self, x: NodeId) -> Option<NodeId> {
        self.map.get(&x.0).copied()
    }

    /// Gradient value for `x`; zeros when the loss never reached it.
    pub fn tensor(&self, tape: &Tape, x: NodeId) -> Tensor {
        match self.node(x) {
            Some(g) => tape.value(g).clone(),
            None => Tensor::zeros(tape.value(x).shape().to_vec()),
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { op, value, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn ng(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Insert a tensor as a leaf; its `requires_grad` flag marks it as a
    /// differentiation target.
    pub fn leaf(&mut self, t: Tensor) -> NodeId {
        let ng = t.requires_grad;
        self.push(Op::Leaf, t, ng)
    }

    /// Insert a tensor as a non-differentiable constant.
    pub fn constant(&mut self, t: Tensor) -> NodeId {
        let mut t = t;
        t.requires_grad = false;
        self.push(Op::Leaf, t, false)
    }

    pub fn scalar(&mut self, v: f64) -> NodeId {
        self.constant(Tensor::scalar(v))
    }

    /// Copy of the value, cut off from the graph.
    pub fn detach(&mut self, x: NodeId) -> NodeId {
        let t = self.value(x).clone();
        self.constant(t)
    }
}

// ── elementwise ──────────────────────────────────────────────────────────

macro_rules! unary_op {
    ($name:ident, $variant:ident, $f:expr) => {
        pub fn $name(&mut self, x: NodeId) -> NodeId {
            let f: fn(f64) -> f64 = $f;
            let data: Vec<f64> = self.value(x).data().iter().map(|&v| f(v)).collect();
            let t = Tensor::new(self.value(x).shape().to_vec(), data).unwrap();
            let ng = self.ng(x);
            self.push(Op::$variant(x), t, ng)
        }
    };
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    unary_op!(neg, Neg, |v| -v);
    unary_op!(sin, Sin, f64::sin);
    unary_op!(cos, Cos, f64::cos);
    unary_op!(square, Square, |v| v * v);
    unary_op!(sqrt, Sqrt, f64::sqrt);
    unary_op!(recip, Recip, |v| 1.0 / v);
    unary_op!(softplus, Softplus, softplus);
    unary_op!(sigmoid, Sigmoid, sigmoid);

    pub fn leaky_relu(&mut self, x: NodeId, slope: f64) -> NodeId {
        let data: Vec<f64> =
            self.value(x).data().iter().map(|&v| if v > 0.0 { v } else { slope * v }).collect();
        let t = Tensor::new(self.value(x).shape().to_vec(), data).unwrap();
        let ng = self.ng(x);
        self.push(Op::LeakyRelu(x, slope), t, ng)
    }

    pub fn add_scalar(&mut self, x: NodeId, c: f64) -> NodeId {
        let data: Vec<f64> = self.value(x).data().iter().map(|&v| v + c).collect();
        let t = Tensor::new(self.value(x).shape().to_vec(), data).unwrap();
        let ng = self.ng(x);
        self.push(Op::AddScalar(x, c), t, ng)
    }

    pub fn mul_scalar(&mut self, x: NodeId, c: f64) -> NodeId {
        let data: Vec<f64> = self.value(x).data().iter().map(|&v| v * c).collect();
        let t = Tensor::new(self.value(x).shape().to_vec(), data).unwrap();
        let ng = self.ng(x);
        self.push(Op::MulScalar(x, c), t, ng)
    }

    /// Resolve binary-op operands: equal shapes pass through; a rank-1
    /// operand is broadcast along the matching channel axis (leading axis
    /// first, then trailing).
    fn align_binary(&mut self, a: NodeId, b: NodeId) -> Result<(NodeId, NodeId)> {
        let sa = self.value(a).shape().to_vec();
        let sb = self.value(b).shape().to_vec();
        if sa == sb {
            return Ok((a, b));
        }
        if sb.len() == 1 && sa.len() >= 2 {
            let n = sb[0];
            let axis = if sa[0] == n {
                0
            } else if sa[sa.len() - 1] == n {
                sa.len() - 1
            } else {
                return Err(Error::shape(format!("cannot broadcast {sb:?} against {sa:?}")));
            };
            let bb = self.broadcast_axis(b, &sa, axis)?;
            return Ok((a, bb));
        }
        if sa.len() == 1 && sb.len() >= 2 {
            let (b2, a2) = self.align_binary(b, a)?;
            return Ok((a2, b2));
        }
        Err(Error::shape(format!("binary op on mismatched shapes {sa:?} vs {sb:?}")))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (a, b) = self.align_binary(a, b)?;
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x + y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data).unwrap();
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Op::Add(a, b), t, ng))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (a, b) = self.align_binary(a, b)?;
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x - y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data).unwrap();
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Op::Sub(a, b), t, ng))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (a, b) = self.align_binary(a, b)?;
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x * y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data).unwrap();
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Op::Mul(a, b), t, ng))
    }
}

// ── shape & reductions ───────────────────────────────────────────────────

impl Tape {
    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let t = self.value(x).clone().reshaped(shape)?;
        let ng = self.ng(x);
        Ok(self.push(Op::Reshape(x), t, ng))
    }

    pub fn transpose(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x);
        let s = v.shape();
        if s.len() != 2 {
            return Err(Error::shape(format!("transpose expects rank 2, got {s:?}")));
        }
        let (m, n) = (s[0], s[1]);
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = v.data()[i * n + j];
            }
        }
        let t = Tensor::new(vec![n, m], data).unwrap();
        let ng = self.ng(x);
        Ok(self.push(Op::Transpose(x), t, ng))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::contract("concat of zero parts".to_string()));
        }
        let mut data = Vec::new();
        for &p in parts {
            let v = self.value(p);
            if v.shape().len() != 1 {
                return Err(Error::shape(format!(
                    "concat expects rank-1 parts, got {:?}",
                    v.shape()
                )));
            }
            data.extend_from_slice(v.data());
        }
        let t = Tensor::from_vec(data);
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(Op::Concat(parts.to_vec()), t, ng))
    }

    pub fn slice_vec(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let v = self.value(x);
        if v.shape().len() != 1 || start + len > v.numel() || len == 0 {
            return Err(Error::shape(format!(
                "slice [{start}, {}) out of rank-1 tensor {:?}",
                start + len,
                v.shape()
            )));
        }
        let t = Tensor::from_vec(v.data()[start..start + len].to_vec());
        let ng = self.ng(x);
        Ok(self.push(Op::SliceVec { x, start, len }, t, ng))
    }

    pub fn pad_vec(&mut self, x: NodeId, total: usize, at: usize) -> Result<NodeId> {
        let v = self.value(x);
        if v.shape().len() != 1 || at + v.numel() > total {
            return Err(Error::shape("pad_vec placement out of range".to_string()));
        }
        let mut data = vec![0.0; total];
        data[at..at + v.numel()].copy_from_slice(v.data());
        let t = Tensor::from_vec(data);
        let ng = self.ng(x);
        Ok(self.push(Op::PadVec { x, total, at }, t, ng))
    }

    /// Broadcast a rank-1 tensor along `axis` of `shape`.
    pub fn broadcast_axis(&mut self, x: NodeId, shape: &[usize], axis: usize) -> Result<NodeId> {
        let v = self.value(x);
        if v.shape().len() != 1 || axis >= shape.len() || shape[axis] != v.numel() {
            return Err(Error::shape(format!(
                "broadcast of {:?} along axis {axis} of {shape:?}",
                v.shape()
            )));
        }
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let n = v.numel();
        let mut data = vec![0.0; outer * n * inner];
        for o in 0..outer {
            for (i, &val) in v.data().iter().enumerate() {
                let base = (o * n + i) * inner;
                data[base..base + inner].fill(val);
            }
        }
        let t = Tensor::new(shape.to_vec(), data).unwrap();
        let ng = self.ng(x);
        Ok(self.push(Op::BroadcastAxis { x, axis }, t, ng))
    }

    /// Sum all axes except `axis`, producing a rank-1 tensor.
    pub fn reduce_axis(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        let v = self.value(x);
        let shape = v.shape().to_vec();
        if axis >= shape.len() {
            return Err(Error::shape(format!("reduce axis {axis} of {shape:?}")));
        }
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let n = shape[axis];
        let mut data = vec![0.0; n];
        for o in 0..outer {
            for i in 0..n {
                let base = (o * n + i) * inner;
                data[i] += v.data()[base..base + inner].iter().sum::<f64>();
            }
        }
        let t = Tensor::from_vec(data);
        let ng = self.ng(x);
        Ok(self.push(Op::ReduceAxis { x, axis }, t, ng))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s = self.value(x).data().iter().sum();
        let ng = self.ng(x);
        self.push(Op::Sum(x), Tensor::scalar(s), ng)
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let n = self.value(x).numel() as f64;
        let s = self.sum(x);
        self.mul_scalar(s, 1.0 / n)
    }

    /// Broadcast a scalar to `shape`.
    pub fn fill(&mut self, s: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let v = self.value(s);
        if !v.is_scalar() {
            return Err(Error::shape("fill expects a scalar".to_string()));
        }
        let t = Tensor::full(shape, v.data()[0]);
        let ng = self.ng(s);
        Ok(self.push(Op::Fill(s), t, ng))
    }
}

// ── matmul & convolutions ────────────────────────────────────────────────

impl Tape {
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.value(a).shape().to_vec(), self.value(b).shape().to_vec());
        if sa.len() != 2 || sb.len() != 2 {
            return Err(Error::shape(format!("matmul expects rank 2, got {sa:?} and {sb:?}")));
        }
        if sa[1] != sb[0] {
            return Err(Error::shape(format!(
                "matmul inner dimensions {} vs {} disagree",
                sa[1], sb[0]
            )));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut data = vec![0.0; m * n];
        kernels::matmul_acc(m, k, n, self.value(a).data(), self.value(b).data(), &mut data);
        let t = Tensor::new(vec![m, n], data).unwrap();
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Op::MatMul(a, b), t, ng))
    }

    fn conv1d_dims(&self, x: NodeId, k: NodeId) -> Result<(usize, usize, usize, usize)> {
        let (sx, sk) = (self.value(x).shape().to_vec(), self.value(k).shape().to_vec());
        if sx.len() != 2 || sk.len() != 3 {
            return Err(Error::shape(format!("conv1d expects x [L,Cin], k [w,Cin,Cout]; got {sx:?}, {sk:?}")));
        }
        if sk[0] % 2 == 0 {
            return Err(Error::config(format!("conv1d kernel width {} must be odd", sk[0])));
        }
        if sk[1] != sx[1] {
            return Err(Error::shape(format!(
                "conv1d channel mismatch: x has {}, kernel expects {}",
                sx[1], sk[1]
            )));
        }
        Ok((sx[0], sx[1], sk[2], sk[0]))
    }

    pub fn conv1d(&mut self, x: NodeId, k: NodeId, pad: Pad1d) -> Result<NodeId> {
        let (l, c_in, c_out, w) = self.conv1d_dims(x, k)?;
        let mut data = vec![0.0; l * c_out];
        kernels::conv1d_fwd(l, c_in, c_out, w, pad, self.value(x).data(), self.value(k).data(), &mut data);
        let t = Tensor::new(vec![l, c_out], data).unwrap();
        let ng = self.ng(x) || self.ng(k);
        Ok(self.push(Op::Conv1d { x, k, pad }, t, ng))
    }

    fn conv1d_grad_x_node(&mut self, g: NodeId, k: NodeId, pad: Pad1d) -> NodeId {
        let sk = self.value(k).shape().to_vec();
        let sg = self.value(g).shape().to_vec();
        let (w, c_in, c_out, l) = (sk[0], sk[1], sk[2], sg[0]);
        let mut data = vec![0.0; l * c_in];
        kernels::conv1d_grad_x(l, c_in, c_out, w, pad, self.value(g).data(), self.value(k).data(), &mut data);
        let t = Tensor::new(vec![l, c_in], data).unwrap();
        let ng = self.ng(g) || self.ng(k);
        self.push(Op::Conv1dGradX { g, k, pad }, t, ng)
    }

    fn conv1d_grad_k_node(&mut self, g: NodeId, x: NodeId, pad: Pad1d, w: usize) -> NodeId {
        let sx = self.value(x).shape().to_vec();
        let sg = self.value(g).shape().to_vec();
        let (l, c_in, c_out) = (sx[0], sx[1], sg[1]);
        let mut data = vec![0.0; w * c_in * c_out];
        kernels::conv1d_grad_k(l, c_in, c_out, w, pad, self.value(g).data(), self.value(x).data(), &mut data);
        let t = Tensor::new(vec![w, c_in, c_out], data).unwrap();
        let ng = self.ng(g) || self.ng(x);
        self.push(Op::Conv1dGradK { g, x, pad }, t, ng)
    }

    fn conv2d_dims(&self, x: NodeId, k: NodeId, stride: usize) -> Result<(usize, usize, usize, usize)> {
        let (sx, sk) = (self.value(x).shape().to_vec(), self.value(k).shape().to_vec());
        if sx.len() != 3 || sk.len() != 4 || sk[2] != 3 || sk[3] != 3 {
            return Err(Error::shape(format!(
                "conv2d expects x [Cin,H,W], k [Cout,Cin,3,3]; got {sx:?}, {sk:?}"
            )));
        }
        if sk[1] != sx[0] {
            return Err(Error::shape(format!(
                "conv2d channel mismatch: x has {}, kernel expects {}",
                sx[0], sk[1]
            )));
        }
        if stride != 1 && stride != 2 {
            return Err(Error::config(format!("conv2d stride {stride} unsupported")));
        }
        if stride == 2 && (sx[1] % 2 != 0 || sx[2] % 2 != 0) {
            return Err(Error::shape(format!(
                "stride-2 conv2d requires even spatial extents, got {}x{}",
                sx[1], sx[2]
            )));
        }
        Ok((sx[1], sx[2], sk[0], sx[0]))
    }

    pub fn conv2d(&mut self, x: NodeId, k: NodeId, stride: usize) -> Result<NodeId> {
        let (h, w, c_out, c_in) = self.conv2d_dims(x, k, stride)?;
        let (oh, ow) = (h / stride, w / stride);
        let mut data = vec![0.0; c_out * oh * ow];
        kernels::conv2d_fwd(c_in, h, w, c_out, stride, self.value(x).data(), self.value(k).data(), &mut data);
        let t = Tensor::new(vec![c_out, oh, ow], data).unwrap();
        let ng = self.ng(x) || self.ng(k);
        Ok(self.push(Op::Conv2d { x, k, stride }, t, ng))
    }

    fn conv2d_grad_x_node(&mut self, g: NodeId, k: NodeId, stride: usize, h: usize, w: usize) -> NodeId {
        let sk = self.value(k).shape().to_vec();
        let (c_out, c_in) = (sk[0], sk[1]);
        let mut data = vec![0.0; c_in * h * w];
        kernels::conv2d_grad_x(c_in, h, w, c_out, stride, self.value(g).data(), self.value(k).data(), &mut data);
        let t = Tensor::new(vec![c_in, h, w], data).unwrap();
        let ng = self.ng(g) || self.ng(k);
        self.push(Op::Conv2dGradX { g, k, stride }, t, ng)
    }

    fn conv2d_grad_k_node(&mut self, g: NodeId, x: NodeId, stride: usize) -> NodeId {
        let sx = self.value(x).shape().to_vec();
        let sg = self.value(g).shape().to_vec();
        let (c_in, h, w, c_out) = (sx[0], sx[1], sx[2], sg[0]);
        let mut data = vec![0.0; c_out * c_in * 9];
        kernels::conv2d_grad_k(c_in, h, w, c_out, stride, self.value(g).data(), self.value(x).data(), &mut data);
        let t = Tensor::new(vec![c_out, c_in, 3, 3], data).unwrap();
        let ng = self.ng(g) || self.ng(x);
        self.push(Op::Conv2dGradK { g, x, stride }, t, ng)
    }
}

// ── channel/spatial structured ops ───────────────────────────────────────

impl Tape {
    fn rank3(&self, x: NodeId, what: &str) -> Result<(usize, usize, usize)> {
        let s = self.value(x).shape();
        if s.len() != 3 {
            return Err(Error::shape(format!("{what} expects [C,H,W], got {s:?}")));
        }
        Ok((s[0], s[1], s[2]))
    }

    pub fn chan_slice(&mut self, x: NodeId, from: usize, to: usize) -> Result<NodeId> {
        let (c, h, w) = self.rank3(x, "chan_slice")?;
        if from >= to || to > c {
            return Err(Error::shape(format!("channel slice [{from},{to}) of {c} channels")));
        }
        let plane = h * w;
        let t = Tensor::new(
            vec![to - from, h, w],
            self.value(x).data()[from * plane..to * plane].to_vec(),
        )
        .unwrap();
        let ng = self.ng(x);
        Ok(self.push(Op::ChanSlice { x, from, to }, t, ng))
    }

    pub fn chan_pad(&mut self, x: NodeId, total: usize, at: usize) -> Result<NodeId> {
        let (c, h, w) = self.rank3(x, "chan_pad")?;
        if at + c > total {
            return Err(Error::shape("channel pad placement out of range".to_string()));
        }
        let plane = h * w;
        let mut data = vec![0.0; total * plane];
        data[at * plane..(at + c) * plane].copy_from_slice(self.value(x).data());
        let t = Tensor::new(vec![total, h, w], data).unwrap();
        let ng = self.ng(x);
        Ok(self.push(Op::ChanPad { x, total, at }, t, ng))
    }

    pub fn chan_concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::contract("chan_concat of zero parts".to_string()));
        }
        let (_, h, w) = self.rank3(parts[0], "chan_concat")?;
        let mut data = Vec::new();
        let mut c_total = 0;
        for &p in parts {
            let (c, hp, wp) = self.rank3(p, "chan_concat")?;
            if (hp, wp) != (h, w) {
                return Err(Error::shape("chan_concat spatial mismatch".to_string()));
            }
            c_total += c;
            data.extend_from_slice(self.value(p).data());
        }
        let t = Tensor::new(vec![c_total, h, w], data).unwrap();
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(Op::ChanConcat(parts.to_vec()), t, ng))
    }

    /// Nearest-neighbor 2x upsampling.
    pub fn upsample2x(&mut self, x: NodeId) -> Result<NodeId> {
        let (c, h, w) = self.rank3(x, "upsample2x")?;
        let v = self.value(x).data();
        let mut data = vec![0.0; c * 4 * h * w];
        for ch in 0..c {
            for r in 0..h {
                let src = &v[(ch * h + r) * w..(ch * h + r + 1) * w];
                for rr in 0..2 {
                    let dst_row = (ch * 2 * h + 2 * r + rr) * 2 * w;
                    for (cidx, &val) in src.iter().enumerate() {
                        data[dst_row + 2 * cidx] = val;
                        data[dst_row + 2 * cidx + 1] = val;
                    }
                }
            }
        }
        let t = Tensor::new(vec![c, 2 * h, 2 * w], data).unwrap();
        let ng = self.ng(x);
        Ok(self.push(Op::Upsample2x(x), t, ng))
    }

    /// Sum over 2x2 blocks; transpose of [`Tape::upsample2x`].
    pub fn downsum2x(&mut self, x: NodeId) -> Result<NodeId> {
        let (c, h, w) = self.rank3(x, "downsum2x")?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::shape(format!("downsum2x needs even extents, got {h}x{w}")));
        }
        let v = self.value(x).data();
        let (oh, ow) = (h / 2, w / 2);
        let mut data = vec![0.0; c * oh * ow];
        for ch in 0..c {
            for r in 0..oh {
                for cidx in 0..ow {
                    let mut acc = 0.0;
                    for rr in 0..2 {
                        for cc in 0..2 {
                            acc += v[(ch * h + 2 * r + rr) * w + 2 * cidx + cc];
                        }
                    }
                    data[(ch * oh + r) * ow + cidx] = acc;
                }
            }
        }
        let t = Tensor::new(vec![c, oh, ow], data).unwrap();
        let ng = self.ng(x);
        Ok(self.push(Op::Downsum2x(x), t, ng))
    }

    pub fn global_avg_pool(&mut self, x: NodeId) -> Result<NodeId> {
        let (c, h, w) = self.rank3(x, "global_avg_pool")?;
        let v = self.value(x).data();
        let plane = h * w;
        let data: Vec<f64> = (0..c)
            .map(|ch| v[ch * plane..(ch + 1) * plane].iter().sum::<f64>() / plane as f64)
            .collect();
        let t = Tensor::from_vec(data);
        let ng = self.ng(x);
        Ok(self.push(Op::GlobalAvgPool(x), t, ng))
    }

    /// Spread a rank-1 vector over [C,H,W], dividing by the plane size;
    /// transpose of [`Tape::global_avg_pool`].
    pub fn spread_avg(&mut self, x: NodeId, h: usize, w: usize) -> Result<NodeId> {
        let v = self.value(x);
        if v.shape().len() != 1 {
            return Err(Error::shape("spread_avg expects rank 1".to_string()));
        }
        let c = v.numel();
        let plane = h * w;
        let mut data = vec![0.0; c * plane];
        for (ch, &val) in v.data().iter().enumerate() {
            data[ch * plane..(ch + 1) * plane].fill(val / plane as f64);
        }
        let t = Tensor::new(vec![c, h, w], data).unwrap();
        let ng = self.ng(x);
        Ok(self.push(Op::SpreadAvg { x, h, w }, t, ng))
    }
}

// ── composite helpers ────────────────────────────────────────────────────

impl Tape {
    /// `w [out,in] * x [in] + b [out]`.
    pub fn linear(&mut self, w: NodeId, b: NodeId, x: NodeId) -> Result<NodeId> {
        let in_dim = self.value(x).numel();
        let out_dim = self.value(w).shape()[0];
        let xc = self.reshape(x, vec![in_dim, 1])?;
        let y = self.matmul(w, xc)?;
        let y = self.reshape(y, vec![out_dim])?;
        self.add(y, b)
    }

    /// Sum of squared entries, as a scalar node.
    pub fn sum_squares(&mut self, x: NodeId) -> NodeId {
        let sq = self.square(x);
        self.sum(sq)
    }
}

// ── backward ─────────────────────────────────────────────────────────────

impl Tape {
    /// Reverse sweep from the scalar `loss`, producing gradient nodes for
    /// every `requires_grad` leaf (and any intermediate the sweep reaches).
    pub fn backward(&mut self, loss: NodeId) -> Result<Gradients> {
        self.backward_impl(loss, None)
    }

    /// Like [`Tape::backward`] but only builds the adjoint subgraph that
    /// feeds the given targets.
    pub fn backward_wrt(&mut self, loss: NodeId, targets: &[NodeId]) -> Result<Gradients> {
        self.backward_impl(loss, Some(targets))
    }

    fn backward_impl(&mut self, loss: NodeId, targets: Option<&[NodeId]>) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let n0 = self.nodes.len();
        // relevant[i]: the sweep should propagate through node i because some
        // differentiation target sits in its forward ancestry.
        let mut relevant = vec![false; n0];
        match targets {
            Some(ts) => {
                for t in ts {
                    relevant[t.0] = true;
                }
                for i in 0..n0 {
                    if !relevant[i] {
                        relevant[i] = self.inputs_of(i).iter().any(|p| relevant[p.0]);
                    }
                }
            }
            None => {
                for i in 0..n0 {
                    relevant[i] = self.nodes[i].needs_grad;
                }
            }
        }

        let mut cot: Vec<Option<NodeId>> = vec![None; n0];
        let seed = self.scalar(1.0);
        cot[loss.0] = Some(seed);

        for id in (0..=loss.0).rev() {
            if !relevant[id] {
                continue;
            }
            let g = match cot[id] {
                Some(g) => g,
                None => continue,
            };
            let contribs = self.vjp(id, g)?;
            for (input, contrib) in contribs {
                if input.0 >= n0 || !relevant[input.0] {
                    continue;
                }
                cot[input.0] = Some(match cot[input.0] {
                    None => contrib,
                    Some(prev) => self.add(prev, contrib)?,
                });
            }
        }

        let mut map = HashMap::new();
        for (i, c) in cot.iter().enumerate() {
            if let Some(g) = c {
                map.insert(i, *g);
            }
        }
        Ok(Gradients { map })
    }

    fn inputs_of(&self, id: usize) -> Vec<NodeId> {
        match &self.nodes[id].op {
            Op::Leaf => vec![],
            Op::Neg(x)
            | Op::Sin(x)
            | Op::Cos(x)
            | Op::Square(x)
            | Op::Sqrt(x)
            | Op::Recip(x)
            | Op::Softplus(x)
            | Op::Sigmoid(x)
            | Op::LeakyRelu(x, _)
            | Op::AddScalar(x, _)
            | Op::MulScalar(x, _)
            | Op::Reshape(x)
            | Op::Transpose(x)
            | Op::Sum(x)
            | Op::Fill(x)
            | Op::Upsample2x(x)
            | Op::Downsum2x(x)
            | Op::GlobalAvgPool(x)
            | Op::SpreadAvg { x, .. }
            | Op::SliceVec { x, .. }
            | Op::PadVec { x, .. }
            | Op::BroadcastAxis { x, .. }
            | Op::ReduceAxis { x, .. }
            | Op::ChanSlice { x, .. }
            | Op::ChanPad { x, .. } => vec![*x],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::MatMul(a, b) => vec![*a, *b],
            Op::Conv1d { x, k, .. } => vec![*x, *k],
            Op::Conv1dGradX { g, k, .. } => vec![*g, *k],
            Op::Conv1dGradK { g, x, .. } => vec![*g, *x],
            Op::Conv2d { x, k, .. } => vec![*x, *k],
            Op::Conv2dGradX { g, k, .. } => vec![*g, *k],
            Op::Conv2dGradK { g, x, .. } => vec![*g, *x],
            Op::Concat(parts) | Op::ChanConcat(parts) => parts.clone(),
        }
    }

    /// Vector-Jacobian product: contributions of upstream cotangent `g` to
    /// each input of node `id`, expressed as new tape nodes.
    fn vjp(&mut self, id: usize, g: NodeId) -> Result<Vec<(NodeId, NodeId)>> {
        let op = self.nodes[id].op.clone();
        let out = NodeId(id);
        Ok(match op {
            Op::Leaf => vec![],
            Op::Neg(x) => vec![(x, self.neg(g))],
            Op::Sin(x) => {
                let c = self.cos(x);
                vec![(x, self.mul(g, c)?)]
            }
            Op::Cos(x) => {
                let s = self.sin(x);
                let gs = self.mul(g, s)?;
                vec![(x, self.neg(gs))]
            }
            Op::Square(x) => {
                let two_x = self.mul_scalar(x, 2.0);
                vec![(x, self.mul(g, two_x)?)]
            }
            Op::Sqrt(x) => {
                // d sqrt = g / (2 sqrt(x)); reuse the output node.
                let inv = self.recip(out);
                let half = self.mul_scalar(inv, 0.5);
                vec![(x, self.mul(g, half)?)]
            }
            Op::Recip(x) => {
                let sq = self.square(out);
                let gy = self.mul(g, sq)?;
                vec![(x, self.neg(gy))]
            }
            Op::Softplus(x) => {
                let s = self.sigmoid(x);
                vec![(x, self.mul(g, s)?)]
            }
            Op::Sigmoid(x) => {
                let one_minus = self.neg(out);
                let one_minus = self.add_scalar(one_minus, 1.0);
                let prod = self.mul(out, one_minus)?;
                vec![(x, self.mul(g, prod)?)]
            }
            Op::LeakyRelu(x, slope) => {
                // Mask is piecewise constant in x; treat it as data.
                let mask: Vec<f64> = self
                    .value(x)
                    .data()
                    .iter()
                    .map(|&v| if v > 0.0 { 1.0 } else { slope })
                    .collect();
                let shape = self.value(x).shape().to_vec();
                let m = self.constant(Tensor::new(shape, mask).unwrap());
                vec![(x, self.mul(g, m)?)]
            }
            Op::AddScalar(x, _) => vec![(x, g)],
            Op::MulScalar(x, c) => vec![(x, self.mul_scalar(g, c))],
            Op::Add(a, b) => vec![(a, g), (b, g)],
            Op::Sub(a, b) => vec![(a, g), (b, self.neg(g))],
            Op::Mul(a, b) => vec![(a, self.mul(g, b)?), (b, self.mul(g, a)?)],
            Op::Reshape(x) => {
                let shape = self.value(x).shape().to_vec();
                vec![(x, self.reshape(g, shape)?)]
            }
            Op::Transpose(x) => vec![(x, self.transpose(g)?)],
            Op::Concat(parts) => {
                let mut out_contribs = Vec::new();
                let mut offset = 0;
                for p in parts {
                    let len = self.value(p).numel();
                    out_contribs.push((p, self.slice_vec(g, offset, len)?));
                    offset += len;
                }
                out_contribs
            }
            Op::SliceVec { x, start, len: _ } => {
                let total = self.value(x).numel();
                vec![(x, self.pad_vec(g, total, start)?)]
            }
            Op::PadVec { x, at, .. } => {
                let len = self.value(x).numel();
                vec![(x, self.slice_vec(g, at, len)?)]
            }
            Op::BroadcastAxis { x, axis } => vec![(x, self.reduce_axis(g, axis)?)],
            Op::ReduceAxis { x, axis } => {
                let shape = self.value(x).shape().to_vec();
                vec![(x, self.broadcast_axis(g, &shape, axis)?)]
            }
            Op::Sum(x) => {
                let shape = self.value(x).shape().to_vec();
                vec![(x, self.fill(g, shape)?)]
            }
            Op::Fill(x) => vec![(x, self.sum(g))],
            Op::MatMul(a, b) => {
                let bt = self.transpose(b)?;
                let at = self.transpose(a)?;
                vec![(a, self.matmul(g, bt)?), (b, self.matmul(at, g)?)]
            }
            Op::Conv1d { x, k, pad } => {
                let w = self.value(k).shape()[0];
                let gx = self.conv1d_grad_x_node(g, k, pad);
                let gk = self.conv1d_grad_k_node(g, x, pad, w);
                vec![(x, gx), (k, gk)]
            }
            Op::Conv1dGradX { g: g0, k, pad } => {
                // out = grad_x(g0, k); <out, h> = <g0, conv1d(h, k)>.
                let w = self.value(k).shape()[0];
                let dg = self.conv1d(g, k, pad)?;
                let dk = self.conv1d_grad_k_node(g0, g, pad, w);
                vec![(g0, dg), (k, dk)]
            }
            Op::Conv1dGradK { g: g0, x, pad } => {
                let dg = self.conv1d(x, g, pad)?;
                let dx = self.conv1d_grad_x_node(g0, g, pad);
                vec![(g0, dg), (x, dx)]
            }
            Op::Conv2d { x, k, stride } => {
                let s = self.value(x).shape().to_vec();
                let gx = self.conv2d_grad_x_node(g, k, stride, s[1], s[2]);
                let gk = self.conv2d_grad_k_node(g, x, stride);
                vec![(x, gx), (k, gk)]
            }
            Op::Conv2dGradX { g: g0, k, stride } => {
                let dg = self.conv2d(g, k, stride)?;
                let dk = self.conv2d_grad_k_node(g0, g, stride);
                vec![(g0, dg), (k, dk)]
            }
            Op::Conv2dGradK { g: g0, x, stride } => {
                let dg = self.conv2d(x, g, stride)?;
                let s = self.value(x).shape().to_vec();
                let dx = self.conv2d_grad_x_node(g0, g, stride, s[1], s[2]);
                vec![(g0, dg), (x, dx)]
            }
            Op::ChanSlice { x, from, .. } => {
                let total = self.value(x).shape()[0];
                vec![(x, self.chan_pad(g, total, from)?)]
            }
            Op::ChanPad { x, at, .. } => {
                let c = self.value(x).shape()[0];
                vec![(x, self.chan_slice(g, at, at + c)?)]
            }
            Op::ChanConcat(parts) => {
                let mut out_contribs = Vec::new();
                let mut offset = 0;
                for p in parts {
                    let c = self.value(p).shape()[0];
                    out_contribs.push((p, self.chan_slice(g, offset, offset + c)?));
                    offset += c;
                }
                out_contribs
            }
            Op::Upsample2x(x) => vec![(x, self.downsum2x(g)?)],
            Op::Downsum2x(x) => vec![(x, self.upsample2x(g)?)],
            Op::GlobalAvgPool(x) => {
                let s = self.value(x).shape().to_vec();
                vec![(x, self.spread_avg(g, s[1], s[2])?)]
            }
            Op::SpreadAvg { x, .. } => vec![(x, self.global_avg_pool(g)?)],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::RngKey;

    fn leaf_vec(tape: &mut Tape, v: Vec<f64>) -> NodeId {
        tape.leaf(Tensor::from_vec(v).with_grad())
    }

    #[test]
    fn elementwise_identities() {
        let mut t = Tape::new();
        let zero = t.constant(Tensor::from_vec(vec![0.0]));
        let s = t.sin(zero);
        assert_eq!(t.value(s).data(), &[0.0]);
        let c = t.cos(zero);
        assert_eq!(t.value(c).data(), &[1.0]);
        let a = t.constant(Tensor::from_vec(vec![1.0, 2.0]));
        let b = t.constant(Tensor::from_vec(vec![3.0, 4.0]));
        let s = t.add(a, b).unwrap();
        assert_eq!(t.value(s).data(), &[4.0, 6.0]);
    }

    #[test]
    fn add_shape_mismatch_errors() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::zeros(vec![2, 3]));
        let b = t.constant(Tensor::zeros(vec![3, 2]));
        assert!(matches!(t.add(a, b), Err(Error::Shape(_))));
    }

    #[test]
    fn channel_broadcast_add() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::new(vec![2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let b = t.constant(Tensor::from_vec(vec![10.0, 20.0]));
        let y = t.add(x, b).unwrap();
        assert_eq!(t.value(y).data(), &[11.0, 12.0, 23.0, 24.0]);
    }

    #[test]
    fn matmul_identity_and_example() {
        let mut t = Tape::new();
        let i = t.constant(Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let x = t.constant(Tensor::new(vec![2, 1], vec![5.0, -3.0]).unwrap());
        let y = t.matmul(i, x).unwrap();
        assert_eq!(t.value(y).data(), &[5.0, -3.0]);

        let a = t.constant(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let ones = t.constant(Tensor::new(vec![2, 1], vec![1.0, 1.0]).unwrap());
        let p = t.matmul(a, ones).unwrap();
        assert_eq!(t.value(p).data(), &[3.0, 7.0]);

        let bad = t.constant(Tensor::zeros(vec![3, 1]));
        assert!(matches!(t.matmul(a, bad), Err(Error::Shape(_))));
    }

    #[test]
    fn conv1d_even_kernel_rejected() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::zeros(vec![4, 1]));
        let k = t.constant(Tensor::zeros(vec![2, 1, 1]));
        assert!(matches!(t.conv1d(x, k, Pad1d::Zero), Err(Error::Config(_))));
    }

    #[test]
    fn conv2d_odd_extent_stride2_rejected() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::zeros(vec![1, 5, 4]));
        let k = t.constant(Tensor::zeros(vec![1, 1, 3, 3]));
        assert!(matches!(t.conv2d(x, k, 2), Err(Error::Shape(_))));
    }

    #[test]
    fn backward_of_sum_is_ones() {
        let mut t = Tape::new();
        let x = leaf_vec(&mut t, vec![1.0, -2.0, 3.0]);
        let loss = t.sum(x);
        let grads = t.backward(loss).unwrap();
        assert_eq!(grads.tensor(&t, x).data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_of_sum_of_squares_is_two_x() {
        let mut t = Tape::new();
        let x = leaf_vec(&mut t, vec![1.0, -2.0, 3.0]);
        let loss = t.sum_squares(x);
        let grads = t.backward(loss).unwrap();
        assert_eq!(grads.tensor(&t, x).data(), &[2.0, -4.0, 6.0]);
    }

    #[test]
    fn non_scalar_loss_is_a_contract_error() {
        let mut t = Tape::new();
        let x = leaf_vec(&mut t, vec![1.0, 2.0]);
        assert!(matches!(t.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn unreached_leaf_gets_zero_gradient() {
        let mut t = Tape::new();
        let x = leaf_vec(&mut t, vec![1.0, 2.0]);
        let y = leaf_vec(&mut t, vec![3.0]);
        let loss = t.sum(x);
        let grads = t.backward(loss).unwrap();
        assert_eq!(grads.tensor(&t, y).data(), &[0.0]);
    }

    #[test]
    fn gradient_linearity() {
        // grad(a*L1 + b*L2) == a*grad(L1) + b*grad(L2)
        let data = RngKey::new(3, "lin", 0).normal_vec(6);
        let (a, b) = (0.7, -1.3);

        let run = |mode: u8| -> Vec<f64> {
            let mut t = Tape::new();
            let x = t.leaf(Tensor::from_vec(data.clone()).with_grad());
            let l1 = t.sum_squares(x);
            let s = t.sin(x);
            let l2 = t.sum(s);
            let loss = match mode {
                0 => {
                    let sa = t.mul_scalar(l1, a);
                    let sb = t.mul_scalar(l2, b);
                    t.add(sa, sb).unwrap()
                }
                1 => l1,
                _ => l2,
            };
            let g = t.backward(loss).unwrap();
            g.tensor(&t, x).into_data()
        };

        let combined = run(0);
        let g1 = run(1);
        let g2 = run(2);
        for i in 0..combined.len() {
            let expect = a * g1[i] + b * g2[i];
            assert!((combined[i] - expect).abs() < 1e-10, "coord {i}");
        }
    }

    #[test]
    fn transpose_pairs_roundtrip_adjoints() {
        // <up(x), g> == <x, downsum(g)> on random data.
        let key = RngKey::new(8, "adj", 0);
        let x = Tensor::new(vec![2, 3, 3], key.normal_vec(18)).unwrap();
        let g = Tensor::new(vec![2, 6, 6], RngKey::new(8, "adj", 1).normal_vec(72)).unwrap();
        let mut t = Tape::new();
        let xid = t.constant(x.clone());
        let gid = t.constant(g.clone());
        let up = t.upsample2x(xid).unwrap();
        let down = t.downsum2x(gid).unwrap();
        let lhs: f64 = t.value(up).data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(t.value(down).data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn detach_blocks_gradient() {
        let mut t = Tape::new();
        let x = leaf_vec(&mut t, vec![2.0, 3.0]);
        let d = t.detach(x);
        let y = t.sum_squares(d);
        let grads = t.backward(y).unwrap();
        assert_eq!(grads.tensor(&t, x).data(), &[0.0, 0.0]);
    }
}
