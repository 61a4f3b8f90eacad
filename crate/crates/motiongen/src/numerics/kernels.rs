//! Raw value-level kernels behind the taped operations.
//!
//! Each convolution comes as a (forward, grad-input, grad-kernel) triple so
//! the tape can express every adjoint in terms of other taped primitives,
//! which keeps second-order differentiation (needed by the R1 penalty)
//! closed under the op set.

/// 1D padding behavior at sequence ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pad1d {
    Zero,
    /// Replicate the first/last element (anchor tracks extend lazily, so the
    /// nearest materialized neighbor stands in for the missing one).
    NeighborExtend,
}

/// `a [m,k] * b [k,n] -> out [m,n]`, accumulating into `out`.
pub fn matmul_acc(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let out_row = &mut out[i * n..(i + 1) * n];
        for (p, &a_ip) in a_row.iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &b_pj) in out_row.iter_mut().zip(b_row.iter()) {
                *o += a_ip * b_pj;
            }
        }
    }
}

fn clamp_idx(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// `x [L,Cin] * k [w,Cin,Cout] -> y [L,Cout]`, same-length output, odd `w`.
pub fn conv1d_fwd(
    l: usize,
    c_in: usize,
    c_out: usize,
    w: usize,
    pad: Pad1d,
    x: &[f64],
    k: &[f64],
    y: &mut [f64],
) {
    let c = (w / 2) as isize;
    for t in 0..l {
        let y_row = &mut y[t * c_out..(t + 1) * c_out];
        for d in 0..w {
            let s = t as isize + d as isize - c;
            let x_row = match pad {
                Pad1d::Zero => {
                    if s < 0 || s >= l as isize {
                        continue;
                    }
                    &x[s as usize * c_in..(s as usize + 1) * c_in]
                }
                Pad1d::NeighborExtend => {
                    let s = clamp_idx(s, l);
                    &x[s * c_in..(s + 1) * c_in]
                }
            };
            for (ci, &xv) in x_row.iter().enumerate() {
                let k_row = &k[(d * c_in + ci) * c_out..(d * c_in + ci + 1) * c_out];
                for (yo, &kv) in y_row.iter_mut().zip(k_row.iter()) {
                    *yo += xv * kv;
                }
            }
        }
    }
}

/// Gradient of `conv1d` w.r.t. `x`: `g [L,Cout] -> gx [L,Cin]`.
pub fn conv1d_grad_x(
    l: usize,
    c_in: usize,
    c_out: usize,
    w: usize,
    pad: Pad1d,
    g: &[f64],
    k: &[f64],
    gx: &mut [f64],
) {
    let c = (w / 2) as isize;
    for t in 0..l {
        let g_row = &g[t * c_out..(t + 1) * c_out];
        for d in 0..w {
            let s = t as isize + d as isize - c;
            let s = match pad {
                Pad1d::Zero => {
                    if s < 0 || s >= l as isize {
                        continue;
                    }
                    s as usize
                }
                Pad1d::NeighborExtend => clamp_idx(s, l),
            };
            let gx_row = &mut gx[s * c_in..(s + 1) * c_in];
            for (ci, gxv) in gx_row.iter_mut().enumerate() {
                let k_row = &k[(d * c_in + ci) * c_out..(d * c_in + ci + 1) * c_out];
                let mut acc = 0.0;
                for (gv, kv) in g_row.iter().zip(k_row.iter()) {
                    acc += gv * kv;
                }
                *gxv += acc;
            }
        }
    }
}

/// Gradient of `conv1d` w.r.t. `k`: `g [L,Cout], x [L,Cin] -> gk [w,Cin,Cout]`.
pub fn conv1d_grad_k(
    l: usize,
    c_in: usize,
    c_out: usize,
    w: usize,
    pad: Pad1d,
    g: &[f64],
    x: &[f64],
    gk: &mut [f64],
) {
    let c = (w / 2) as isize;
    for t in 0..l {
        let g_row = &g[t * c_out..(t + 1) * c_out];
        for d in 0..w {
            let s = t as isize + d as isize - c;
            let x_row = match pad {
                Pad1d::Zero => {
                    if s < 0 || s >= l as isize {
                        continue;
                    }
                    &x[s as usize * c_in..(s as usize + 1) * c_in]
                }
                Pad1d::NeighborExtend => {
                    let s = clamp_idx(s, l);
                    &x[s * c_in..(s + 1) * c_in]
                }
            };
            for (ci, &xv) in x_row.iter().enumerate() {
                let gk_row = &mut gk[(d * c_in + ci) * c_out..(d * c_in + ci + 1) * c_out];
                for (gkv, gv) in gk_row.iter_mut().zip(g_row.iter()) {
                    *gkv += xv * gv;
                }
            }
        }
    }
}

/// Valid output-column range `[lo, hi)` for a tap column offset
/// `is = dw - 1`, so `iw = cidx * stride + is` stays inside `[0, w)`.
#[inline]
fn col_bounds(w: usize, ow: usize, stride: usize, is: isize) -> (usize, usize) {
    let lo = if is < 0 { (-is as usize).div_ceil(stride) } else { 0 };
    let hi_num = w as isize - 1 - is;
    let hi = if hi_num < 0 { 0 } else { (hi_num as usize / stride + 1).min(ow) };
    (lo, hi.max(lo))
}

/// 3x3 convolution, zero padding 1. `x [Cin,H,W] * k [Cout,Cin,3,3] ->
/// y [Cout,H/stride,W/stride]` for stride in {1, 2}.
pub fn conv2d_fwd(
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    stride: usize,
    x: &[f64],
    k: &[f64],
    y: &mut [f64],
) {
    let (oh, ow) = (h / stride, w / stride);
    for o in 0..c_out {
        for i in 0..c_in {
            let x_plane = &x[i * h * w..(i + 1) * h * w];
            for dh in 0..3 {
                for dw in 0..3 {
                    let kv = k[((o * c_in + i) * 3 + dh) * 3 + dw];
                    if kv == 0.0 {
                        continue;
                    }
                    let is = dw as isize - 1;
                    let (lo, hi) = col_bounds(w, ow, stride, is);
                    if lo >= hi {
                        continue;
                    }
                    for r in 0..oh {
                        let ih = (r * stride + dh) as isize - 1;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let x_row = &x_plane[ih as usize * w..(ih as usize + 1) * w];
                        let y_row = &mut y[(o * oh + r) * ow..(o * oh + r + 1) * ow];
                        let x_base = (lo * stride) as isize + is;
                        if stride == 1 {
                            let xs = &x_row[x_base as usize..x_base as usize + (hi - lo)];
                            for (yv, xv) in y_row[lo..hi].iter_mut().zip(xs) {
                                *yv += kv * xv;
                            }
                        } else {
                            let mut iw = x_base as usize;
                            for yv in y_row[lo..hi].iter_mut() {
                                *yv += kv * x_row[iw];
                                iw += stride;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Gradient of `conv2d` w.r.t. `x`.
pub fn conv2d_grad_x(
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    stride: usize,
    g: &[f64],
    k: &[f64],
    gx: &mut [f64],
) {
    let (oh, ow) = (h / stride, w / stride);
    for o in 0..c_out {
        for i in 0..c_in {
            let gx_plane = &mut gx[i * h * w..(i + 1) * h * w];
            for dh in 0..3 {
                for dw in 0..3 {
                    let kv = k[((o * c_in + i) * 3 + dh) * 3 + dw];
                    if kv == 0.0 {
                        continue;
                    }
                    let is = dw as isize - 1;
                    let (lo, hi) = col_bounds(w, ow, stride, is);
                    if lo >= hi {
                        continue;
                    }
                    for r in 0..oh {
                        let ih = (r * stride + dh) as isize - 1;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let g_row = &g[(o * oh + r) * ow..(o * oh + r + 1) * ow];
                        let gx_row = &mut gx_plane[ih as usize * w..(ih as usize + 1) * w];
                        let x_base = ((lo * stride) as isize + is) as usize;
                        if stride == 1 {
                            let dst = &mut gx_row[x_base..x_base + (hi - lo)];
                            for (xv, gv) in dst.iter_mut().zip(&g_row[lo..hi]) {
                                *xv += kv * gv;
                            }
                        } else {
                            let mut iw = x_base;
                            for gv in &g_row[lo..hi] {
                                gx_row[iw] += kv * gv;
                                iw += stride;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Gradient of `conv2d` w.r.t. `k`.
pub fn conv2d_grad_k(
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    stride: usize,
    g: &[f64],
    x: &[f64],
    gk: &mut [f64],
) {
    let (oh, ow) = (h / stride, w / stride);
    for o in 0..c_out {
        for i in 0..c_in {
            let x_plane = &x[i * h * w..(i + 1) * h * w];
            for dh in 0..3 {
                for dw in 0..3 {
                    let is = dw as isize - 1;
                    let (lo, hi) = col_bounds(w, ow, stride, is);
                    if lo >= hi {
                        continue;
                    }
                    let mut acc = 0.0;
                    for r in 0..oh {
                        let ih = (r * stride + dh) as isize - 1;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let x_row = &x_plane[ih as usize * w..(ih as usize + 1) * w];
                        let g_row = &g[(o * oh + r) * ow..(o * oh + r + 1) * ow];
                        let x_base = ((lo * stride) as isize + is) as usize;
                        if stride == 1 {
                            let xs = &x_row[x_base..x_base + (hi - lo)];
                            for (gv, xv) in g_row[lo..hi].iter().zip(xs) {
                                acc += gv * xv;
                            }
                        } else {
                            let mut iw = x_base;
                            for gv in &g_row[lo..hi] {
                                acc += gv * x_row[iw];
                                iw += stride;
                            }
                        }
                    }
                    gk[((o * c_in + i) * 3 + dh) * 3 + dw] += acc;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::RngKey;

    // Naive triple-loop oracle, deliberately index-by-index.
    fn matmul_oracle(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for p in 0..k {
                    acc += a[i * k + p] * b[p * n + j];
                }
                out[i * n + j] = acc;
            }
        }
        out
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let key = RngKey::new(5, "matmul", 0);
        let a = key.normal_vec(5 * 4);
        let b = RngKey::new(5, "matmul", 1).normal_vec(4 * 3);
        let mut y = vec![0.0; 5 * 3];
        matmul_acc(5, 4, 3, &a, &b, &mut y);
        let oracle = matmul_oracle(5, 4, 3, &a, &b);
        assert_eq!(y, oracle);
    }

    #[test]
    fn conv1d_single_channel_example() {
        // x=[1,2,3], k=[1,1,1], zero padding -> [3,6,5]
        let x = [1.0, 2.0, 3.0];
        let k = [1.0, 1.0, 1.0];
        let mut y = [0.0; 3];
        conv1d_fwd(3, 1, 1, 3, Pad1d::Zero, &x, &k, &mut y);
        assert_eq!(y, [3.0, 6.0, 5.0]);
    }

    #[test]
    fn conv1d_delta_kernel_is_identity() {
        let x = [0.5, -1.5, 2.0, 7.0];
        let k = [0.0, 1.0, 0.0];
        let mut y = [0.0; 4];
        conv1d_fwd(4, 1, 1, 3, Pad1d::Zero, &x, &k, &mut y);
        assert_eq!(y, x);
        let mut y2 = [0.0; 4];
        conv1d_fwd(4, 1, 1, 3, Pad1d::NeighborExtend, &x, &k, &mut y2);
        assert_eq!(y2, x);
    }

    // Loop oracle for 3x3 conv on one tiny input.
    fn conv2d_oracle(
        c_in: usize,
        h: usize,
        w: usize,
        c_out: usize,
        stride: usize,
        x: &[f64],
        k: &[f64],
    ) -> Vec<f64> {
        let (oh, ow) = (h / stride, w / stride);
        let mut y = vec![0.0; c_out * oh * ow];
        for o in 0..c_out {
            for r in 0..oh {
                for c in 0..ow {
                    let mut acc = 0.0;
                    for i in 0..c_in {
                        for dh in 0..3usize {
                            for dw in 0..3usize {
                                let ih = (r * stride + dh) as isize - 1;
                                let iw = (c * stride + dw) as isize - 1;
                                if ih < 0 || iw < 0 || ih >= h as isize || iw >= w as isize {
                                    continue;
                                }
                                acc += x[(i * h + ih as usize) * w + iw as usize]
                                    * k[((o * c_in + i) * 3 + dh) * 3 + dw];
                            }
                        }
                    }
                    y[(o * oh + r) * ow + c] = acc;
                }
            }
        }
        y
    }

    #[test]
    fn conv2d_matches_loop_oracle_exactly() {
        let x = RngKey::new(9, "conv2d.x", 0).normal_vec(1 * 4 * 4);
        let k = RngKey::new(9, "conv2d.k", 0).normal_vec(2 * 1 * 9);
        let mut y = vec![0.0; 2 * 4 * 4];
        conv2d_fwd(1, 4, 4, 2, 1, &x, &k, &mut y);
        assert_eq!(y, conv2d_oracle(1, 4, 4, 2, 1, &x, &k));

        let mut y2 = vec![0.0; 2 * 2 * 2];
        conv2d_fwd(1, 4, 4, 2, 2, &x, &k, &mut y2);
        assert_eq!(y2, conv2d_oracle(1, 4, 4, 2, 2, &x, &k));
    }

    #[test]
    fn conv2d_delta_kernel_reproduces_channel() {
        let x = RngKey::new(1, "delta", 0).normal_vec(2 * 4 * 4);
        // Kernel picking channel 1, center tap.
        let mut k = vec![0.0; 1 * 2 * 9];
        k[9 + 4] = 1.0;
        let mut y = vec![0.0; 16];
        conv2d_fwd(2, 4, 4, 1, 1, &x, &k, &mut y);
        assert_eq!(y, x[16..32].to_vec());
    }

    #[test]
    fn conv2d_zero_input_zero_output() {
        let x = vec![0.0; 3 * 4 * 4];
        let k = RngKey::new(2, "zk", 0).normal_vec(2 * 3 * 9);
        let mut y = vec![0.0; 2 * 16];
        conv2d_fwd(3, 4, 4, 2, 1, &x, &k, &mut y);
        assert!(y.iter().all(|&v| v == 0.0));
    }
}
