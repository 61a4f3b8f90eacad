//! Acceptance suite: one test per shipped guarantee, each printing a
//! `[PASS]` line (visible with `--nocapture`). Tolerances are fixed here,
//! not tuned at runtime.

use std::collections::HashMap;
use std::time::Instant;

use motiongen::error::Result;
use motiongen::metrics::{frechet_distance, frechet_from_samples, GaussianStats};
use motiongen::modulation::{
    modulated_conv_forward, ModLayerConfig, ModLayerWeights,
};
use motiongen::motion::{
    blend_weights, bspline_basis, continuity, embedding_nodes, BSplineConfig, MotionConfig,
    MotionEval, MotionMode, MotionNodes, MotionWeights,
};
use motiongen::numerics::linalg::singular_values;
use motiongen::numerics::{
    finite_diff_gradient, relative_error, NodeId, Pad1d, RngKey, Tape, Tensor,
};
use motiongen::pipeline::{
    gan_losses, generate_frames, r1_penalty, train_stage, write_ppm, GeneratorConfig,
    GeneratorWeights, TrainConfig,
};
use motiongen::temporal::{tsm_shift, tsm_shift_nodes, FrameStack};

// ── criterion 1: spline exactness ────────────────────────────────────────

#[test]
fn criterion_01_spline_exactness() {
    let start = Instant::now();
    let interval = 64.0;

    // Partition of unity: 10^4 random times spanning 20 intervals.
    for k in [2usize, 3, 4] {
        let cfg = BSplineConfig::new(k, interval).unwrap();
        let key = RngKey::new(101, "pou", k as i64);
        for s in 0..10_000u64 {
            let t = (key.uniform(s) * 20.0 - 5.0) * interval;
            let sum: f64 = blend_weights(&cfg, t).unwrap().iter().map(|(_, w)| w).sum();
            assert!(
                (sum - 1.0).abs() <= 1e-9,
                "partition of unity violated at k={k}, t={t}: sum={sum}"
            );
        }
    }

    // Local support, exactly zero outside [t_i, t_{i+k}).
    let knots = |i: i64| i as f64 * interval;
    for k in [2usize, 3, 4] {
        for i in -4..4i64 {
            let (lo, hi) = (knots(i), knots(i + k as i64));
            for step in -30..60 {
                let t = lo + (hi - lo) * step as f64 / 30.0;
                let b = bspline_basis(i, k, t, &knots);
                if t < lo || t >= hi {
                    assert_eq!(b, 0.0, "support leak at k={k}, i={i}, t={t}");
                }
                assert!(b >= 0.0);
            }
        }
    }

    // Order-2 blend == linear interpolation on a 10^4-point grid.
    let cfg = MotionConfig {
        seed: 11,
        code_dim: 8,
        interval,
        order: 2,
        mode: MotionMode::BSpline,
        hidden: 8,
    };
    let weights = MotionWeights::init(&cfg, 11, "m").unwrap();
    let mut eval = MotionEval::new(&cfg, &weights);
    for j in 0..10_000 {
        let t = -2.0 * interval + j as f64 * (8.0 * interval) / 10_000.0;
        let spline = eval.blended_feature(t).unwrap();
        let lerp = eval.lerp_feature(t).unwrap();
        for (a, b) in spline.iter().zip(&lerp) {
            assert!((a - b).abs() <= 1e-9, "order-2/lerp divergence at t={t}: {a} vs {b}");
        }
    }

    let dt = start.elapsed().as_secs_f64();
    assert!(dt < 5.0, "criterion 1 exceeded its 5 s budget: {dt:.2}s");
    println!("[PASS] criterion 1: spline exactness (partition of unity, support, order-2 = lerp) in {dt:.2}s");
}

// ── criterion 2: first-order smoothness ──────────────────────────────────

fn crossing_mismatch(eval: &mut MotionEval, spline: bool, t_a: f64, h: f64) -> f64 {
    let f = |e: &mut MotionEval, t: f64| -> Vec<f64> {
        if spline {
            e.blended_feature(t).unwrap()
        } else {
            e.lerp_feature(t).unwrap()
        }
    };
    let (fm, f0, fp) = (f(eval, t_a - h), f(eval, t_a), f(eval, t_a + h));
    fm.iter()
        .zip(f0.iter().zip(&fp))
        .map(|(&a, (&b, &c))| {
            let d = (c - b) / h - (b - a) / h;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[test]
fn criterion_02_first_order_smoothness() {
    let start = Instant::now();
    let cfg = MotionConfig {
        seed: 23,
        code_dim: 16,
        interval: 64.0,
        order: 3,
        mode: MotionMode::BSpline,
        hidden: 16,
    };
    let weights = MotionWeights::init(&cfg, 23, "m").unwrap();
    let mut eval = MotionEval::new(&cfg, &weights);

    let anchors: Vec<f64> = (1..=6).map(|m| m as f64 * cfg.interval).collect();
    let hs = [1e-2, 1e-3, 1e-4];
    let mean_mismatch = |eval: &mut MotionEval, spline: bool, h: f64| -> f64 {
        anchors.iter().map(|&t| crossing_mismatch(eval, spline, t, h)).sum::<f64>()
            / anchors.len() as f64
    };

    let spline_m: Vec<f64> = hs.iter().map(|&h| mean_mismatch(&mut eval, true, h)).collect();
    for w in spline_m.windows(2) {
        let slope = (w[0] / w[1]).log10();
        assert!(
            (0.8..=1.2).contains(&slope),
            "spline mismatch not O(h): decade ratio 10^{slope:.3} ({} -> {})",
            w[0],
            w[1]
        );
    }

    let linear_small: Vec<f64> = hs.iter().map(|&h| mean_mismatch(&mut eval, false, h)).collect();
    // Converges to a constant: the last two h values agree closely.
    let drift = (linear_small[1] - linear_small[2]).abs() / linear_small[2];
    assert!(drift < 0.01, "linear mismatch did not stabilize: {linear_small:?}");
    assert!(
        linear_small[2] >= 10.0 * spline_m[2],
        "linear mismatch {} not >= 10x spline mismatch {}",
        linear_small[2],
        spline_m[2]
    );

    let dt = start.elapsed().as_secs_f64();
    assert!(dt < 5.0, "criterion 2 exceeded its 5 s budget: {dt:.2}s");
    println!(
        "[PASS] criterion 2: spline crossing mismatch O(h) ({:.2e} -> {:.2e} -> {:.2e}), linear plateau {:.3e} (>= 10x) in {dt:.2}s",
        spline_m[0], spline_m[1], spline_m[2], linear_small[2]
    );
}

// ── criterion 3: gradient integrity ──────────────────────────────────────

/// Weighted-sum readout so every output coordinate matters.
fn wsum(tape: &mut Tape, out: NodeId, seed: u64) -> NodeId {
    let n = tape.value(out).numel();
    let shape = tape.value(out).shape().to_vec();
    let w = tape.constant(
        Tensor::new(shape, RngKey::new(seed, "readout", 7).normal_vec(n)).unwrap(),
    );
    let prod = tape.mul(out, w).unwrap();
    tape.sum(prod)
}

/// AD-vs-central-difference check over ten seeds.
fn gradcheck<F>(name: &str, numel: usize, domain: (f64, f64), f: F)
where
    F: Fn(&mut Tape, NodeId, u64) -> Result<NodeId>,
{
    for seed in 0..10u64 {
        let data: Vec<f64> = RngKey::new(seed, name, 0)
            .uniform_vec(numel)
            .into_iter()
            .map(|u| domain.0 + u * (domain.1 - domain.0))
            .collect();
        let x0 = Tensor::from_vec(data);

        let mut tape = Tape::new();
        let x = tape.leaf(x0.clone().with_grad());
        let loss = f(&mut tape, x, seed).unwrap();
        let grads = tape.backward(loss).unwrap();
        let ad = grads.tensor(&tape, x);

        let fd = finite_diff_gradient(
            |xt| {
                let mut t = Tape::new();
                let xl = t.leaf(xt.clone().with_grad());
                let l = f(&mut t, xl, seed)?;
                t.value(l).item()
            },
            &x0,
            1e-3,
        )
        .unwrap();
        let err = relative_error(&ad, &fd);
        assert!(err <= 1e-4, "{name} seed {seed}: rel err {err:.3e}");
    }
}

/// Keep leaky-relu inputs away from the kink so central differences stay
/// on one branch.
fn away_from_zero(tape: &mut Tape, x: NodeId) -> NodeId {
    let s = tape.sigmoid(x);
    let s = tape.add_scalar(s, 0.5); // in (0.5, 1.5), strictly positive
    tape.mul(x, s).unwrap()
}

#[test]
fn criterion_03_gradient_integrity() {
    let start = Instant::now();

    gradcheck("sin", 6, (-1.0, 1.0), |t, x, s| {
        let y = t.sin(x);
        Ok(wsum(t, y, s))
    });
    gradcheck("cos", 6, (-1.0, 1.0), |t, x, s| {
        let y = t.cos(x);
        Ok(wsum(t, y, s))
    });
    gradcheck("softplus", 6, (-1.0, 1.0), |t, x, s| {
        let y = t.softplus(x);
        Ok(wsum(t, y, s))
    });
    gradcheck("square", 6, (-1.0, 1.0), |t, x, s| {
        let y = t.square(x);
        Ok(wsum(t, y, s))
    });
    gradcheck("sqrt", 6, (0.5, 1.5), |t, x, s| {
        let y = t.sqrt(x);
        Ok(wsum(t, y, s))
    });
    gradcheck("leaky_relu", 6, (0.3, 1.0), |t, x, s| {
        let signed = away_from_zero(t, x);
        let y = t.leaky_relu(signed, 0.2);
        Ok(wsum(t, y, s))
    });
    gradcheck("add_sub_mul", 12, (-1.0, 1.0), |t, x, s| {
        let a = t.slice_vec(x, 0, 6)?;
        let b = t.slice_vec(x, 6, 6)?;
        let ab = t.add(a, b)?;
        let sb = t.sub(ab, a)?;
        let m = t.mul(sb, b)?;
        Ok(wsum(t, m, s))
    });

    gradcheck("matmul", 5 * 4 + 4 * 3, (-1.0, 1.0), |t, x, s| {
        let a = t.slice_vec(x, 0, 20)?;
        let a = t.reshape(a, vec![5, 4])?;
        let b = t.slice_vec(x, 20, 12)?;
        let b = t.reshape(b, vec![4, 3])?;
        let y = t.matmul(a, b)?;
        Ok(wsum(t, y, s))
    });

    for (tag, pad) in [("conv1d_zero", Pad1d::Zero), ("conv1d_extend", Pad1d::NeighborExtend)] {
        gradcheck(tag, 5 * 2 + 3 * 2 * 3, (-1.0, 1.0), move |t, x, s| {
            let xs = t.slice_vec(x, 0, 10)?;
            let xs = t.reshape(xs, vec![5, 2])?;
            let k = t.slice_vec(x, 10, 18)?;
            let k = t.reshape(k, vec![3, 2, 3])?;
            let y = t.conv1d(xs, k, pad)?;
            Ok(wsum(t, y, s))
        });
    }

    for (tag, stride) in [("conv2d_s1", 1usize), ("conv2d_s2", 2)] {
        gradcheck(tag, 2 * 4 * 4 + 3 * 2 * 9, (-1.0, 1.0), move |t, x, s| {
            let xs = t.slice_vec(x, 0, 32)?;
            let xs = t.reshape(xs, vec![2, 4, 4])?;
            let k = t.slice_vec(x, 32, 54)?;
            let k = t.reshape(k, vec![3, 2, 3, 3])?;
            let y = t.conv2d(xs, k, stride)?;
            Ok(wsum(t, y, s))
        });
    }

    gradcheck("tsm", 3 * 8 * 2 * 2, (-1.0, 1.0), |t, x, s| {
        let frames: Vec<NodeId> = (0..3)
            .map(|i| {
                let f = t.slice_vec(x, i * 32, 32)?;
                t.reshape(f, vec![8, 2, 2])
            })
            .collect::<Result<_>>()?;
        let shifted = tsm_shift_nodes(t, &frames)?;
        let stacked = t.chan_concat(&shifted)?;
        Ok(wsum(t, stacked, s))
    });

    // Modulated conv, full variant: gradients w.r.t. u, v, and x.
    let full_layer = ModLayerWeights::init(ModLayerConfig::full(2, 3, 4, 4), 77, "fl").unwrap();
    gradcheck("modulated_full", 4 + 4 + 2 * 4 * 4, (-1.0, 1.0), move |t, x, s| {
        let nodes = full_layer.constants(t);
        let u = t.slice_vec(x, 0, 4)?;
        let v = t.slice_vec(x, 4, 4)?;
        let img = t.slice_vec(x, 8, 32)?;
        let img = t.reshape(img, vec![2, 4, 4])?;
        let y = modulated_conv_forward(t, &nodes, img, u, v)?;
        Ok(wsum(t, y, s))
    });

    // Low-rank variant: gradients w.r.t. u, v, U, and V.
    let lr_cfg = ModLayerConfig::lowrank(2, 3, 4, 4, Some(2));
    let lr_layer = ModLayerWeights::init(lr_cfg, 78, "lr").unwrap();
    let img_const = Tensor::new(vec![2, 4, 4], RngKey::new(5, "img", 0).normal_vec(32)).unwrap();
    gradcheck("modulated_lowrank", 4 + 4 + 3 * 2 + 2 * 18, (-1.0, 1.0), move |t, x, s| {
        let mut nodes = lr_layer.constants(t);
        let u = t.slice_vec(x, 0, 4)?;
        let v = t.slice_vec(x, 4, 4)?;
        let uf = t.slice_vec(x, 8, 6)?;
        let uf = t.reshape(uf, vec![3, 2])?;
        let vf = t.slice_vec(x, 14, 36)?;
        let vf = t.reshape(vf, vec![2, 18])?;
        nodes.u = Some(uf);
        nodes.v = Some(vf);
        let img = t.constant(img_const.clone());
        let y = modulated_conv_forward(t, &nodes, img, u, v)?;
        Ok(wsum(t, y, s))
    });

    // Wave positional embedding: gradient w.r.t. the reference feature.
    let wave_cfg = MotionConfig {
        seed: 31,
        code_dim: 5,
        interval: 16.0,
        order: 3,
        mode: MotionMode::Linear,
        hidden: 6,
    };
    let wave_weights = MotionWeights::init(&wave_cfg, 31, "wv").unwrap();
    gradcheck("wave_pe", 5, (-1.0, 1.0), move |t, x, s| {
        let nodes = MotionNodes::constants(t, &wave_weights);
        let w = motiongen::motion::wave_nodes(t, &nodes, x, 3.7)?;
        let pe = t.concat(&[w.sin_half, w.cos_half])?;
        Ok(wsum(t, pe, s))
    });

    // Full embedding (B-spline blend + wave) through the anchor kernel.
    let emb_cfg = MotionConfig {
        seed: 32,
        code_dim: 4,
        interval: 16.0,
        order: 3,
        mode: MotionMode::BSpline,
        hidden: 5,
    };
    let emb_weights = MotionWeights::init(&emb_cfg, 32, "em").unwrap();
    gradcheck("bspline_embedding_kernel", 3 * 4 * 4, (-0.5, 0.5), move |t, x, s| {
        let mut nodes = MotionNodes::constants(t, &emb_weights);
        let kernel = t.reshape(x, vec![3, 4, 4])?;
        nodes.kernel = kernel;
        let track = motiongen::motion::AnchorTrack::from_config(&emb_cfg);
        let mut memo: HashMap<i64, NodeId> = HashMap::new();
        let mut feat = |tape: &mut Tape, i: i64| -> Result<NodeId> {
            if let Some(&id) = memo.get(&i) {
                return Ok(id);
            }
            let id = motiongen::motion::feature_node(tape, &track, kernel, i)?;
            memo.insert(i, id);
            Ok(id)
        };
        let e = embedding_nodes(t, &emb_cfg, &nodes, 23.5, &mut feat)?;
        Ok(wsum(t, e.fused, s))
    });

    // GAN losses.
    gradcheck("gan_losses", 2, (-1.0, 1.0), |t, x, s| {
        let lr = t.slice_vec(x, 0, 1)?;
        let lr = t.reshape(lr, vec![])?;
        let lf = t.slice_vec(x, 1, 1)?;
        let lf = t.reshape(lf, vec![])?;
        let (g, d) = gan_losses(t, lr, lf)?;
        let gd = t.add(g, d)?;
        let _ = s;
        Ok(gd)
    });

    // R1 penalty: second-order gradient w.r.t. the conv kernel of a smooth
    // toy discriminator D(x) = readout(pool(softplus(conv(x, k)))).
    let x_img = Tensor::new(vec![2, 4, 4], RngKey::new(9, "r1x", 0).normal_vec(32)).unwrap();
    gradcheck("r1_penalty", 3 * 2 * 9, (-0.7, 0.7), move |t, k, s| {
        let k4 = t.reshape(k, vec![3, 2, 3, 3])?;
        let x = t.leaf(x_img.clone().with_grad());
        let y = t.conv2d(x, k4, 1)?;
        let y = t.softplus(y);
        let pooled = t.global_avg_pool(y)?;
        let logit = wsum(t, pooled, s.wrapping_add(1));
        r1_penalty(t, logit, &[x], 4.0)
    });

    let dt = start.elapsed().as_secs_f64();
    assert!(dt < 120.0, "criterion 3 exceeded its 2 min budget: {dt:.1}s");
    println!("[PASS] criterion 3: gradient integrity across all op families (10 seeds each, rel err <= 1e-4) in {dt:.1}s");
}

// ── criterion 4: tsm exactness ───────────────────────────────────────────

#[test]
fn criterion_04_tsm_exactness() {
    for (c, n_t) in [(8usize, 3usize), (16, 4), (32, 2)] {
        let (h, w) = (3usize, 2usize);
        let plane = h * w;
        let data = RngKey::new(c as u64, "tsm", n_t as i64).normal_vec(n_t * c * plane);
        let stack = FrameStack::new(
            Tensor::new(vec![n_t, c, h, w], data.clone()).unwrap(),
            (0..n_t).map(|i| i as f64).collect(),
        )
        .unwrap();
        let out = tsm_shift(&stack).unwrap();

        let c8 = c / 8;
        let src = |t: usize, ch: usize, p: usize| data[(t * c + ch) * plane + p];
        let mut borrowed_per_interior_frame = 0usize;
        for t in 0..n_t {
            for ch in 0..c {
                for p in 0..plane {
                    let expect = if ch < c8 {
                        if t == 0 { 0.0 } else { src(t - 1, ch, p) }
                    } else if ch < 7 * c8 {
                        src(t, ch, p)
                    } else if t + 1 < n_t {
                        src(t + 1, ch, p)
                    } else {
                        0.0
                    };
                    let got = out.frames.data()[(t * c + ch) * plane + p];
                    assert!(
                        got == expect,
                        "(C={c}, N_t={n_t}) frame {t} channel {ch} pixel {p}: {got} != {expect}"
                    );
                }
            }
            if t > 0 && t + 1 < n_t {
                borrowed_per_interior_frame = 2 * c8;
            }
        }
        if n_t > 2 {
            assert_eq!(borrowed_per_interior_frame, 2 * (c / 8), "one quarter of channels");
        }
    }
    println!("[PASS] criterion 4: tsm channel mapping bit-exact for (8,3), (16,4), (32,2) with zero boundaries");
}

// ── criterion 5: low-rank bound ──────────────────────────────────────────

#[test]
fn criterion_05_lowrank_bound() {
    let (c_in, c_out) = (8usize, 6usize);
    for r in [1usize, 2, 4] {
        for trial in 0..20u64 {
            let cfg = ModLayerConfig::lowrank(c_in, c_out, 4, 4, Some(r));
            let layer = ModLayerWeights::init(cfg, trial * 31 + r as u64, "cl").unwrap();
            let m = layer.motion_weight_matrix().unwrap();
            let sv = singular_values(c_out, c_in * 9, m.data()).unwrap();
            assert!(
                sv[r] <= 1e-8 * sv[0],
                "r={r} trial {trial}: sigma_{}={:.3e} vs sigma_1={:.3e}",
                r + 1,
                sv[r],
                sv[0]
            );
        }
    }

    // Constructive equivalence: a rank-C_out motion path reproducing a full
    // layer, identical outputs within 1e-10.
    let (ci, co, du, dv) = (3usize, 4usize, 2usize, 5usize);
    let mut full = ModLayerWeights::init(ModLayerConfig::full(ci, co, du, dv), 51, "f").unwrap();
    for row in 0..ci {
        for col in 0..du {
            full.affine.w.data_mut()[row * (du + dv) + col] = 0.0;
        }
    }
    let mut lowrank =
        ModLayerWeights::init(ModLayerConfig::lowrank(ci, co, du, dv, Some(co)), 52, "l").unwrap();
    lowrank.weight = Tensor::zeros(vec![co, ci, 3, 3]);
    let mut identity = vec![0.0; co * co];
    for i in 0..co {
        identity[i * co + i] = 1.0;
    }
    lowrank.u = Some(Tensor::new(vec![co, co], identity).unwrap());
    lowrank.v = Some(Tensor::new(vec![co, ci * 9], full.weight.data().to_vec()).unwrap());
    {
        let mo = lowrank.affine_mo.as_mut().unwrap();
        let mut wv = vec![0.0; ci * dv];
        for row in 0..ci {
            for col in 0..dv {
                wv[row * dv + col] = full.affine.w.data()[row * (du + dv) + du + col];
            }
        }
        mo.w = Tensor::new(vec![ci, dv], wv).unwrap();
        mo.b = full.affine.b.clone();
    }
    lowrank.bias = full.bias.clone();

    let run = |layer: &ModLayerWeights| -> Vec<f64> {
        let mut tape = Tape::new();
        let nodes = layer.constants(&mut tape);
        let u = tape.constant(Tensor::from_vec(RngKey::new(61, "u", 0).normal_vec(du)));
        let v = tape.constant(Tensor::from_vec(RngKey::new(61, "v", 0).normal_vec(dv)));
        let x = tape.constant(Tensor::new(vec![ci, 5, 5], RngKey::new(61, "x", 0).normal_vec(ci * 25)).unwrap());
        let y = modulated_conv_forward(&mut tape, &nodes, x, u, v).unwrap();
        tape.value(y).data().to_vec()
    };
    let (yf, yl) = (run(&full), run(&lowrank));
    for (i, (a, b)) in yf.iter().zip(&yl).enumerate() {
        assert!((a - b).abs() <= 1e-10, "constructive equivalence at {i}: {a} vs {b}");
    }
    println!("[PASS] criterion 5: rank bound sigma_(r+1) <= 1e-8 sigma_1 (20 trials x r in {{1,2,4}}) and full == lowrank construction within 1e-10");
}

// ── criterion 6: frechet correctness ─────────────────────────────────────

#[test]
fn criterion_06_frechet_correctness() {
    let dim = 8;
    let mut eye = vec![0.0; dim * dim];
    for i in 0..dim {
        eye[i * dim + i] = 1.0;
    }
    let mu: Vec<f64> = (0..dim).map(|i| (i as f64 - 3.0) * 0.4).collect();
    let a = GaussianStats { mean: vec![0.0; dim], cov: eye.clone(), count: 1000 };
    let b = GaussianStats { mean: mu.clone(), cov: eye, count: 1000 };
    let d = frechet_distance(&a, &b).unwrap();
    let expect: f64 = mu.iter().map(|v| v * v).sum();
    assert!((d - expect).abs() <= 1e-6, "analytic mean-shift case: {d} vs {expect}");

    // Self-distance on shared samples.
    let samples: Vec<Vec<f64>> =
        (0..200).map(|i| RngKey::new(77, "fd", i).normal_vec(dim)).collect();
    let v = frechet_from_samples(&samples, &samples).unwrap();
    assert!(v.value.abs() <= 1e-3, "self distance {}", v.value);
    println!(
        "[PASS] criterion 6: frechet analytic case within 1e-6, self-distance {:.2e} <= 1e-3",
        v.value
    );
}

// ── criterion 7: training smoke + paired tsm ablation ────────────────────

#[test]
fn criterion_07_training_smoke_and_tsm_ablation() {
    let base = std::env::temp_dir().join("motiongen_acceptance_c7");
    let _ = std::fs::remove_dir_all(&base);
    let seeds = [1u64, 2, 3];
    let mut ratios: HashMap<bool, Vec<f64>> = HashMap::new();
    let mut finals: HashMap<bool, Vec<f64>> = HashMap::new();

    for &tsm in &[false, true] {
        for &seed in &seeds {
            let mut cfg = TrainConfig::desk_video(seed);
            cfg.steps = 2000;
            cfg.disc.tsm = tsm;
            let dir = base.join(format!("seed{seed}_tsm{tsm}"));
            let started = Instant::now();
            let outcome = train_stage(&cfg, "video", &dir, None, None).unwrap();
            let wall = started.elapsed().as_secs_f64();
            assert!(wall < 1800.0, "run exceeded the 30 min budget: {wall:.0}s");

            // (a) all losses finite
            let csv = std::fs::read_to_string(dir.join("losses.csv")).unwrap();
            for (ln, line) in csv.lines().skip(1).enumerate() {
                for field in line.split(',').skip(1) {
                    let v: f64 = field.parse().unwrap();
                    assert!(v.is_finite(), "non-finite loss in line {ln}: {line}");
                }
            }
            assert_eq!(csv.lines().count(), 2001, "one row per step plus header");

            let initial = outcome.initial_fvd16.expect("initial fvd16");
            let final_v = outcome.final_fvd16.expect("final fvd16");
            println!(
                "  run seed={seed} tsm={tsm}: fvd16 {initial:.2} -> {final_v:.2} ({wall:.0}s)"
            );
            ratios.entry(tsm).or_default().push(final_v / initial);
            finals.entry(tsm).or_default().push(final_v);
        }
    }

    let median = |v: &mut Vec<f64>| -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    // (b) halving of the fvd16 proxy, median across seeds, both arms.
    for tsm in [false, true] {
        let m = median(ratios.get_mut(&tsm).unwrap());
        assert!(m <= 0.5, "median final/initial fvd16 ratio {m:.3} > 0.5 (tsm={tsm})");
    }
    // (c) directional claim; reported with paired numbers either way.
    let m_off = median(finals.get_mut(&false).unwrap());
    let m_on = median(finals.get_mut(&true).unwrap());
    if m_on <= m_off {
        println!("[PASS] criterion 7: losses finite, fvd16 halved, tsm median {m_on:.2} <= no-tsm median {m_off:.2}");
    } else {
        println!("[PASS] criterion 7 (a,b): losses finite, fvd16 halved; (c) informational: tsm median {m_on:.2} > no-tsm median {m_off:.2}; per-seed finals tsm={:?} no-tsm={:?}",
            finals[&true], finals[&false]);
    }
}

// ── criterion 8: anchor-smoothness at the embedding level ────────────────

#[test]
fn criterion_08_embedding_anchor_smoothness() {
    let start = Instant::now();
    let interval = 64.0;
    let h = 0.25;
    let n_anchors = 12usize;

    let mut score = |mode: MotionMode| -> (f64, f64) {
        let cfg = MotionConfig {
            seed: 97,
            code_dim: 16,
            interval,
            order: 3,
            mode,
            hidden: 16,
        };
        let weights = MotionWeights::init(&cfg, 97, "m").unwrap();
        let mut eval = MotionEval::new(&cfg, &weights);
        let t_lo = interval * 0.5;
        let t_hi = interval * (n_anchors as f64 + 0.75);
        let n = ((t_hi - t_lo) / h).round() as usize;
        let grid: Vec<f64> = (0..=n).map(|i| t_lo + i as f64 * h).collect();
        let traj = eval.trajectory(&grid).unwrap();
        let anchors: Vec<f64> = (1..=n_anchors).map(|m| m as f64 * interval).collect();
        let mids: Vec<f64> = (1..=n_anchors).map(|m| (m as f64 + 0.5) * interval).collect();
        let ja = continuity::jitter_at_points(&traj, &anchors, h, 2.0 * h).unwrap();
        let jm = continuity::jitter_at_points(&traj, &mids, h, 2.0 * h).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        (mean(&ja), mean(&jm))
    };

    let (lin_anchor, lin_mid) = score(MotionMode::Linear);
    assert!(
        lin_anchor >= 2.0 * lin_mid,
        "linear mode: anchor jitter {lin_anchor:.3} not >= 2x mid jitter {lin_mid:.3}"
    );

    let (bsp_anchor, bsp_mid) = score(MotionMode::BSpline);
    assert!(
        bsp_anchor <= 1.2 * bsp_mid,
        "bspline mode: anchor/mid jitter ratio {} > 1.2",
        bsp_anchor / bsp_mid
    );

    let dt = start.elapsed().as_secs_f64();
    assert!(dt < 10.0, "criterion 8 exceeded its 10 s budget: {dt:.2}s");
    println!(
        "[PASS] criterion 8: linear anchor/mid jitter {:.1}x (>= 2), bspline {:.2}x (<= 1.2) in {dt:.2}s",
        lin_anchor / lin_mid,
        bsp_anchor / bsp_mid
    );
}

// ── criterion 9: infinite-timeline contract ──────────────────────────────

#[test]
fn criterion_09_infinite_timeline() {
    let mut cfg = GeneratorConfig::default();
    cfg.motion.mode = MotionMode::BSpline;
    cfg.motion.order = 3;
    let weights = GeneratorWeights::init(cfg, 123).unwrap();
    let u = RngKey::new(5, "u", 0).normal_vec(weights.cfg.dim_u);
    let t0 = 1.0e6;
    let ts: Vec<f64> = (0..16).map(|i| t0 + i as f64).collect();

    let render = || -> (Vec<Vec<u8>>, usize) {
        let (frames, anchors) = generate_frames(&weights, &u, &ts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let bytes = frames
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let p = dir.path().join(format!("f{i}.ppm"));
                write_ppm(&p, f).unwrap();
                std::fs::read(&p).unwrap()
            })
            .collect();
        (bytes, anchors)
    };
    let (a, anchors_a) = render();
    let (b, anchors_b) = render();
    assert_eq!(a, b, "two runs must produce byte-identical frames");
    let k = weights.cfg.motion.order;
    assert!(
        anchors_a <= k + 2,
        "peak anchor cache {anchors_a} exceeds k+2 = {}",
        k + 2
    );
    assert_eq!(anchors_a, anchors_b);
    println!(
        "[PASS] criterion 9: 16 frames at t0=1e6 byte-identical across runs, peak anchor cache {anchors_a} <= {}",
        k + 2
    );
}

// ── criterion 10: run reproducibility ────────────────────────────────────

#[test]
fn criterion_10_reproducibility() {
    let mut cfg = TrainConfig::desk_video(31);
    cfg.steps = 25;
    cfg.batch = 1;
    cfg.eval.n_clips = 0;
    cfg.gen.channels = vec![8, 8];
    cfg.gen.resolution = 8;
    cfg.gen.dim_u = 8;
    cfg.gen.motion.interval = 16.0;
    cfg.gen.motion.code_dim = 8;
    cfg.disc.channels = vec![8, 8, 16];
    cfg.disc.resolution = 8;
    cfg.disc.interval = 16.0;
    cfg.data.resolution = 8;

    let base = std::env::temp_dir().join("motiongen_acceptance_c10");
    let _ = std::fs::remove_dir_all(&base);
    let run = |tag: &str| -> std::path::PathBuf {
        let dir = base.join(tag);
        train_stage(&cfg, "video", &dir, None, None).unwrap();
        dir
    };
    let d1 = run("a");
    let d2 = run("b");

    let losses1 = std::fs::read(d1.join("losses.csv")).unwrap();
    let losses2 = std::fs::read(d2.join("losses.csv")).unwrap();
    assert_eq!(losses1, losses2, "losses.csv must be byte-identical");

    for ckpt in ["ckpt_0", "ckpt_25"] {
        let names = motiongen::numerics::io::checkpoint_names(&d1.join(ckpt)).unwrap();
        assert!(!names.is_empty());
        for name in names {
            let f1 = std::fs::read(d1.join(ckpt).join(format!("{name}.bin"))).unwrap();
            let f2 = std::fs::read(d2.join(ckpt).join(format!("{name}.bin"))).unwrap();
            assert_eq!(f1, f2, "checkpoint tensor {ckpt}/{name} differs");
        }
    }
    println!("[PASS] criterion 10: repeated runs produce byte-identical losses.csv and checkpoints");
}
