//! Independent reference implementations the oracle tests compare against.
//! Everything here is written as plainly as possible (explicit loops, no
//! shared helpers with the crate under test) so an agreement failure points
//! at the engine, not at the oracle.

#![allow(dead_code)]

use sirst_core::net::{Attention, NetworkSpec, Variant};
use sirst_core::postproc::Mask;
use sirst_core::raster::ImageBase;
use sirst_core::tensor::TensorBase;

pub type Tensor = TensorBase<f64>;
pub type Image = ImageBase<f64>;

/// Relative error with an absolute floor so near-zero pairs compare on an
/// absolute scale.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

/// Deterministic pseudo-random filler on a simple counter hash; keeps the
/// oracles free of the crate's own rng module.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_u64(&mut self) -> u64 {
        // splitmix64
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [-1, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    /// Uniform in [0, 1).
    pub fn pos(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

pub fn random_tensor(shape: &[usize], rng: &mut Lcg) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.unit()).collect()).unwrap()
}

// ---------------------------------------------------------------------------
// naive layer references

/// Direct seven-loop cross-correlation with zero padding.
pub fn naive_conv2d(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, padding: usize) -> Tensor {
    let (ci, h, wi) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (co, k) = (w.shape()[0], w.shape()[2]);
    assert_eq!(w.shape()[1], ci);
    let ho = (h + 2 * padding - k) / stride + 1;
    let wo = (wi + 2 * padding - k) / stride + 1;
    let mut out = vec![0.0; co * ho * wo];
    for o in 0..co {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = b.data()[o];
                for c in 0..ci {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = oy * stride + ky;
                            let ix = ox * stride + kx;
                            if iy < padding || ix < padding {
                                continue;
                            }
                            let (iy, ix) = (iy - padding, ix - padding);
                            if iy >= h || ix >= wi {
                                continue;
                            }
                            acc += x.data()[(c * h + iy) * wi + ix]
                                * w.data()[((o * ci + c) * k + ky) * k + kx];
                        }
                    }
                }
                out[(o * ho + oy) * wo + ox] = acc;
            }
        }
    }
    Tensor::new(&[co, ho, wo], out).unwrap()
}

pub fn naive_maxpool2(x: &Tensor) -> Tensor {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (ho, wo) = (h / 2, w / 2);
    let mut out = vec![0.0; c * ho * wo];
    for ch in 0..c {
        for y in 0..ho {
            for xo in 0..wo {
                let mut m = f64::NEG_INFINITY;
                for dy in 0..2 {
                    for dx in 0..2 {
                        m = m.max(x.data()[(ch * h + 2 * y + dy) * w + 2 * xo + dx]);
                    }
                }
                out[(ch * ho + y) * wo + xo] = m;
            }
        }
    }
    Tensor::new(&[c, ho, wo], out).unwrap()
}

pub fn naive_avgpool2(x: &Tensor) -> Tensor {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (ho, wo) = (h / 2, w / 2);
    let mut out = vec![0.0; c * ho * wo];
    for ch in 0..c {
        for y in 0..ho {
            for xo in 0..wo {
                let mut s = 0.0;
                for dy in 0..2 {
                    for dx in 0..2 {
                        s += x.data()[(ch * h + 2 * y + dy) * w + 2 * xo + dx];
                    }
                }
                out[(ch * ho + y) * wo + xo] = s / 4.0;
            }
        }
    }
    Tensor::new(&[c, ho, wo], out).unwrap()
}

/// 2x bilinear upsampling by direct source-position evaluation: output pixel
/// i samples input position (i + 0.5)/2 - 0.5 with edge clamping.
pub fn naive_upsample2(x: &Tensor) -> Tensor {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (ho, wo) = (2 * h, 2 * w);
    let tap = |i: usize, n: usize| -> (usize, usize, f64) {
        let p = (i as f64 + 0.5) / 2.0 - 0.5;
        let lo = p.floor();
        let t = p - lo;
        let a = (lo.max(0.0) as usize).min(n - 1);
        let b = ((lo + 1.0).max(0.0) as usize).min(n - 1);
        (a, b, t)
    };
    let mut out = vec![0.0; c * ho * wo];
    for ch in 0..c {
        for y in 0..ho {
            let (y0, y1, ty) = tap(y, h);
            for xo in 0..wo {
                let (x0, x1, tx) = tap(xo, w);
                let v00 = x.data()[(ch * h + y0) * w + x0];
                let v01 = x.data()[(ch * h + y0) * w + x1];
                let v10 = x.data()[(ch * h + y1) * w + x0];
                let v11 = x.data()[(ch * h + y1) * w + x1];
                out[(ch * ho + y) * wo + xo] =
                    (1.0 - ty) * ((1.0 - tx) * v00 + tx * v01) + ty * ((1.0 - tx) * v10 + tx * v11);
            }
        }
    }
    Tensor::new(&[c, ho, wo], out).unwrap()
}

// ---------------------------------------------------------------------------
// wiring reference

/// One expected node of the fusion grid, in comparison-friendly form.
#[derive(Debug, PartialEq, Eq, Clone)]
pub struct ExpectedNode {
    pub i: usize,
    pub j: usize,
    /// (source, transform name), sorted.
    pub inputs: Vec<((usize, usize), &'static str)>,
    pub in_channels: usize,
    pub out_channels: usize,
    pub pool_after: bool,
}

/// Re-derives the whole grid from the connection rules, written against the
/// (i, j) definitions directly rather than any staged construction order.
pub fn expected_grid(spec: &NetworkSpec) -> Vec<ExpectedNode> {
    let depth = spec.depth;
    let ch = &spec.channels;
    let mut out = Vec::new();
    for i in 0..=depth {
        let jmax = match spec.variant {
            Variant::Full | Variant::LeftToRight | Variant::TopToBottom => depth - i,
            Variant::PlainSkip => {
                if i == depth {
                    0
                } else {
                    1
                }
            }
        };
        for j in 0..=jmax {
            let mut inputs: Vec<((usize, usize), &'static str)> = Vec::new();
            let mut in_channels = 0;
            if j == 0 {
                if i == 0 {
                    in_channels = 1;
                } else {
                    inputs.push(((i - 1, 0), "direct"));
                    in_channels = ch[i - 1];
                }
            } else if spec.variant == Variant::PlainSkip {
                // plain decoder: encoder skip plus the deeper decoder,
                // which is the deepest encoder at the bottom of the U
                inputs.push(((i, 0), "direct"));
                let below_j = if i + 1 == depth { 0 } else { 1 };
                inputs.push(((i + 1, below_j), "upsampled"));
                in_channels = ch[i] + ch[i + 1];
                if spec.attention == Attention::SumFusion {
                    in_channels = ch[i];
                }
            } else {
                let dense: Vec<usize> = match spec.variant {
                    Variant::TopToBottom => vec![j - 1],
                    _ => (0..j).collect(),
                };
                for k in dense {
                    inputs.push(((i, k), "direct"));
                    in_channels += ch[i];
                }
                if i > 0 && spec.variant != Variant::LeftToRight {
                    inputs.push(((i - 1, j), "pooled"));
                    in_channels += ch[i - 1];
                }
                inputs.push(((i + 1, j - 1), "upsampled"));
                in_channels += ch[i + 1];
                if spec.attention == Attention::SumFusion {
                    in_channels = ch[i];
                }
            }
            inputs.sort();
            out.push(ExpectedNode {
                i,
                j,
                inputs,
                in_channels,
                out_channels: ch[i],
                pool_after: j == 0 && i > 0,
            });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// component labeling and metrics references

/// 8-connected labeling by BFS flood fill, components numbered 1.. in
/// row-major first-encounter order.
pub fn bfs_label(mask: &Mask) -> (Vec<u32>, usize) {
    let (h, w) = (mask.h, mask.w);
    let mut labels = vec![0u32; h * w];
    let mut next = 0u32;
    let mut queue = std::collections::VecDeque::new();
    for sy in 0..h {
        for sx in 0..w {
            if !mask.at(sy, sx) || labels[sy * w + sx] != 0 {
                continue;
            }
            next += 1;
            labels[sy * w + sx] = next;
            queue.push_back((sy, sx));
            while let Some((y, x)) = queue.pop_front() {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (ny, nx) = (y as i64 + dy, x as i64 + dx);
                        if ny < 0 || nx < 0 || ny >= h as i64 || nx >= w as i64 {
                            continue;
                        }
                        let (ny, nx) = (ny as usize, nx as usize);
                        if mask.at(ny, nx) && labels[ny * w + nx] == 0 {
                            labels[ny * w + nx] = next;
                            queue.push_back((ny, nx));
                        }
                    }
                }
            }
        }
    }
    (labels, next as usize)
}

/// Centroids of the BFS labels, ordered by label id.
pub fn bfs_centroids(mask: &Mask) -> Vec<(f64, f64, usize)> {
    let (labels, count) = bfs_label(mask);
    let mut sums = vec![(0.0, 0.0, 0usize); count];
    for y in 0..mask.h {
        for x in 0..mask.w {
            let l = labels[y * mask.w + x];
            if l > 0 {
                let s = &mut sums[(l - 1) as usize];
                s.0 += y as f64;
                s.1 += x as f64;
                s.2 += 1;
            }
        }
    }
    sums.iter().map(|&(sy, sx, n)| (sy / n as f64, sx / n as f64, n)).collect()
}

/// Everything criterion-level scoring needs for one mask pair, recomputed
/// from first principles.
#[derive(Debug, PartialEq, Eq, Clone, Copy)]
pub struct BruteCounts {
    pub intersection: usize,
    pub union: usize,
    pub t_correct: usize,
    pub t_all: usize,
    pub p_false: usize,
    pub p_all: usize,
}

pub fn brute_counts(pred: &Mask, gt: &Mask, d_thresh: f64) -> BruteCounts {
    let mut intersection = 0;
    let mut union = 0;
    for y in 0..pred.h {
        for x in 0..pred.w {
            let (p, g) = (pred.at(y, x), gt.at(y, x));
            if p && g {
                intersection += 1;
            }
            if p || g {
                union += 1;
            }
        }
    }
    let pc = bfs_centroids(pred);
    let gc = bfs_centroids(gt);
    // greedy one-to-one on ascending (deviation, gt id, pred id)
    let mut cand = Vec::new();
    for (gi, g) in gc.iter().enumerate() {
        for (pi, p) in pc.iter().enumerate() {
            let dev = ((g.0 - p.0).powi(2) + (g.1 - p.1).powi(2)).sqrt();
            if dev < d_thresh {
                cand.push((dev, gi, pi));
            }
        }
    }
    cand.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut gt_used = vec![false; gc.len()];
    let mut pred_used = vec![false; pc.len()];
    let mut t_correct = 0;
    for (_, gi, pi) in cand {
        if !gt_used[gi] && !pred_used[pi] {
            gt_used[gi] = true;
            pred_used[pi] = true;
            t_correct += 1;
        }
    }
    let p_false = pc
        .iter()
        .enumerate()
        .filter(|(i, _)| !pred_used[*i])
        .map(|(_, c)| c.2)
        .sum();
    BruteCounts {
        intersection,
        union,
        t_correct,
        t_all: gc.len(),
        p_false,
        p_all: pred.h * pred.w,
    }
}

// ---------------------------------------------------------------------------
// scalar-formula references

/// t = max(0.7 * max, mean + 0.5 * std) evaluated directly; same two-pass
/// population statistics, left-to-right sums.
pub fn direct_adaptive_threshold(map: &Image) -> f64 {
    let n = (map.h * map.w) as f64;
    let mut maxv = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for y in 0..map.h {
        for x in 0..map.w {
            let v = map.at(y, x);
            if v > maxv {
                maxv = v;
            }
            sum += v;
        }
    }
    let mean = sum / n;
    let mut acc = 0.0;
    for y in 0..map.h {
        for x in 0..map.w {
            let d = map.at(y, x) - mean;
            acc += d * d;
        }
    }
    (0.7 * maxv).max(mean + 0.5 * (acc / n).sqrt())
}

/// |mean(target) - mean(ring)| / std(ring), population std, straight from
/// the definition over explicit coordinate lists.
pub fn direct_scr(img: &Image, target: &[(usize, usize)], ring: &[(usize, usize)]) -> f64 {
    let mt: f64 = target.iter().map(|&(y, x)| img.at(y, x)).sum::<f64>() / target.len() as f64;
    let mb: f64 = ring.iter().map(|&(y, x)| img.at(y, x)).sum::<f64>() / ring.len() as f64;
    let var: f64 =
        ring.iter().map(|&(y, x)| (img.at(y, x) - mb).powi(2)).sum::<f64>() / ring.len() as f64;
    (mt - mb).abs() / var.sqrt()
}
