//! Forward and backward array kernels. Pure functions over [`TensorBase`];
//! the autodiff tape in `graph` records which of these to replay backwards.
//!
//! Gradient conventions that the finite-difference harness pins down:
//! max-style ops route the incoming gradient to the first maximum in
//! row-major scan order; relu takes subgradient 0 at exactly 0; average
//! pooling splits evenly; bilinear upsampling transposes its sampling
//! weights. Accumulation order is fixed (row-major) so results are
//! bit-reproducible run to run.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::TensorBase;

/// Output index range `[lo, hi)` such that `0 <= out*stride + off < limit_in`,
/// clipped to `limit_out`.
fn out_range(limit_in: usize, off: isize, stride: usize, limit_out: usize) -> (usize, usize) {
    let s = stride as isize;
    let lo = if off >= 0 { 0 } else { (-off + s - 1) / s };
    let hi_in = (limit_in as isize - 1 - off).div_euclid(s) + 1;
    let lo = lo.max(0) as usize;
    let hi = hi_in.clamp(0, limit_out as isize) as usize;
    (lo.min(hi), hi)
}

/// Spatial output extent of a convolution: floor((n + 2p - k)/s) + 1.
pub fn conv_out_extent(n: usize, k: usize, stride: usize, padding: usize) -> Result<usize> {
    let padded = n + 2 * padding;
    if padded < k {
        return Err(Error::Shape(format!(
            "kernel {k} exceeds padded extent {padded}"
        )));
    }
    Ok((padded - k) / stride + 1)
}

fn check_conv_args<T: Scalar>(
    x: &TensorBase<T>,
    w: &TensorBase<T>,
    b: &TensorBase<T>,
    stride: usize,
) -> Result<(usize, usize, usize, usize, usize)> {
    let (c, h, wd) = x.dims3()?;
    let ws = w.shape();
    if ws.len() != 4 || ws[2] != ws[3] {
        return Err(Error::Shape(format!("conv weight must be (O,C,K,K), got {ws:?}")));
    }
    let (o, wc, k) = (ws[0], ws[1], ws[2]);
    if wc != c {
        return Err(Error::Shape(format!("conv weight expects {wc} input channels, tensor has {c}")));
    }
    if k % 2 == 0 {
        return Err(Error::Shape(format!("conv kernel extent {k} must be odd")));
    }
    if !(stride == 1 || stride == 2) {
        return Err(Error::Shape(format!("conv stride {stride} unsupported")));
    }
    if b.shape() != [o] {
        return Err(Error::Shape(format!("conv bias shape {:?}, want [{o}]", b.shape())));
    }
    Ok((c, h, wd, o, k))
}

/// 2D cross-correlation with zero padding.
pub fn conv2d<T: Scalar>(
    x: &TensorBase<T>,
    w: &TensorBase<T>,
    b: &TensorBase<T>,
    stride: usize,
    padding: usize,
) -> Result<TensorBase<T>> {
    let (c_in, h, wd, o_ch, k) = check_conv_args(x, w, b, stride)?;
    let oh = conv_out_extent(h, k, stride, padding)?;
    let ow = conv_out_extent(wd, k, stride, padding)?;
    let mut out = TensorBase::zeros(&[o_ch, oh, ow]);
    let p = padding as isize;
    let xd = x.data();
    let wdat = w.data();
    let bias = b.data();
    let od = out.data_mut();
    for o in 0..o_ch {
        let out_plane = &mut od[o * oh * ow..(o + 1) * oh * ow];
        out_plane.fill(bias[o]);
        for c in 0..c_in {
            let x_plane = &xd[c * h * wd..(c + 1) * h * wd];
            for ky in 0..k {
                let y_off = ky as isize - p;
                let (y_lo, y_hi) = out_range(h, y_off, stride, oh);
                for kx in 0..k {
                    let x_off = kx as isize - p;
                    let wv = wdat[((o * c_in + c) * k + ky) * k + kx];
                    let (x_lo, x_hi) = out_range(wd, x_off, stride, ow);
                    if x_lo >= x_hi {
                        continue;
                    }
                    for y in y_lo..y_hi {
                        let iy = (y * stride) as isize + y_off;
                        let in_row = &x_plane[iy as usize * wd..(iy as usize + 1) * wd];
                        let out_row = &mut out_plane[y * ow + x_lo..y * ow + x_hi];
                        let in_start = (x_lo * stride) as isize + x_off;
                        if stride == 1 {
                            let src = &in_row[in_start as usize..in_start as usize + out_row.len()];
                            for (ov, iv) in out_row.iter_mut().zip(src) {
                                *ov = *ov + wv * *iv;
                            }
                        } else {
                            let src = in_row[in_start as usize..].iter().step_by(2);
                            for (ov, iv) in out_row.iter_mut().zip(src) {
                                *ov = *ov + wv * *iv;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d`] with respect to input, weight, and bias.
pub fn conv2d_backward<T: Scalar>(
    x: &TensorBase<T>,
    w: &TensorBase<T>,
    dy: &TensorBase<T>,
    stride: usize,
    padding: usize,
) -> Result<(TensorBase<T>, TensorBase<T>, TensorBase<T>)> {
    let (c_in, h, wd) = x.dims3()?;
    let ws = w.shape();
    let (o_ch, k) = (ws[0], ws[2]);
    let (dyc, oh, ow) = dy.dims3()?;
    if dyc != o_ch {
        return Err(Error::Shape(format!("conv backward: dy channels {dyc} != {o_ch}")));
    }
    let mut dx = TensorBase::zeros(x.shape());
    let mut dw = TensorBase::zeros(w.shape());
    let mut db = TensorBase::zeros(&[o_ch]);
    let p = padding as isize;
    let xd = x.data();
    let wdat = w.data();
    let dyd = dy.data();
    {
        let dbd = db.data_mut();
        for o in 0..o_ch {
            let mut acc = T::zero();
            for v in &dyd[o * oh * ow..(o + 1) * oh * ow] {
                acc = acc + *v;
            }
            dbd[o] = acc;
        }
    }
    let dxd = dx.data_mut();
    let dwd = dw.data_mut();
    for o in 0..o_ch {
        let dy_plane = &dyd[o * oh * ow..(o + 1) * oh * ow];
        for c in 0..c_in {
            let x_plane = &xd[c * h * wd..(c + 1) * h * wd];
            let dx_plane = &mut dxd[c * h * wd..(c + 1) * h * wd];
            for ky in 0..k {
                let y_off = ky as isize - p;
                let (y_lo, y_hi) = out_range(h, y_off, stride, oh);
                for kx in 0..k {
                    let x_off = kx as isize - p;
                    let (x_lo, x_hi) = out_range(wd, x_off, stride, ow);
                    if x_lo >= x_hi {
                        continue;
                    }
                    let widx = ((o * c_in + c) * k + ky) * k + kx;
                    let wv = wdat[widx];
                    let mut wacc = T::zero();
                    for y in y_lo..y_hi {
                        let iy = ((y * stride) as isize + y_off) as usize;
                        let in_start = ((x_lo * stride) as isize + x_off) as usize;
                        let dy_row = &dy_plane[y * ow + x_lo..y * ow + x_hi];
                        if stride == 1 {
                            let x_row = &x_plane[iy * wd + in_start..iy * wd + in_start + dy_row.len()];
                            let dx_row = &mut dx_plane[iy * wd + in_start..iy * wd + in_start + dy_row.len()];
                            for ((g, xv), dxv) in dy_row.iter().zip(x_row).zip(dx_row) {
                                wacc = wacc + *g * *xv;
                                *dxv = *dxv + wv * *g;
                            }
                        } else {
                            for (j, g) in dy_row.iter().enumerate() {
                                let ix = iy * wd + in_start + 2 * j;
                                wacc = wacc + *g * x_plane[ix];
                                dx_plane[ix] = dx_plane[ix] + wv * *g;
                            }
                        }
                    }
                    dwd[widx] = dwd[widx] + wacc;
                }
            }
        }
    }
    Ok((dx, dw, db))
}

fn check_even_pool<T: Scalar>(x: &TensorBase<T>) -> Result<(usize, usize, usize)> {
    let (c, h, w) = x.dims3()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!("pool2 needs even extents, got {h}x{w}")));
    }
    Ok((c, h, w))
}

/// 2x2 stride-2 max pooling. Returns the pooled tensor and, per output
/// element, the linear index of the winning input (first maximum in
/// row-major window order).
pub fn maxpool2<T: Scalar>(x: &TensorBase<T>) -> Result<(TensorBase<T>, Vec<u32>)> {
    let (c, h, w) = check_even_pool(x)?;
    let (oh, ow) = (h / 2, w / 2);
    let mut out = TensorBase::zeros(&[c, oh, ow]);
    let mut argmax = vec![0u32; c * oh * ow];
    let xd = x.data();
    let od = out.data_mut();
    for ci in 0..c {
        let plane = ci * h * w;
        for y in 0..oh {
            for xo in 0..ow {
                let base = plane + (2 * y) * w + 2 * xo;
                let cand = [base, base + 1, base + w, base + w + 1];
                let mut best = cand[0];
                let mut bv = xd[best];
                for &idx in &cand[1..] {
                    if xd[idx] > bv {
                        bv = xd[idx];
                        best = idx;
                    }
                }
                let oi = ci * oh * ow + y * ow + xo;
                od[oi] = bv;
                argmax[oi] = best as u32;
            }
        }
    }
    Ok((out, argmax))
}

pub fn maxpool2_backward<T: Scalar>(
    dy: &TensorBase<T>,
    argmax: &[u32],
    in_shape: &[usize],
) -> TensorBase<T> {
    let mut dx = TensorBase::zeros(in_shape);
    let dxd = dx.data_mut();
    for (g, &src) in dy.data().iter().zip(argmax) {
        dxd[src as usize] = dxd[src as usize] + *g;
    }
    dx
}

/// 2x2 stride-2 average pooling.
pub fn avgpool2<T: Scalar>(x: &TensorBase<T>) -> Result<TensorBase<T>> {
    let (c, h, w) = check_even_pool(x)?;
    let (oh, ow) = (h / 2, w / 2);
    let quarter = T::from_f64(0.25);
    let mut out = TensorBase::zeros(&[c, oh, ow]);
    let xd = x.data();
    let od = out.data_mut();
    for ci in 0..c {
        let plane = ci * h * w;
        for y in 0..oh {
            for xo in 0..ow {
                let base = plane + (2 * y) * w + 2 * xo;
                od[ci * oh * ow + y * ow + xo] =
                    (xd[base] + xd[base + 1] + xd[base + w] + xd[base + w + 1]) * quarter;
            }
        }
    }
    Ok(out)
}

pub fn avgpool2_backward<T: Scalar>(dy: &TensorBase<T>, in_shape: &[usize]) -> TensorBase<T> {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (h / 2, w / 2);
    let quarter = T::from_f64(0.25);
    let mut dx = TensorBase::zeros(in_shape);
    let dxd = dx.data_mut();
    let dyd = dy.data();
    for ci in 0..c {
        for y in 0..oh {
            for xo in 0..ow {
                let g = dyd[ci * oh * ow + y * ow + xo] * quarter;
                let base = ci * h * w + (2 * y) * w + 2 * xo;
                dxd[base] = dxd[base] + g;
                dxd[base + 1] = dxd[base + 1] + g;
                dxd[base + w] = dxd[base + w] + g;
                dxd[base + w + 1] = dxd[base + w + 1] + g;
            }
        }
    }
    dx
}

/// Sampling taps for 2x bilinear upsampling without corner alignment:
/// output index -> (lower source index clamped, upper source index clamped,
/// weight of the upper tap). Source position is (i + 0.5)/2 - 0.5.
fn up2_taps(out_idx: usize, in_len: usize) -> (usize, usize, f64) {
    let s = (out_idx as f64 + 0.5) / 2.0 - 0.5;
    let i0 = s.floor();
    let t = s - i0;
    let lo = (i0.max(0.0) as usize).min(in_len - 1);
    let hi = ((i0 + 1.0).max(0.0) as usize).min(in_len - 1);
    (lo, hi, t)
}

/// Bilinear 2x upsampling, (C,H,W) -> (C,2H,2W), edge-clamped taps.
pub fn upsample2<T: Scalar>(x: &TensorBase<T>) -> Result<TensorBase<T>> {
    let (c, h, w) = x.dims3()?;
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = TensorBase::zeros(&[c, oh, ow]);
    let xd = x.data();
    let od = out.data_mut();
    for ci in 0..c {
        let plane = &xd[ci * h * w..(ci + 1) * h * w];
        let out_plane = &mut od[ci * oh * ow..(ci + 1) * oh * ow];
        for y in 0..oh {
            let (y0, y1, ty) = up2_taps(y, h);
            let (ty, sy) = (T::from_f64(ty), T::from_f64(1.0 - ty));
            let r0 = &plane[y0 * w..y0 * w + w];
            let r1 = &plane[y1 * w..y1 * w + w];
            let out_row = &mut out_plane[y * ow..(y + 1) * ow];
            for xo in 0..ow {
                let (x0, x1, tx) = up2_taps(xo, w);
                let (tx, sx) = (T::from_f64(tx), T::from_f64(1.0 - tx));
                let top = sx * r0[x0] + tx * r0[x1];
                let bot = sx * r1[x0] + tx * r1[x1];
                out_row[xo] = sy * top + ty * bot;
            }
        }
    }
    Ok(out)
}

pub fn upsample2_backward<T: Scalar>(dy: &TensorBase<T>, in_shape: &[usize]) -> TensorBase<T> {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (2 * h, 2 * w);
    let mut dx = TensorBase::zeros(in_shape);
    let dxd = dx.data_mut();
    let dyd = dy.data();
    for ci in 0..c {
        let plane = ci * h * w;
        let out_plane = ci * oh * ow;
        for y in 0..oh {
            let (y0, y1, ty) = up2_taps(y, h);
            let (ty, sy) = (T::from_f64(ty), T::from_f64(1.0 - ty));
            for xo in 0..ow {
                let (x0, x1, tx) = up2_taps(xo, w);
                let (tx, sx) = (T::from_f64(tx), T::from_f64(1.0 - tx));
                let g = dyd[out_plane + y * ow + xo];
                dxd[plane + y0 * w + x0] = dxd[plane + y0 * w + x0] + g * sy * sx;
                dxd[plane + y0 * w + x1] = dxd[plane + y0 * w + x1] + g * sy * tx;
                dxd[plane + y1 * w + x0] = dxd[plane + y1 * w + x0] + g * ty * sx;
                dxd[plane + y1 * w + x1] = dxd[plane + y1 * w + x1] + g * ty * tx;
            }
        }
    }
    dx
}

/// Concatenate rank-3 tensors along the channel axis.
pub fn concat_channels<T: Scalar>(parts: &[&TensorBase<T>]) -> Result<TensorBase<T>> {
    if parts.is_empty() {
        return Err(Error::Shape("concat of zero tensors".into()));
    }
    let (_, h, w) = parts[0].dims3()?;
    let mut total = 0;
    for p in parts {
        let (c, ph, pw) = p.dims3()?;
        if (ph, pw) != (h, w) {
            return Err(Error::Shape(format!(
                "concat spatial mismatch: {h}x{w} vs {ph}x{pw}"
            )));
        }
        total += c;
    }
    let mut data = Vec::with_capacity(total * h * w);
    for p in parts {
        data.extend_from_slice(p.data());
    }
    TensorBase::new(&[total, h, w], data)
}

/// Global max over each channel plane, (C,H,W) -> (C,1,1); per channel the
/// absolute linear index of the first maximum is returned.
pub fn global_max<T: Scalar>(x: &TensorBase<T>) -> Result<(TensorBase<T>, Vec<u32>)> {
    let (c, h, w) = x.dims3()?;
    let mut out = TensorBase::zeros(&[c, 1, 1]);
    let mut arg = vec![0u32; c];
    let xd = x.data();
    let od = out.data_mut();
    for ci in 0..c {
        let base = ci * h * w;
        let mut best = base;
        let mut bv = xd[base];
        for idx in base + 1..base + h * w {
            if xd[idx] > bv {
                bv = xd[idx];
                best = idx;
            }
        }
        od[ci] = bv;
        arg[ci] = best as u32;
    }
    Ok((out, arg))
}

/// Global mean over each channel plane, (C,H,W) -> (C,1,1).
pub fn global_avg<T: Scalar>(x: &TensorBase<T>) -> Result<TensorBase<T>> {
    let (c, h, w) = x.dims3()?;
    let inv = T::from_f64(1.0 / (h * w) as f64);
    let mut out = TensorBase::zeros(&[c, 1, 1]);
    let xd = x.data();
    let od = out.data_mut();
    for ci in 0..c {
        let mut acc = T::zero();
        for v in &xd[ci * h * w..(ci + 1) * h * w] {
            acc = acc + *v;
        }
        od[ci] = acc * inv;
    }
    Ok(out)
}

/// Per-pixel max across channels, (C,H,W) -> (1,H,W); winning channel per
/// pixel returned (first maximum, ascending channel order).
pub fn channel_max<T: Scalar>(x: &TensorBase<T>) -> Result<(TensorBase<T>, Vec<u32>)> {
    let (c, h, w) = x.dims3()?;
    let mut out = TensorBase::zeros(&[1, h, w]);
    let mut arg = vec![0u32; h * w];
    let xd = x.data();
    let od = out.data_mut();
    for pix in 0..h * w {
        let mut bc = 0usize;
        let mut bv = xd[pix];
        for ci in 1..c {
            let v = xd[ci * h * w + pix];
            if v > bv {
                bv = v;
                bc = ci;
            }
        }
        od[pix] = bv;
        arg[pix] = bc as u32;
    }
    Ok((out, arg))
}

/// Per-pixel mean across channels, (C,H,W) -> (1,H,W).
pub fn channel_mean<T: Scalar>(x: &TensorBase<T>) -> Result<TensorBase<T>> {
    let (c, h, w) = x.dims3()?;
    let inv = T::from_f64(1.0 / c as f64);
    let mut out = TensorBase::zeros(&[1, h, w]);
    let xd = x.data();
    let od = out.data_mut();
    for pix in 0..h * w {
        let mut acc = T::zero();
        for ci in 0..c {
            acc = acc + xd[ci * h * w + pix];
        }
        od[pix] = acc * inv;
    }
    Ok(out)
}

/// relu elementwise; subgradient at 0 is 0.
pub fn relu<T: Scalar>(x: &TensorBase<T>) -> TensorBase<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Logistic sigmoid, clamped to the open interval so downstream code can rely
/// on strict 0 < y < 1 even at saturation.
pub fn sigmoid<T: Scalar>(x: &TensorBase<T>) -> TensorBase<T> {
    let lo = T::min_positive_value();
    let hi = T::one() - T::epsilon() / T::from_f64(2.0);
    x.map(|v| {
        let s = T::one() / (T::one() + (-v).exp());
        s.max(lo).min(hi)
    })
}

/// y = w @ x for w (O,I), x (I,1,1) -> (O,1,1). The shared-MLP building block.
pub fn linear<T: Scalar>(w: &TensorBase<T>, x: &TensorBase<T>) -> Result<TensorBase<T>> {
    let ws = w.shape();
    let xs = x.shape();
    if ws.len() != 2 || xs != [ws[1], 1, 1] {
        return Err(Error::Shape(format!("linear: w {ws:?} incompatible with x {xs:?}")));
    }
    let (o, i) = (ws[0], ws[1]);
    let mut out = TensorBase::zeros(&[o, 1, 1]);
    let wd = w.data();
    let xd = x.data();
    let od = out.data_mut();
    for r in 0..o {
        let mut acc = T::zero();
        for (wv, xv) in wd[r * i..(r + 1) * i].iter().zip(xd) {
            acc = acc + *wv * *xv;
        }
        od[r] = acc;
    }
    Ok(out)
}

/// Scale each channel plane of x (C,H,W) by s[c] from a (C,1,1) tensor.
pub fn mul_channel<T: Scalar>(s: &TensorBase<T>, x: &TensorBase<T>) -> Result<TensorBase<T>> {
    let (c, h, w) = x.dims3()?;
    if s.shape() != [c, 1, 1] {
        return Err(Error::Shape(format!(
            "channel scale shape {:?}, want [{c},1,1]",
            s.shape()
        )));
    }
    let mut out = TensorBase::zeros(x.shape());
    let sd = s.data();
    let xd = x.data();
    let od = out.data_mut();
    for ci in 0..c {
        let sv = sd[ci];
        for (o, v) in od[ci * h * w..(ci + 1) * h * w].iter_mut().zip(&xd[ci * h * w..(ci + 1) * h * w]) {
            *o = sv * *v;
        }
    }
    Ok(out)
}

/// Scale every channel of x (C,H,W) pixelwise by m (1,H,W).
pub fn mul_spatial<T: Scalar>(m: &TensorBase<T>, x: &TensorBase<T>) -> Result<TensorBase<T>> {
    let (c, h, w) = x.dims3()?;
    if m.shape() != [1, h, w] {
        return Err(Error::Shape(format!(
            "spatial map shape {:?}, want [1,{h},{w}]",
            m.shape()
        )));
    }
    let mut out = TensorBase::zeros(x.shape());
    let md = m.data();
    let xd = x.data();
    let od = out.data_mut();
    for ci in 0..c {
        for ((o, v), mv) in od[ci * h * w..(ci + 1) * h * w]
            .iter_mut()
            .zip(&xd[ci * h * w..(ci + 1) * h * w])
            .zip(md)
        {
            *o = *mv * *v;
        }
    }
    Ok(out)
}

/// Sum of all elements, as a shape-[1] tensor.
pub fn sum_all<T: Scalar>(x: &TensorBase<T>) -> TensorBase<T> {
    let mut acc = T::zero();
    for v in x.data() {
        acc = acc + *v;
    }
    TensorBase::scalar(acc)
}

pub fn ew_binary<T: Scalar>(
    a: &TensorBase<T>,
    b: &TensorBase<T>,
    f: impl Fn(T, T) -> T,
) -> Result<TensorBase<T>> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "elementwise op on {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
    TensorBase::new(a.shape(), data)
}
