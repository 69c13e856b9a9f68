//! Single-channel 2D rasters: the currency of the synthesis, baseline, and
//! post-processing stages. Values are nominally in [0,1] for imagery but the
//! type carries arbitrary floats (filter responses go negative).

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::TensorBase;

#[derive(Clone, Debug, PartialEq)]
pub struct ImageBase<T> {
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> ImageBase<T> {
    pub fn zeros(h: usize, w: usize) -> Self {
        ImageBase { h, w, data: vec![T::zero(); h * w] }
    }

    pub fn full(h: usize, w: usize, v: T) -> Self {
        ImageBase { h, w, data: vec![v; h * w] }
    }

    pub fn new(h: usize, w: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != h * w {
            return Err(Error::Shape(format!("image {h}x{w} wants {} values, got {}", h * w, data.len())));
        }
        Ok(ImageBase { h, w, data })
    }

    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                data.push(f(y, x));
            }
        }
        ImageBase { h, w, data }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> T {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: T) {
        self.data[y * self.w + x] = v;
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.w..(y + 1) * self.w]
    }

    /// Reflect an index into [0, n): -1 -> 0, n -> n-1 (edge-mirrored,
    /// edge sample included).
    pub fn reflect(i: isize, n: usize) -> usize {
        let n = n as isize;
        let mut i = i;
        loop {
            if i < 0 {
                i = -i - 1;
            } else if i >= n {
                i = 2 * n - 1 - i;
            } else {
                return i as usize;
            }
        }
    }

    #[inline]
    pub fn at_reflect(&self, y: isize, x: isize) -> T {
        let yy = Self::reflect(y, self.h);
        let xx = Self::reflect(x, self.w);
        self.data[yy * self.w + xx]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        ImageBase { h: self.h, w: self.w, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn min_max(&self) -> (T, T) {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for &v in &self.data {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        (lo, hi)
    }

    /// Rank-3 tensor view (1,H,W).
    pub fn to_tensor(&self) -> TensorBase<T> {
        TensorBase::new(&[1, self.h, self.w], self.data.clone()).expect("consistent extents")
    }

    pub fn from_tensor(t: &TensorBase<T>) -> Result<Self> {
        let (c, h, w) = t.dims3()?;
        if c != 1 {
            return Err(Error::Shape(format!("expected single-channel tensor, got {c} channels")));
        }
        ImageBase::new(h, w, t.data().to_vec())
    }

    pub fn flip_h(&self) -> Self {
        ImageBase::from_fn(self.h, self.w, |y, x| self.at(y, self.w - 1 - x))
    }

    pub fn flip_v(&self) -> Self {
        ImageBase::from_fn(self.h, self.w, |y, x| self.at(self.h - 1 - y, x))
    }

    /// Crop a window; caller guarantees it lies inside.
    pub fn crop(&self, top: usize, left: usize, ch: usize, cw: usize) -> Self {
        ImageBase::from_fn(ch, cw, |y, x| self.at(top + y, left + x))
    }

    /// Bilinear resize to (nh, nw), sampling at (i+0.5)*scale - 0.5 with
    /// edge-clamped taps (no corner alignment).
    pub fn resize_bilinear(&self, nh: usize, nw: usize) -> Self {
        let sy = self.h as f64 / nh as f64;
        let sx = self.w as f64 / nw as f64;
        ImageBase::from_fn(nh, nw, |y, x| {
            let fy = (y as f64 + 0.5) * sy - 0.5;
            let fx = (x as f64 + 0.5) * sx - 0.5;
            let y0 = fy.floor();
            let x0 = fx.floor();
            let ty = T::from_f64(fy - y0);
            let tx = T::from_f64(fx - x0);
            let cl = |v: f64, n: usize| (v.max(0.0) as usize).min(n - 1);
            let (r0, r1) = (cl(y0, self.h), cl(y0 + 1.0, self.h));
            let (c0, c1) = (cl(x0, self.w), cl(x0 + 1.0, self.w));
            let one = T::one();
            let top = (one - tx) * self.at(r0, c0) + tx * self.at(r0, c1);
            let bot = (one - tx) * self.at(r1, c0) + tx * self.at(r1, c1);
            (one - ty) * top + ty * bot
        })
    }

    /// Nearest-neighbor resize; used for masks so values stay binary.
    pub fn resize_nearest(&self, nh: usize, nw: usize) -> Self {
        let sy = self.h as f64 / nh as f64;
        let sx = self.w as f64 / nw as f64;
        ImageBase::from_fn(nh, nw, |y, x| {
            let fy = ((y as f64 + 0.5) * sy - 0.5).round().max(0.0) as usize;
            let fx = ((x as f64 + 0.5) * sx - 0.5).round().max(0.0) as usize;
            self.at(fy.min(self.h - 1), fx.min(self.w - 1))
        })
    }
}

/// 5x5 Gaussian blur, kernel normalized to unit sum, reflect padding.
/// sigma below 1e-6 degenerates to identity.
pub fn gaussian5<T: Scalar>(img: &ImageBase<T>, sigma: f64) -> ImageBase<T> {
    if sigma < 1e-6 {
        return img.clone();
    }
    let mut k = [[0.0f64; 5]; 5];
    let mut sum = 0.0;
    for (dy, row) in k.iter_mut().enumerate() {
        for (dx, v) in row.iter_mut().enumerate() {
            let (ry, rx) = (dy as f64 - 2.0, dx as f64 - 2.0);
            *v = (-(ry * ry + rx * rx) / (2.0 * sigma * sigma)).exp();
            sum += *v;
        }
    }
    for row in k.iter_mut() {
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    let mut out = ImageBase::zeros(img.h, img.w);
    for y in 0..img.h {
        for x in 0..img.w {
            let mut acc = T::zero();
            for (dy, row) in k.iter().enumerate() {
                for (dx, &kv) in row.iter().enumerate() {
                    let v = img.at_reflect(y as isize + dy as isize - 2, x as isize + dx as isize - 2);
                    acc = acc + T::from_f64(kv) * v;
                }
            }
            out.set(y, x, acc);
        }
    }
    out
}
