//! Training-time augmentation. Geometry (flips, crop) applies to image and
//! mask identically; photometry (blur, normalization) touches the image
//! only. The mask stays strictly binary: its geometry ops move values
//! without arithmetic, and resize uses nearest sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::postproc::Mask;
use crate::raster::{gaussian5, ImageBase};

type Image = ImageBase<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentFlags {
    /// Horizontal and vertical flips, p = 1/2 each.
    pub flip: bool,
    /// Gaussian blur with sigma uniform in [0, 1], image only.
    pub blur: bool,
    /// Crop to a 0.9 fraction at a random offset, then resize back.
    pub crop: bool,
    /// Per-image zero-mean unit-variance normalization, applied last.
    pub normalize: bool,
}

impl AugmentFlags {
    pub const ALL: AugmentFlags =
        AugmentFlags { flip: true, blur: true, crop: true, normalize: true };
    pub const NONE: AugmentFlags =
        AugmentFlags { flip: false, blur: false, crop: false, normalize: false };
}

impl Default for AugmentFlags {
    fn default() -> Self {
        AugmentFlags::ALL
    }
}

pub const CROP_FRACTION: f64 = 0.9;

fn mask_to_image(mask: &Mask) -> Image {
    Image::from_fn(mask.h, mask.w, |y, x| if mask.at(y, x) { 1.0 } else { 0.0 })
}

fn image_to_mask(img: &Image) -> Mask {
    let mut m = Mask::zeros(img.h, img.w);
    for y in 0..img.h {
        for x in 0..img.w {
            m.set(y, x, img.at(y, x) > 0.5);
        }
    }
    m
}

/// Mean/variance normalization over one image; variance floor guards flat
/// images.
pub fn normalize_image(img: &Image) -> Image {
    let n = (img.h * img.w) as f64;
    let mean = img.data.iter().sum::<f64>() / n;
    let var = img.data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-12);
    img.map(|v| (v - mean) / std)
}

/// Apply the enabled augmentations. Draws happen in a fixed order (flip h,
/// flip v, blur sigma, crop offsets) so a given stream state always yields
/// the same transform.
pub fn augment(img: &Image, mask: &Mask, flags: AugmentFlags, rng: &mut impl Rng) -> (Image, Mask) {
    let mut img = img.clone();
    let mut maskf = mask_to_image(mask);

    if flags.flip {
        if rng.gen::<f64>() < 0.5 {
            img = img.flip_h();
            maskf = maskf.flip_h();
        }
        if rng.gen::<f64>() < 0.5 {
            img = img.flip_v();
            maskf = maskf.flip_v();
        }
    }
    if flags.blur {
        let sigma = rng.gen_range(0.0..=1.0);
        img = gaussian5(&img, sigma);
    }
    if flags.crop {
        let (h, w) = (img.h, img.w);
        let ch = ((h as f64 * CROP_FRACTION).round() as usize).max(1);
        let cw = ((w as f64 * CROP_FRACTION).round() as usize).max(1);
        let top = rng.gen_range(0..=h - ch);
        let left = rng.gen_range(0..=w - cw);
        img = img.crop(top, left, ch, cw).resize_bilinear(h, w);
        maskf = maskf.crop(top, left, ch, cw).resize_nearest(h, w);
    }
    if flags.normalize {
        img = normalize_image(&img);
    }
    (img, image_to_mask(&maskf))
}
