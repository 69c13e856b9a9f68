//! Target templates and intensity control. A template is a peak-one patch
//! with a binary support footprint; compositing replaces background values
//! inside the support with a scaled copy of the patch, scaled so the mean
//! over the support sits a requested number of background standard
//! deviations above the background mean.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::ImageBase;

type Image = ImageBase<f64>;

/// Patch values below this fraction of the peak fall outside the support.
pub const SUPPORT_CUTOFF: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    PointGaussian,
    Spot,
    Extended,
}

impl std::fmt::Display for TargetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TargetKind::PointGaussian => "point_gaussian",
            TargetKind::Spot => "spot",
            TargetKind::Extended => "extended",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct TargetTemplate {
    pub kind: TargetKind,
    /// Peak-normalized intensity patch, values in [0,1].
    pub patch: Image,
    /// Footprint: patch > SUPPORT_CUTOFF.
    pub support: Vec<(usize, usize)>,
}

impl TargetTemplate {
    fn from_patch(kind: TargetKind, patch: Image) -> Result<Self> {
        let mut support = Vec::new();
        for y in 0..patch.h {
            for x in 0..patch.w {
                if patch.at(y, x) > SUPPORT_CUTOFF {
                    support.push((y, x));
                }
            }
        }
        if support.is_empty() {
            return Err(Error::Generation("template support is empty".into()));
        }
        Ok(TargetTemplate { kind, patch, support })
    }

    /// Mean patch value over the support.
    pub fn support_mean(&self) -> f64 {
        let sum: f64 = self.support.iter().map(|&(y, x)| self.patch.at(y, x)).sum();
        sum / self.support.len() as f64
    }
}

/// Isotropic Gaussian spot with unit peak on a size x size patch.
pub fn make_point_target(size: usize, sigma: f64) -> Result<TargetTemplate> {
    gaussian_template(TargetKind::PointGaussian, size, sigma, sigma, 0.0)
}

/// Larger anisotropic Gaussian; a rotated ellipse of soft radiance.
pub fn make_spot_target(size: usize, sigma_major: f64, sigma_minor: f64, angle: f64) -> Result<TargetTemplate> {
    gaussian_template(TargetKind::Spot, size, sigma_major, sigma_minor, angle)
}

fn gaussian_template(
    kind: TargetKind,
    size: usize,
    sigma_major: f64,
    sigma_minor: f64,
    angle: f64,
) -> Result<TargetTemplate> {
    if size % 2 == 0 {
        return Err(Error::Config(format!("template size {size} must be odd")));
    }
    if sigma_major <= 0.0 || sigma_minor <= 0.0 {
        return Err(Error::Config("template sigma must be positive".into()));
    }
    let c = (size / 2) as f64;
    let (sin, cos) = angle.sin_cos();
    let patch = Image::from_fn(size, size, |y, x| {
        let dy = y as f64 - c;
        let dx = x as f64 - c;
        let u = cos * dx + sin * dy;
        let v = -sin * dx + cos * dy;
        (-(u * u) / (2.0 * sigma_major * sigma_major) - (v * v) / (2.0 * sigma_minor * sigma_minor))
            .exp()
    });
    TargetTemplate::from_patch(kind, patch)
}

/// Plateau-and-falloff ellipse standing in for shaped object templates.
pub fn make_extended_target(axis_a: f64, axis_b: f64, angle: f64) -> Result<TargetTemplate> {
    if axis_a <= 0.0 || axis_b <= 0.0 {
        return Err(Error::Config("extended axes must be positive".into()));
    }
    let reach = 1.3 * axis_a.max(axis_b);
    let half = reach.ceil() as usize;
    let size = 2 * half + 1;
    let c = half as f64;
    let (sin, cos) = angle.sin_cos();
    let patch = Image::from_fn(size, size, |y, x| {
        let dy = y as f64 - c;
        let dx = x as f64 - c;
        let u = (cos * dx + sin * dy) / axis_a;
        let v = (-sin * dx + cos * dy) / axis_b;
        let r = (u * u + v * v).sqrt();
        // Flat inside r=0.8, cosine rolloff to zero at r=1.25.
        if r <= 0.8 {
            1.0
        } else if r >= 1.25 {
            0.0
        } else {
            0.5 + 0.5 * (std::f64::consts::PI * (r - 0.8) / 0.45).cos()
        }
    });
    TargetTemplate::from_patch(TargetKind::Extended, patch)
}

/// |mean(target) - mean(background)| / std(background) measured directly on
/// an image; the verification oracle for intensity adjustment.
pub fn scr_of(img: &Image, target: &[(usize, usize)], background: &[(usize, usize)]) -> Result<f64> {
    if target.is_empty() || background.is_empty() {
        return Err(Error::Generation("scr regions must be nonempty".into()));
    }
    let tset: HashSet<&(usize, usize)> = target.iter().collect();
    if background.iter().any(|p| tset.contains(p)) {
        return Err(Error::Generation("scr regions must be disjoint".into()));
    }
    let mean = |px: &[(usize, usize)]| {
        px.iter().map(|&(y, x)| img.at(y, x)).sum::<f64>() / px.len() as f64
    };
    let mu_t = mean(target);
    let mu_b = mean(background);
    let var_b = background
        .iter()
        .map(|&(y, x)| (img.at(y, x) - mu_b).powi(2))
        .sum::<f64>()
        / background.len() as f64;
    let std_b = var_b.sqrt();
    if std_b == 0.0 {
        return Err(Error::Numeric("flat background region, scr undefined".into()));
    }
    Ok((mu_t - mu_b).abs() / std_b)
}

/// Background statistics with the flat-region floor applied.
pub struct RingStats {
    pub mean: f64,
    pub std: f64,
    pub floored: bool,
    pub pixels: Vec<(usize, usize)>,
}

pub const STD_FLOOR: f64 = 1.0 / 255.0;

/// Population statistics over `pixels` of `img`, flooring std at 1/255.
pub fn ring_stats(img: &Image, pixels: Vec<(usize, usize)>) -> Result<RingStats> {
    if pixels.is_empty() {
        return Err(Error::Generation("background ring is empty".into()));
    }
    let mean = pixels.iter().map(|&(y, x)| img.at(y, x)).sum::<f64>() / pixels.len() as f64;
    let var = pixels
        .iter()
        .map(|&(y, x)| (img.at(y, x) - mean).powi(2))
        .sum::<f64>()
        / pixels.len() as f64;
    let std = var.sqrt();
    let floored = std < STD_FLOOR;
    Ok(RingStats { mean, std: std.max(STD_FLOOR), floored, pixels })
}

/// Scale factor alpha such that the support mean of alpha * patch equals
/// mean_b + c * std_b. Compositing clips to 1.0; `clipped` reports whether
/// any support pixel would exceed the range.
pub fn solve_intensity(template: &TargetTemplate, stats: &RingStats, c: f64) -> (f64, bool) {
    let target_mean = stats.mean + c * stats.std;
    let alpha = target_mean / template.support_mean();
    (alpha, alpha > 1.0)
}
