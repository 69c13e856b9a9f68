//! Synthetic sample generator: procedural infrared-like backgrounds with
//! point/spot/extended targets composited at a controlled signal-to-clutter
//! ratio, blurred boundaries, and exact ground-truth masks.
//!
//! Every sample is a pure function of (config, index): generation draws
//! from a per-index counter-keyed stream, so datasets are byte-identical
//! across runs and thread counts.

mod dataset;
mod scene;
mod target;

pub use dataset::{load_dataset, sample_paths, synth_dataset, DatasetStats, Manifest};
pub use target::{
    make_extended_target, make_point_target, make_spot_target, ring_stats, scr_of,
    solve_intensity, RingStats, TargetKind, TargetTemplate, STD_FLOOR, SUPPORT_CUTOFF,
};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::postproc::Mask;
use crate::raster::{gaussian5, ImageBase};
use crate::rng::substream;

type Image = ImageBase<f64>;

/// Placement attempts per target before the sample is abandoned.
const MAX_PLACEMENT_ATTEMPTS: usize = 80;
/// Relative tolerance on measured versus requested SCR for clipped targets.
const CLIP_SCR_TOLERANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    Cloud,
    City,
    Sea,
    Field,
    Highlight,
}

impl SceneKind {
    pub const ALL: [SceneKind; 5] = [
        SceneKind::Cloud,
        SceneKind::City,
        SceneKind::Sea,
        SceneKind::Field,
        SceneKind::Highlight,
    ];
}

impl FromStr for SceneKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cloud" => Ok(SceneKind::Cloud),
            "city" => Ok(SceneKind::City),
            "sea" => Ok(SceneKind::Sea),
            "field" => Ok(SceneKind::Field),
            "highlight" => Ok(SceneKind::Highlight),
            other => Err(Error::Config(format!("unknown scene {other:?}"))),
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SceneKind::Cloud => "cloud",
            SceneKind::City => "city",
            SceneKind::Sea => "sea",
            SceneKind::Field => "field",
            SceneKind::Highlight => "highlight",
        };
        f.write_str(s)
    }
}

/// One row of a scene's target distribution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SizeEntry {
    pub kind: TargetKind,
    pub weight: f64,
    /// Odd patch extent bounds for the Gaussian kinds; unused for extended.
    pub size_lo: usize,
    pub size_hi: usize,
    /// Sigma bounds for the Gaussian kinds, ellipse axis bounds for extended.
    pub scale_lo: f64,
    pub scale_hi: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthConfig {
    pub count: usize,
    pub height: usize,
    pub width: usize,
    /// Signal-to-clutter constants C, one drawn per target.
    pub scr_values: Vec<f64>,
    /// Boundary blur sigmas, one drawn per image.
    pub blur_sigmas: Vec<f64>,
    /// Distribution over targets-per-image.
    pub count_weights: Vec<(usize, f64)>,
    pub scenes: Vec<SceneKind>,
    /// Per-scene distribution over target kind and size.
    pub size_table: Vec<(SceneKind, Vec<SizeEntry>)>,
    /// Chebyshev width of the background ring around a target's bbox.
    pub ring_width: usize,
    pub seed: u64,
}

fn entry(kind: TargetKind, weight: f64, sizes: (usize, usize), scale: (f64, f64)) -> SizeEntry {
    SizeEntry {
        kind,
        weight,
        size_lo: sizes.0,
        size_hi: sizes.1,
        scale_lo: scale.0,
        scale_hi: scale.1,
    }
}

/// Target distributions per scene. Sky scenes carry no extended shapes.
pub fn default_size_table() -> Vec<(SceneKind, Vec<SizeEntry>)> {
    use TargetKind::*;
    let point = |w| entry(PointGaussian, w, (3, 5), (0.4, 0.9));
    let spot = |w| entry(Spot, w, (5, 7), (0.9, 1.5));
    let extended = |w| entry(Extended, w, (0, 0), (1.2, 2.8));
    vec![
        (SceneKind::Cloud, vec![point(0.7), spot(0.3)]),
        (SceneKind::City, vec![point(0.5), spot(0.3), extended(0.2)]),
        (SceneKind::Sea, vec![point(0.35), spot(0.25), extended(0.4)]),
        (SceneKind::Field, vec![point(0.55), spot(0.35), extended(0.1)]),
        (SceneKind::Highlight, vec![point(0.6), spot(0.4)]),
    ]
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            count: 500,
            height: 256,
            width: 256,
            scr_values: vec![3.0, 4.0, 5.0, 6.0],
            blur_sigmas: vec![0.2, 0.5, 1.0],
            count_weights: vec![(1, 0.63), (2, 0.22), (3, 0.15)],
            scenes: SceneKind::ALL.to_vec(),
            size_table: default_size_table(),
            ring_width: 10,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.height < 16 || self.width < 16 {
            return Err(Error::Config("image extents must be at least 16".into()));
        }
        if self.scr_values.is_empty() || self.scr_values.iter().any(|&c| c <= 0.0) {
            return Err(Error::Config("scr values must be positive and nonempty".into()));
        }
        if self.blur_sigmas.is_empty() || self.blur_sigmas.iter().any(|&s| s <= 0.0) {
            return Err(Error::Config("blur sigmas must be positive and nonempty".into()));
        }
        let csum: f64 = self.count_weights.iter().map(|&(_, w)| w).sum();
        if self.count_weights.is_empty() || (csum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "target-count weights sum to {csum}, expected 1"
            )));
        }
        if self.count_weights.iter().any(|&(n, w)| n == 0 || w < 0.0) {
            return Err(Error::Config("target counts must be >= 1 with weights >= 0".into()));
        }
        if self.scenes.is_empty() {
            return Err(Error::Config("scene list is empty".into()));
        }
        for scene in &self.scenes {
            let entries = self
                .size_table
                .iter()
                .find(|(s, _)| s == scene)
                .map(|(_, e)| e)
                .ok_or_else(|| Error::Config(format!("scene {scene} missing from size table")))?;
            let wsum: f64 = entries.iter().map(|e| e.weight).sum();
            if entries.is_empty() || (wsum - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "size-table weights for {scene} sum to {wsum}, expected 1"
                )));
            }
            for e in entries {
                if e.kind != TargetKind::Extended {
                    if e.size_lo % 2 == 0 || e.size_hi % 2 == 0 || e.size_lo > e.size_hi {
                        return Err(Error::Config(format!(
                            "scene {scene}: sizes must be odd with lo <= hi"
                        )));
                    }
                }
                if e.scale_lo <= 0.0 || e.scale_lo > e.scale_hi {
                    return Err(Error::Config(format!("scene {scene}: bad scale range")));
                }
            }
        }
        if self.ring_width == 0 {
            return Err(Error::Config("ring width must be positive".into()));
        }
        Ok(())
    }

    /// SPIE small-target bound for these extents, in pixels.
    pub fn spie_area_bound(&self) -> f64 {
        0.0015 * (self.height * self.width) as f64
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TargetMeta {
    pub kind: TargetKind,
    /// Unweighted mean of the support pixels, (row, col).
    pub centroid: (f64, f64),
    /// Inclusive support bbox (y0, x0, y1, x1).
    pub bbox: (usize, usize, usize, usize),
    pub area: usize,
    pub scr_requested: f64,
    /// Measured on the pre-blur composite over ring background.
    pub scr_measured: f64,
    pub clipped: bool,
    /// Background ring was flat; std floored at 1/255.
    pub std_floored: bool,
    /// Peak composite value.
    pub peak: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleMeta {
    pub index: usize,
    pub scene: SceneKind,
    pub blur_sigma: f64,
    pub targets: Vec<TargetMeta>,
}

#[derive(Clone, Debug)]
pub struct SampleRecord {
    pub image: Image,
    /// Pre-blur composite; target contrast is defined on this surface.
    pub composite: Image,
    pub mask: Mask,
    pub meta: SampleMeta,
}

fn weighted_index(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Draw one size-table row for a scene.
pub fn draw_entry<'c>(
    config: &'c SynthConfig,
    scene: SceneKind,
    rng: &mut impl Rng,
) -> Result<&'c SizeEntry> {
    let entries = config
        .size_table
        .iter()
        .find(|(s, _)| *s == scene)
        .map(|(_, e)| e)
        .ok_or_else(|| Error::Config(format!("scene {scene} missing from size table")))?;
    let weights: Vec<f64> = entries.iter().map(|e| e.weight).collect();
    Ok(&entries[weighted_index(&weights, rng)])
}

fn odd_in(lo: usize, hi: usize, rng: &mut impl Rng) -> usize {
    let steps = (hi - lo) / 2;
    lo + 2 * rng.gen_range(0..=steps)
}

/// Instantiate a template from a size-table row.
pub fn instantiate_entry(e: &SizeEntry, rng: &mut impl Rng) -> Result<TargetTemplate> {
    match e.kind {
        TargetKind::PointGaussian => {
            let size = odd_in(e.size_lo, e.size_hi, rng);
            let sigma = rng.gen_range(e.scale_lo..=e.scale_hi);
            make_point_target(size, sigma)
        }
        TargetKind::Spot => {
            let size = odd_in(e.size_lo, e.size_hi, rng);
            let major = rng.gen_range(e.scale_lo..=e.scale_hi);
            let minor = major * rng.gen_range(0.6..=1.0);
            let angle = rng.gen_range(0.0..std::f64::consts::PI);
            make_spot_target(size, major, minor, angle)
        }
        TargetKind::Extended => {
            let a = rng.gen_range(e.scale_lo..=e.scale_hi);
            let b = a * rng.gen_range(0.5..=0.9);
            let angle = rng.gen_range(0.0..std::f64::consts::PI);
            make_extended_target(a, b, angle)
        }
    }
}

fn render_scene(kind: SceneKind, h: usize, w: usize, rng: &mut impl Rng) -> Image {
    match kind {
        SceneKind::Cloud => scene::render_cloud(h, w, rng),
        SceneKind::City => scene::render_city(h, w, rng),
        SceneKind::Sea => scene::render_sea(h, w, rng),
        SceneKind::Field => scene::render_field(h, w, rng),
        SceneKind::Highlight => scene::render_highlight(h, w, rng),
    }
}

/// Support pixels at an absolute placement.
fn placed_support(t: &TargetTemplate, top: usize, left: usize) -> Vec<(usize, usize)> {
    t.support.iter().map(|&(y, x)| (top + y, left + x)).collect()
}

fn overlaps_occupied(support: &[(usize, usize)], occupied: &[bool], h: usize, w: usize) -> bool {
    for &(y, x) in support {
        let y0 = y.saturating_sub(1);
        let x0 = x.saturating_sub(1);
        for yy in y0..=(y + 1).min(h - 1) {
            for xx in x0..=(x + 1).min(w - 1) {
                if occupied[yy * w + xx] {
                    return true;
                }
            }
        }
    }
    false
}

/// Ring pixels: within `ring_width` Chebyshev distance of the support bbox,
/// inside the image, excluding every target support placed so far and the
/// candidate's own.
fn ring_pixels(
    bbox: (usize, usize, usize, usize),
    support: &[(usize, usize)],
    occupied: &[bool],
    h: usize,
    w: usize,
    ring_width: usize,
) -> Vec<(usize, usize)> {
    let (y0, x0, y1, x1) = bbox;
    let ry0 = y0.saturating_sub(ring_width);
    let rx0 = x0.saturating_sub(ring_width);
    let ry1 = (y1 + ring_width).min(h - 1);
    let rx1 = (x1 + ring_width).min(w - 1);
    let in_support: std::collections::HashSet<(usize, usize)> = support.iter().copied().collect();
    let mut out = Vec::new();
    for y in ry0..=ry1 {
        for x in rx0..=rx1 {
            if occupied[y * w + x] || in_support.contains(&(y, x)) {
                continue;
            }
            out.push((y, x));
        }
    }
    out
}

fn support_bbox(support: &[(usize, usize)]) -> (usize, usize, usize, usize) {
    let mut b = (usize::MAX, usize::MAX, 0, 0);
    for &(y, x) in support {
        b.0 = b.0.min(y);
        b.1 = b.1.min(x);
        b.2 = b.2.max(y);
        b.3 = b.3.max(x);
    }
    b
}

/// Generate one sample. Pure in (config, index).
pub fn generate_sample(config: &SynthConfig, index: usize) -> Result<SampleRecord> {
    let (h, w) = (config.height, config.width);
    let mut rng = substream(config.seed, "sample", index as u64, 0);

    let scene = config.scenes[rng.gen_range(0..config.scenes.len())];
    let mut img = render_scene(scene, h, w, &mut rng);
    let blur_sigma = config.blur_sigmas[rng.gen_range(0..config.blur_sigmas.len())];
    let counts: Vec<f64> = config.count_weights.iter().map(|&(_, wt)| wt).collect();
    let n_targets = config.count_weights[weighted_index(&counts, &mut rng)].0;

    let mut occupied = vec![false; h * w];
    let mut targets = Vec::with_capacity(n_targets);

    for _ in 0..n_targets {
        let mut placed = false;
        for _attempt in 0..MAX_PLACEMENT_ATTEMPTS {
            let e = draw_entry(config, scene, &mut rng)?;
            let template = instantiate_entry(e, &mut rng)?;
            let c = config.scr_values[rng.gen_range(0..config.scr_values.len())];
            let (ph, pw) = (template.patch.h, template.patch.w);
            if ph > h || pw > w {
                return Err(Error::Generation(format!(
                    "sample {index}: template {ph}x{pw} exceeds image {h}x{w}"
                )));
            }
            let top = rng.gen_range(0..=h - ph);
            let left = rng.gen_range(0..=w - pw);
            let support = placed_support(&template, top, left);
            if overlaps_occupied(&support, &occupied, h, w) {
                continue;
            }
            let bbox = support_bbox(&support);
            let ring = ring_pixels(bbox, &support, &occupied, h, w, config.ring_width);
            let stats = ring_stats(&img, ring)?;
            let (alpha, clipped) = solve_intensity(&template, &stats, c);

            let mut old = Vec::with_capacity(support.len());
            for (&(y, x), &(py, px)) in support.iter().zip(&template.support) {
                old.push(img.at(y, x));
                img.set(y, x, (alpha * template.patch.at(py, px)).min(1.0));
            }
            let measured = scr_of(&img, &support, &stats.pixels)?;
            if clipped && (measured - c).abs() / c > CLIP_SCR_TOLERANCE {
                for (&(y, x), &v) in support.iter().zip(&old) {
                    img.set(y, x, v);
                }
                continue;
            }

            for &(y, x) in &support {
                occupied[y * w + x] = true;
            }
            let n = support.len() as f64;
            let centroid = (
                support.iter().map(|&(y, _)| y as f64).sum::<f64>() / n,
                support.iter().map(|&(_, x)| x as f64).sum::<f64>() / n,
            );
            targets.push(TargetMeta {
                kind: template.kind,
                centroid,
                bbox,
                area: support.len(),
                scr_requested: c,
                scr_measured: measured,
                clipped,
                std_floored: stats.floored,
                peak: alpha.min(1.0),
            });
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::Generation(format!(
                "sample {index}: no valid placement after {MAX_PLACEMENT_ATTEMPTS} attempts"
            )));
        }
    }

    let composite = img;
    let img = gaussian5(&composite, blur_sigma).map(|v| v.clamp(0.0, 1.0));
    let mut mask = Mask::zeros(h, w);
    for (k, &occ) in occupied.iter().enumerate() {
        if occ {
            mask.data[k] = true;
        }
    }

    Ok(SampleRecord {
        image: img,
        composite,
        mask,
        meta: SampleMeta { index, scene, blur_sigma, targets },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SynthConfig {
        SynthConfig { count: 4, height: 64, width: 64, seed: 9, ..SynthConfig::default() }
    }

    #[test]
    fn default_config_validates() {
        SynthConfig::default().validate().unwrap();
    }

    #[test]
    fn sample_is_deterministic() {
        let cfg = small_config();
        let a = generate_sample(&cfg, 2).unwrap();
        let b = generate_sample(&cfg, 2).unwrap();
        assert_eq!(a.image.data, b.image.data);
        assert_eq!(a.mask.data, b.mask.data);
        assert_eq!(a.meta.targets.len(), b.meta.targets.len());
    }

    #[test]
    fn mask_area_matches_target_areas() {
        let cfg = small_config();
        for i in 0..4 {
            let s = generate_sample(&cfg, i).unwrap();
            let total: usize = s.meta.targets.iter().map(|t| t.area).sum();
            assert_eq!(s.mask.count(), total);
            assert!(!s.meta.targets.is_empty());
            assert!(s.image.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn unclipped_targets_hit_requested_scr() {
        let cfg = SynthConfig { count: 30, seed: 4, ..SynthConfig::default() };
        let mut unclipped = 0;
        for i in 0..30 {
            let s = generate_sample(&cfg, i).unwrap();
            for t in &s.meta.targets {
                if !t.clipped {
                    unclipped += 1;
                    let rel = (t.scr_measured - t.scr_requested).abs() / t.scr_requested;
                    assert!(rel < 1e-9, "unclipped target off by {rel}");
                }
            }
        }
        assert!(unclipped > 0);
    }

    #[test]
    fn scene_without_extended_never_draws_one() {
        let mut cfg = SynthConfig::default();
        cfg.scenes = vec![SceneKind::Cloud];
        cfg.seed = 12;
        for i in 0..20 {
            let s = generate_sample(&cfg, i).unwrap();
            assert!(s.meta.targets.iter().all(|t| t.kind != TargetKind::Extended));
        }
    }

    #[test]
    fn degenerate_table_always_draws_its_single_entry() {
        let mut cfg = SynthConfig::default();
        cfg.scenes = vec![SceneKind::Field];
        cfg.size_table = vec![(
            SceneKind::Field,
            vec![SizeEntry {
                kind: TargetKind::PointGaussian,
                weight: 1.0,
                size_lo: 3,
                size_hi: 3,
                scale_lo: 0.5,
                scale_hi: 0.6,
            }],
        )];
        for i in 0..10 {
            let s = generate_sample(&cfg, i).unwrap();
            assert!(s.meta.targets.iter().all(|t| t.kind == TargetKind::PointGaussian));
        }
    }

    #[test]
    fn empirical_kind_frequencies_follow_table() {
        let mut cfg = SynthConfig::default();
        cfg.scenes = vec![SceneKind::City];
        cfg.seed = 77;
        let mut rng = substream(cfg.seed, "freq", 0, 0);
        let mut counts = [0usize; 3];
        let n = 10_000;
        for _ in 0..n {
            let e = draw_entry(&cfg, SceneKind::City, &mut rng).unwrap();
            let slot = match e.kind {
                TargetKind::PointGaussian => 0,
                TargetKind::Spot => 1,
                TargetKind::Extended => 2,
            };
            counts[slot] += 1;
        }
        let expect = [0.5, 0.3, 0.2];
        for (got, want) in counts.iter().zip(expect) {
            let freq = *got as f64 / n as f64;
            assert!((freq - want).abs() < 0.02, "freq {freq} vs {want}");
        }
    }

    #[test]
    fn unknown_scene_is_config_error() {
        let mut cfg = SynthConfig::default();
        cfg.size_table.retain(|(s, _)| *s != SceneKind::Sea);
        let mut rng = substream(0, "x", 0, 0);
        assert!(draw_entry(&cfg, SceneKind::Sea, &mut rng).is_err());
        cfg.scenes = vec![SceneKind::Sea];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn blur_preserves_interior_mass() {
        // Flat field plus one interior spike: the normalized kernel moves
        // no mass across the border, so the total sum is unchanged.
        let mut img = Image::full(64, 64, 0.25);
        img.set(32, 33, 0.9);
        let before: f64 = img.data.iter().sum();
        let after: f64 = gaussian5(&img, 1.0).data.iter().sum();
        assert!((after - before).abs() < 1e-9, "mass drift {}", after - before);
    }
}
