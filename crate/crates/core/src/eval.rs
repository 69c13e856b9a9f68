//! Detector evaluation: response maps, thresholded detection sets, pooled
//! scores, and threshold sweeps. Scores pool integer counts over the whole
//! image set and divide once at the end; per-image ratios are never averaged.

use crate::baselines::{max_median, tophat};
use crate::error::{Error, Result};
use crate::metrics::{iou_counts, match_targets, EvalCounts, MetricsReport, RocPoint};
use crate::net::{wiring, Checkpoint, NetworkSpec, Wiring};
use crate::params::ParamSet;
use crate::postproc::{threshold_adaptive, threshold_fixed, DetectionSet, Mask};
use crate::raster::ImageBase;
use crate::train::normalize_image;

/// Probability cut applied to network output maps.
pub const NET_THRESHOLD: f64 = 0.5;

/// Anything that maps one image to a unit-interval response map.
pub enum Detector {
    /// Trained network. When `normalize` is set the per-image zero-mean,
    /// unit-variance transform from training is replayed before inference;
    /// it must match the flag the checkpoint was trained with.
    Net { spec: NetworkSpec, wiring: Wiring, params: ParamSet, normalize: bool },
    /// White top-hat residual with a square structuring element.
    TopHat { window: usize },
    /// Max-median filter residual with an odd cross window.
    MaxMedian { window: usize },
}

impl Detector {
    /// Rebuilds the network detector stored in a checkpoint.
    pub fn from_checkpoint(ck: Checkpoint, normalize: bool) -> Result<Detector> {
        let w = wiring(&ck.spec)?;
        Ok(Detector::Net { spec: ck.spec, wiring: w, params: ck.params, normalize })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Detector::Net { .. } => "net",
            Detector::TopHat { .. } => "top_hat",
            Detector::MaxMedian { .. } => "max_median",
        }
    }

    /// Response map in [0, 1]. The filter baselines emit residuals on an
    /// arbitrary scale, so their output is min-max rescaled per image; a
    /// constant residual maps to all zeros.
    pub fn prob_map(&self, image: &ImageBase<f64>) -> Result<ImageBase<f64>> {
        match self {
            Detector::Net { spec, wiring, params, normalize } => {
                if *normalize {
                    let n = normalize_image(image);
                    crate::net::run_inference(spec, wiring, params, &n)
                } else {
                    crate::net::run_inference(spec, wiring, params, image)
                }
            }
            Detector::TopHat { window } => Ok(rescale_unit(&tophat(image, *window)?)),
            Detector::MaxMedian { window } => Ok(rescale_unit(&max_median(image, *window)?)),
        }
    }
}

fn rescale_unit(img: &ImageBase<f64>) -> ImageBase<f64> {
    let (lo, hi) = img.min_max();
    if hi - lo <= 0.0 {
        return ImageBase::full(img.h, img.w, 0.0);
    }
    img.map(|v| (v - lo) / (hi - lo))
}

/// One image pushed through a detector and its thresholding rule.
pub struct Detection {
    pub prob: ImageBase<f64>,
    /// Threshold actually applied to `prob`.
    pub threshold: f64,
    pub mask: Mask,
    pub set: DetectionSet,
}

/// Runs the detector and thresholds its map: the network uses the fixed
/// probability cut, the baselines the data-driven rule.
pub fn detect(det: &Detector, image: &ImageBase<f64>) -> Result<Detection> {
    let prob = det.prob_map(image)?;
    let (mask, threshold) = match det {
        Detector::Net { .. } => (threshold_fixed(&prob, NET_THRESHOLD), NET_THRESHOLD),
        _ => threshold_adaptive(&prob),
    };
    let set = DetectionSet::from_mask(&mask);
    Ok(Detection { prob, threshold, mask, set })
}

/// Counts for one (prediction, ground truth) mask pair: pixel overlap,
/// centroid matches at `d_thresh`, and false-alarm pixels (members of
/// predicted components left unmatched).
pub fn eval_counts(pred: &Mask, gt: &Mask, d_thresh: f64) -> Result<EvalCounts> {
    if (pred.h, pred.w) != (gt.h, gt.w) {
        return Err(Error::Shape(format!(
            "mask extents differ: prediction {}x{}, ground truth {}x{}",
            pred.h, pred.w, gt.h, gt.w
        )));
    }
    let (intersection, union) = iou_counts(pred, gt);
    let ps = DetectionSet::from_mask(pred);
    let gs = DetectionSet::from_mask(gt);
    let pc: Vec<(f64, f64)> = ps.components.iter().map(|c| c.centroid).collect();
    let gc: Vec<(f64, f64)> = gs.components.iter().map(|c| c.centroid).collect();
    let m = match_targets(&gc, &pc, d_thresh);
    let p_false = m.unmatched_pred.iter().map(|&i| ps.components[i].area).sum();
    Ok(EvalCounts {
        intersection,
        union,
        t_correct: m.pairs.len(),
        t_all: gc.len(),
        p_false,
        p_all: pred.h * pred.w,
    })
}

/// Pools `eval_counts` over aligned prediction/ground-truth slices and
/// scores the totals.
pub fn evaluate(preds: &[Mask], gts: &[Mask], d_thresh: f64) -> Result<MetricsReport> {
    if preds.len() != gts.len() {
        return Err(Error::Config(format!(
            "prediction/ground-truth count mismatch: {} vs {}",
            preds.len(),
            gts.len()
        )));
    }
    let mut total = EvalCounts::default();
    let mut any_pred = false;
    for (p, g) in preds.iter().zip(gts) {
        total.merge(&eval_counts(p, g, d_thresh)?);
        any_pred |= p.count() > 0;
    }
    Ok(MetricsReport::from_counts(total, d_thresh, any_pred))
}

/// Sweeps fixed thresholds over precomputed response maps, pooling counts
/// per operating point. Thresholds are reported in the order given.
pub fn roc(
    maps: &[ImageBase<f64>],
    gts: &[Mask],
    thresholds: &[f64],
    d_thresh: f64,
) -> Result<Vec<RocPoint>> {
    if maps.len() != gts.len() {
        return Err(Error::Config(format!(
            "map/ground-truth count mismatch: {} vs {}",
            maps.len(),
            gts.len()
        )));
    }
    let mut out = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let mut total = EvalCounts::default();
        let mut any_pred = false;
        for (map, gt) in maps.iter().zip(gts) {
            let pred = threshold_fixed(map, t);
            any_pred |= pred.count() > 0;
            total.merge(&eval_counts(&pred, gt, d_thresh)?);
        }
        let report = MetricsReport::from_counts(total, d_thresh, any_pred);
        out.push(RocPoint { threshold: t, fa: report.fa, pd: report.pd });
    }
    Ok(out)
}

/// `n` thresholds evenly spaced over [0, 1], endpoints included.
pub fn threshold_grid(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
}

/// Best detection rate among sweep points whose false-alarm rate stays
/// within `fa_budget`. `None` when every point overshoots the budget.
pub fn pd_at_fa(points: &[RocPoint], fa_budget: f64) -> Option<f64> {
    points
        .iter()
        .filter(|p| p.fa <= fa_budget)
        .map(|p| p.pd)
        .max_by(f64::total_cmp)
}
