//! Pixel- and target-level evaluation. Target-level scores work on component
//! centroids: a prediction counts as a hit when its centroid lies strictly
//! within the deviation threshold of an unclaimed ground-truth centroid.

use serde::{Deserialize, Serialize};

use crate::postproc::Mask;

/// Intersection and union pixel counts of two masks of equal extents.
pub fn iou_counts(pred: &Mask, gt: &Mask) -> (usize, usize) {
    debug_assert_eq!((pred.h, pred.w), (gt.h, gt.w));
    let mut inter = 0;
    let mut union = 0;
    for (&p, &g) in pred.data.iter().zip(&gt.data) {
        inter += (p && g) as usize;
        union += (p || g) as usize;
    }
    (inter, union)
}

/// Intersection over union with the empty-mask conventions: both empty -> 1,
/// exactly one empty -> 0.
pub fn iou(pred: &Mask, gt: &Mask) -> f64 {
    let (inter, union) = iou_counts(pred, gt);
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Outcome of centroid matching for one image.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    /// (gt index, pred index, Euclidean deviation), in acceptance order.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_pred: Vec<usize>,
}

/// Greedy one-to-one assignment: candidate pairs with deviation strictly
/// below `d_thresh`, visited in ascending (deviation, gt index, pred index)
/// order, accepted when both sides are still free.
pub fn match_targets(gt: &[(f64, f64)], pred: &[(f64, f64)], d_thresh: f64) -> MatchResult {
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for (gi, g) in gt.iter().enumerate() {
        for (pi, p) in pred.iter().enumerate() {
            let dev = ((g.0 - p.0).powi(2) + (g.1 - p.1).powi(2)).sqrt();
            if dev < d_thresh {
                cand.push((dev, gi, pi));
            }
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut gt_used = vec![false; gt.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut pairs = Vec::new();
    for (dev, gi, pi) in cand {
        if !gt_used[gi] && !pred_used[pi] {
            gt_used[gi] = true;
            pred_used[pi] = true;
            pairs.push((gi, pi, dev));
        }
    }
    MatchResult {
        pairs,
        unmatched_gt: (0..gt.len()).filter(|&i| !gt_used[i]).collect(),
        unmatched_pred: (0..pred.len()).filter(|&i| !pred_used[i]).collect(),
    }
}

/// Pooled counts over one or more images; ratios are taken once at the end
/// (sum of numerators over sum of denominators, never a mean of ratios).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub intersection: usize,
    pub union: usize,
    /// Matched ground-truth targets.
    pub t_correct: usize,
    /// All ground-truth targets.
    pub t_all: usize,
    /// Pixels belonging to unmatched predicted components.
    pub p_false: usize,
    /// Total pixels scanned.
    pub p_all: usize,
}

impl EvalCounts {
    pub fn merge(&mut self, other: &EvalCounts) {
        self.intersection += other.intersection;
        self.union += other.union;
        self.t_correct += other.t_correct;
        self.t_all += other.t_all;
        self.p_false += other.p_false;
        self.p_all += other.p_all;
    }
}

/// Probability of detection. `None` encodes the undefined case: zero
/// ground-truth targets with predictions present, where no hit rate can be
/// formed (the spurious predictions are still accounted for by `fa`).
pub fn pd(counts: &EvalCounts, any_predictions: bool) -> Option<f64> {
    if counts.t_all == 0 {
        if any_predictions {
            None
        } else {
            Some(1.0)
        }
    } else {
        Some(counts.t_correct as f64 / counts.t_all as f64)
    }
}

/// False-alarm rate: unmatched predicted pixels over all pixels. Raw ratio;
/// scale by 1e6 only for display.
pub fn fa(counts: &EvalCounts) -> f64 {
    if counts.p_all == 0 {
        0.0
    } else {
        counts.p_false as f64 / counts.p_all as f64
    }
}

/// One operating point of a threshold sweep.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fa: f64,
    pub pd: f64,
}

/// Full evaluation summary, serialized as the eval/roc interchange format.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MetricsReport {
    pub iou: f64,
    pub pd: f64,
    /// False when pd is undefined (no targets, predictions present); the
    /// stored pd value is 0.0 then and must not be interpreted.
    pub pd_defined: bool,
    pub fa: f64,
    pub fa_per_million: f64,
    pub d_thresh: f64,
    pub counts: EvalCounts,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub roc: Vec<RocPoint>,
}

impl MetricsReport {
    pub fn from_counts(counts: EvalCounts, d_thresh: f64, any_predictions: bool) -> Self {
        let iou = if counts.union == 0 {
            1.0
        } else {
            counts.intersection as f64 / counts.union as f64
        };
        let pd_opt = pd(&counts, any_predictions);
        let fa_v = fa(&counts);
        MetricsReport {
            iou,
            pd: pd_opt.unwrap_or(0.0),
            pd_defined: pd_opt.is_some(),
            fa: fa_v,
            fa_per_million: fa_v * 1e6,
            d_thresh,
            counts,
            roc: Vec::new(),
        }
    }
}
