//! From probability / response maps to discrete detections: thresholding,
//! 8-connected component labeling, and per-component summaries.

use serde::{Deserialize, Serialize};

use crate::raster::ImageBase;

/// Binary mask over an H x W grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub h: usize,
    pub w: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn zeros(h: usize, w: usize) -> Self {
        Mask { h, w, data: vec![false; h * w] }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> bool {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.data[y * self.w + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Strict comparison: a pixel is on iff value > t.
pub fn threshold_fixed(map: &ImageBase<f64>, t: f64) -> Mask {
    Mask { h: map.h, w: map.w, data: map.data.iter().map(|&v| v > t).collect() }
}

/// Data-driven threshold t = max(0.7 * max(G), mean(G) + 0.5 * std(G)) with
/// population statistics, two-pass, summed left to right. Returns the mask
/// and the threshold used.
pub fn threshold_adaptive(map: &ImageBase<f64>) -> (Mask, f64) {
    let n = map.data.len() as f64;
    let mut maxv = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &v in &map.data {
        if v > maxv {
            maxv = v;
        }
        sum += v;
    }
    let mean = sum / n;
    let mut var_acc = 0.0;
    for &v in &map.data {
        let d = v - mean;
        var_acc += d * d;
    }
    let std = (var_acc / n).sqrt();
    let t = (0.7 * maxv).max(mean + 0.5 * std);
    (threshold_fixed(map, t), t)
}

/// Label image: 0 is background, component ids start at 1 and follow the
/// first-encounter order of a row-major scan.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    pub h: usize,
    pub w: usize,
    pub labels: Vec<u32>,
    pub count: usize,
}

/// 8-connected component labeling, two-pass with union-find.
pub fn label8(mask: &Mask) -> LabelMap {
    let (h, w) = (mask.h, mask.w);
    let mut labels = vec![0u32; h * w];
    // parent[0] unused; provisional labels start at 1
    let mut parent: Vec<u32> = vec![0];

    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            let up = parent[parent[x as usize] as usize];
            parent[x as usize] = up;
            x = up;
        }
        x
    }

    for y in 0..h {
        for x in 0..w {
            if !mask.at(y, x) {
                continue;
            }
            let mut neigh = [0u32; 4];
            let mut nn = 0;
            if y > 0 {
                if x > 0 && labels[(y - 1) * w + x - 1] != 0 {
                    neigh[nn] = labels[(y - 1) * w + x - 1];
                    nn += 1;
                }
                if labels[(y - 1) * w + x] != 0 {
                    neigh[nn] = labels[(y - 1) * w + x];
                    nn += 1;
                }
                if x + 1 < w && labels[(y - 1) * w + x + 1] != 0 {
                    neigh[nn] = labels[(y - 1) * w + x + 1];
                    nn += 1;
                }
            }
            if x > 0 && labels[y * w + x - 1] != 0 {
                neigh[nn] = labels[y * w + x - 1];
                nn += 1;
            }
            if nn == 0 {
                let fresh = parent.len() as u32;
                parent.push(fresh);
                labels[y * w + x] = fresh;
            } else {
                let mut root = find(&mut parent, neigh[0]);
                for &other in &neigh[1..nn] {
                    let r = find(&mut parent, other);
                    if r < root {
                        parent[root as usize] = r;
                        root = r;
                    } else {
                        parent[r as usize] = root;
                    }
                }
                labels[y * w + x] = root;
            }
        }
    }

    // second pass: resolve to roots, then renumber roots by first encounter
    let mut remap: Vec<u32> = vec![0; parent.len()];
    let mut next = 0u32;
    for l in labels.iter_mut() {
        if *l == 0 {
            continue;
        }
        let root = find(&mut parent, *l);
        if remap[root as usize] == 0 {
            next += 1;
            remap[root as usize] = next;
        }
        *l = remap[root as usize];
    }
    LabelMap { h, w, labels, count: next as usize }
}

/// One detected component. Pixel lists stay in memory only; serialized
/// form carries id, area, centroid, and bbox.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Component {
    pub id: u32,
    pub area: usize,
    /// Unweighted mean pixel position, (row, col).
    pub centroid: (f64, f64),
    /// Inclusive (y0, x0, y1, x1).
    pub bbox: (usize, usize, usize, usize),
    /// Member pixels (row, col) in row-major order.
    #[serde(skip)]
    pub pixels: Vec<(usize, usize)>,
}

/// All components of one mask plus the extents they came from.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DetectionSet {
    pub h: usize,
    pub w: usize,
    pub components: Vec<Component>,
}

impl DetectionSet {
    pub fn from_mask(mask: &Mask) -> Self {
        let lm = label8(mask);
        DetectionSet { h: mask.h, w: mask.w, components: components(&lm) }
    }
}

/// Per-component pixel list, area, centroid, and bounding box, ordered by id.
pub fn components(lm: &LabelMap) -> Vec<Component> {
    let mut out: Vec<Component> = (1..=lm.count as u32)
        .map(|id| Component {
            id,
            area: 0,
            centroid: (0.0, 0.0),
            bbox: (usize::MAX, usize::MAX, 0, 0),
            pixels: Vec::new(),
        })
        .collect();
    for y in 0..lm.h {
        for x in 0..lm.w {
            let l = lm.labels[y * lm.w + x];
            if l == 0 {
                continue;
            }
            let c = &mut out[(l - 1) as usize];
            c.area += 1;
            c.centroid.0 += y as f64;
            c.centroid.1 += x as f64;
            c.bbox.0 = c.bbox.0.min(y);
            c.bbox.1 = c.bbox.1.min(x);
            c.bbox.2 = c.bbox.2.max(y);
            c.bbox.3 = c.bbox.3.max(x);
            c.pixels.push((y, x));
        }
    }
    for c in &mut out {
        c.centroid.0 /= c.area as f64;
        c.centroid.1 /= c.area as f64;
    }
    out
}
