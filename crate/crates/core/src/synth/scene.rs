//! Procedural background library. Each renderer consumes draws from the
//! caller's stream in a fixed order, so a scene is a pure function of
//! (kind, extents, stream state). Values stay in a dark-to-mid range,
//! leaving headroom for composited targets.

use rand::Rng;

use crate::raster::ImageBase;

type Image = ImageBase<f64>;

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Lattice value noise: one random value per cell corner, smooth bilinear
/// interpolation between them. Cell sizes may differ per axis.
fn value_noise(h: usize, w: usize, cell_y: f64, cell_x: f64, rng: &mut impl Rng) -> Image {
    let gy = (h as f64 / cell_y).ceil() as usize + 2;
    let gx = (w as f64 / cell_x).ceil() as usize + 2;
    let lattice: Vec<f64> = (0..gy * gx).map(|_| rng.gen::<f64>()).collect();
    Image::from_fn(h, w, |y, x| {
        let fy = y as f64 / cell_y;
        let fx = x as f64 / cell_x;
        let iy = fy.floor() as usize;
        let ix = fx.floor() as usize;
        let ty = smoothstep(fy - iy as f64);
        let tx = smoothstep(fx - ix as f64);
        let at = |r: usize, c: usize| lattice[r.min(gy - 1) * gx + c.min(gx - 1)];
        let top = at(iy, ix) * (1.0 - tx) + at(iy, ix + 1) * tx;
        let bot = at(iy + 1, ix) * (1.0 - tx) + at(iy + 1, ix + 1) * tx;
        top * (1.0 - ty) + bot * ty
    })
}

/// Sum of octaves with halving amplitude and cell size, renormalized to [0,1].
fn fbm(h: usize, w: usize, cell: f64, octaves: usize, rng: &mut impl Rng) -> Image {
    let mut acc = Image::zeros(h, w);
    let mut amp = 1.0;
    let mut c = cell;
    for _ in 0..octaves {
        let layer = value_noise(h, w, c, c, rng);
        for (a, l) in acc.data.iter_mut().zip(&layer.data) {
            *a += amp * l;
        }
        amp *= 0.5;
        c = (c * 0.5).max(1.5);
    }
    let (lo, hi) = acc.min_max();
    let span = (hi - lo).max(1e-12);
    acc.map(|v| (v - lo) / span)
}

fn rescale(img: Image, lo: f64, hi: f64) -> Image {
    img.map(|v| lo + v * (hi - lo))
}

pub fn render_cloud(h: usize, w: usize, rng: &mut impl Rng) -> Image {
    let base = fbm(h, w, (h.min(w) as f64 / 4.0).max(8.0), 4, rng);
    rescale(base, 0.08, 0.45)
}

pub fn render_city(h: usize, w: usize, rng: &mut impl Rng) -> Image {
    let mut img = rescale(fbm(h, w, 12.0, 3, rng), 0.05, 0.18);
    // Blocks of differing radiance over the noise floor.
    let blocks = rng.gen_range(6..=14);
    for _ in 0..blocks {
        let bh = rng.gen_range(h / 8..=h / 3).max(2);
        let bw = rng.gen_range(w / 8..=w / 3).max(2);
        let y0 = rng.gen_range(0..h.saturating_sub(bh).max(1));
        let x0 = rng.gen_range(0..w.saturating_sub(bw).max(1));
        let level = rng.gen_range(0.10..0.40);
        for y in y0..(y0 + bh).min(h) {
            for x in x0..(x0 + bw).min(w) {
                let v = img.at(y, x);
                img.set(y, x, (0.35 * v + 0.65 * level).clamp(0.0, 1.0));
            }
        }
    }
    img
}

pub fn render_sea(h: usize, w: usize, rng: &mut impl Rng) -> Image {
    // Horizontally stretched streaks over a vertical radiance gradient.
    let streaks = value_noise(h, w, 4.0, (w as f64 / 5.0).max(12.0), rng);
    let detail = value_noise(h, w, 2.5, 9.0, rng);
    Image::from_fn(h, w, |y, x| {
        let grad = 0.10 + 0.12 * (y as f64 / h.max(1) as f64);
        (grad + 0.18 * streaks.at(y, x) + 0.05 * detail.at(y, x)).clamp(0.0, 1.0)
    })
}

pub fn render_field(h: usize, w: usize, rng: &mut impl Rng) -> Image {
    let base = fbm(h, w, 18.0, 3, rng);
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let freq = rng.gen_range(0.05..0.12);
    Image::from_fn(h, w, |y, x| {
        let furrow = 0.5 + 0.5 * ((y as f64 + x as f64) * freq + phase).sin();
        (0.10 + 0.22 * base.at(y, x) + 0.08 * furrow).clamp(0.0, 1.0)
    })
}

pub fn render_highlight(h: usize, w: usize, rng: &mut impl Rng) -> Image {
    // Dark base with a few broad bright regions that are not targets.
    let mut img = rescale(fbm(h, w, (h.min(w) as f64 / 4.0).max(8.0), 3, rng), 0.05, 0.25);
    let blobs = rng.gen_range(1..=3);
    for _ in 0..blobs {
        let cy = rng.gen_range(0.0..h as f64);
        let cx = rng.gen_range(0.0..w as f64);
        let sigma = rng.gen_range(0.06..0.16) * h.min(w) as f64;
        let amp = rng.gen_range(0.25..0.45);
        for y in 0..h {
            for x in 0..w {
                let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                let v = img.at(y, x) + amp * (-d2 / (2.0 * sigma * sigma)).exp();
                img.set(y, x, v.clamp(0.0, 1.0));
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn scenes_are_deterministic_and_in_range() {
        type Render<'a> = &'a dyn Fn(usize, usize, &mut rand_chacha::ChaCha8Rng) -> Image;
        let renders: [Render; 5] = [
            &|h, w, r| render_cloud(h, w, r),
            &|h, w, r| render_city(h, w, r),
            &|h, w, r| render_sea(h, w, r),
            &|h, w, r| render_field(h, w, r),
            &|h, w, r| render_highlight(h, w, r),
        ];
        for (k, render) in renders.iter().enumerate() {
            let mut a = substream(5, "scene", k as u64, 0);
            let mut b = substream(5, "scene", k as u64, 0);
            let ia = render(40, 56, &mut a);
            let ib = render(40, 56, &mut b);
            assert_eq!(ia.data, ib.data);
            assert!(ia.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
            let (lo, hi) = ia.min_max();
            assert!(hi - lo > 0.01, "scene {k} has no structure");
        }
    }
}
