//! Classic filtering detectors used as reference points: white top-hat with a
//! flat square structuring element, and the max-of-directional-medians
//! filter. Both produce response maps that feed the same thresholding and
//! clustering stages as the network.

use crate::error::{Error, Result};
use crate::raster::ImageBase;
use crate::scalar::Scalar;

fn check_window(size: usize) -> Result<usize> {
    if size % 2 == 0 || size == 0 {
        return Err(Error::Config(format!("filter window {size} must be odd")));
    }
    Ok(size / 2)
}

/// Horizontal sliding min or max with reflect padding.
fn slide_rows<T: Scalar>(img: &ImageBase<T>, r: usize, take_max: bool) -> ImageBase<T> {
    let mut out = ImageBase::zeros(img.h, img.w);
    for y in 0..img.h {
        for x in 0..img.w {
            let mut acc = img.at_reflect(y as isize, x as isize - r as isize);
            for dx in -(r as isize) + 1..=r as isize {
                let v = img.at_reflect(y as isize, x as isize + dx);
                if (take_max && v > acc) || (!take_max && v < acc) {
                    acc = v;
                }
            }
            out.set(y, x, acc);
        }
    }
    out
}

fn slide_cols<T: Scalar>(img: &ImageBase<T>, r: usize, take_max: bool) -> ImageBase<T> {
    let mut out = ImageBase::zeros(img.h, img.w);
    for y in 0..img.h {
        for x in 0..img.w {
            let mut acc = img.at_reflect(y as isize - r as isize, x as isize);
            for dy in -(r as isize) + 1..=r as isize {
                let v = img.at_reflect(y as isize + dy, x as isize);
                if (take_max && v > acc) || (!take_max && v < acc) {
                    acc = v;
                }
            }
            out.set(y, x, acc);
        }
    }
    out
}

/// Erosion with a flat square element: separable min filter.
pub fn erode<T: Scalar>(img: &ImageBase<T>, size: usize) -> Result<ImageBase<T>> {
    let r = check_window(size)?;
    Ok(slide_cols(&slide_rows(img, r, false), r, false))
}

/// Dilation with a flat square element: separable max filter.
pub fn dilate<T: Scalar>(img: &ImageBase<T>, size: usize) -> Result<ImageBase<T>> {
    let r = check_window(size)?;
    Ok(slide_cols(&slide_rows(img, r, true), r, true))
}

/// White top-hat response: image minus its opening (erosion then dilation).
/// Nonnegative by construction since the window contains its center.
pub fn tophat<T: Scalar>(img: &ImageBase<T>, size: usize) -> Result<ImageBase<T>> {
    let opened = dilate(&erode(img, size)?, size)?;
    let mut out = ImageBase::zeros(img.h, img.w);
    for (o, (&a, &b)) in out.data.iter_mut().zip(img.data.iter().zip(&opened.data)) {
        *o = a - b;
    }
    Ok(out)
}

/// Max-median response: image minus the maximum of the four directional
/// line medians (horizontal, vertical, both diagonals), clamped at zero.
pub fn max_median<T: Scalar>(img: &ImageBase<T>, size: usize) -> Result<ImageBase<T>> {
    let r = check_window(size)? as isize;
    let k = size;
    let mut out = ImageBase::zeros(img.h, img.w);
    let mut line = vec![T::zero(); k];
    for y in 0..img.h {
        for x in 0..img.w {
            let (yy, xx) = (y as isize, x as isize);
            let mut best = T::neg_infinity();
            for dir in 0..4 {
                for (slot, d) in (-r..=r).enumerate() {
                    line[slot] = match dir {
                        0 => img.at_reflect(yy, xx + d),
                        1 => img.at_reflect(yy + d, xx),
                        2 => img.at_reflect(yy + d, xx + d),
                        _ => img.at_reflect(yy + d, xx - d),
                    };
                }
                let mid = k / 2;
                line.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite response values"));
                let med = line[mid];
                if med > best {
                    best = med;
                }
            }
            let v = img.at(y, x) - best;
            out.set(y, x, if v > T::zero() { v } else { T::zero() });
        }
    }
    Ok(out)
}
