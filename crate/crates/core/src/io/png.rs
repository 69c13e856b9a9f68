//! Grayscale PNG I/O. Images hold floats in [0,1]; 8-bit files quantize by
//! 255, probability maps use 16-bit files quantized by 65535. Masks are
//! strictly {0,255} bytes.

use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::postproc::Mask;
use crate::raster::ImageBase;

type Image = ImageBase<f64>;

fn quantize(v: f64, scale: f64) -> f64 {
    (v * scale).round().clamp(0.0, scale)
}

pub fn write_gray8(path: &Path, img: &Image) -> Result<()> {
    let mut buf = GrayImage::new(img.w as u32, img.h as u32);
    for y in 0..img.h {
        for x in 0..img.w {
            buf.put_pixel(x as u32, y as u32, Luma([quantize(img.at(y, x), 255.0) as u8]));
        }
    }
    buf.save(path).map_err(|e| Error::decode(path, format!("png write: {e}")))
}

pub fn read_gray8(path: &Path) -> Result<Image> {
    let dynamic = image::open(path).map_err(|e| Error::decode(path, format!("png read: {e}")))?;
    let buf = dynamic.into_luma8();
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    let mut img = Image::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            img.set(y, x, f64::from(buf.get_pixel(x as u32, y as u32)[0]) / 255.0);
        }
    }
    Ok(img)
}

pub fn write_gray16(path: &Path, img: &Image) -> Result<()> {
    let mut buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::new(img.w as u32, img.h as u32);
    for y in 0..img.h {
        for x in 0..img.w {
            buf.put_pixel(x as u32, y as u32, Luma([quantize(img.at(y, x), 65535.0) as u16]));
        }
    }
    buf.save(path).map_err(|e| Error::decode(path, format!("png write: {e}")))
}

pub fn read_gray16(path: &Path) -> Result<Image> {
    let dynamic = image::open(path).map_err(|e| Error::decode(path, format!("png read: {e}")))?;
    let buf = dynamic.into_luma16();
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    let mut img = Image::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            img.set(y, x, f64::from(buf.get_pixel(x as u32, y as u32)[0]) / 65535.0);
        }
    }
    Ok(img)
}

pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    let mut buf = GrayImage::new(mask.w as u32, mask.h as u32);
    for y in 0..mask.h {
        for x in 0..mask.w {
            buf.put_pixel(x as u32, y as u32, Luma([if mask.at(y, x) { 255 } else { 0 }]));
        }
    }
    buf.save(path).map_err(|e| Error::decode(path, format!("png write: {e}")))
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    let dynamic = image::open(path).map_err(|e| Error::decode(path, format!("png read: {e}")))?;
    let buf = dynamic.into_luma8();
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    let mut mask = Mask::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            mask.set(y, x, buf.get_pixel(x as u32, y as u32)[0] > 127);
        }
    }
    Ok(mask)
}
