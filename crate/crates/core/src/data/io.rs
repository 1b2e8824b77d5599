//! PNG interchange: RGB references are 8-bit 3-channel, thermal images are
//! 16-bit single-channel scaled to [0,1] by 1/65535 on load.

use std::path::Path;

use image::{ColorType, DynamicImage, ImageBuffer, Luma, Rgb};
use ndarray::{Array2, Array3};

use crate::error::{Error, Result};

pub fn save_thermal_png(path: &Path, img: &Array2<f32>) -> Result<()> {
    let (h, w) = img.dim();
    let mut buf = ImageBuffer::<Luma<u16>, Vec<u16>>::new(w as u32, h as u32);
    for (y, row) in img.outer_iter().enumerate() {
        for (x, &v) in row.iter().enumerate() {
            let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
            buf.put_pixel(x as u32, y as u32, Luma([q]));
        }
    }
    buf.save(path).map_err(|e| Error::image(path.display().to_string(), e))
}

pub fn load_thermal_png(path: &Path) -> Result<Array2<f32>> {
    let img = image::open(path).map_err(|e| Error::image(path.display().to_string(), e))?;
    match img.color() {
        ColorType::L16 => {
            let buf = img.into_luma16();
            let (w, h) = buf.dimensions();
            let mut out = Array2::<f32>::zeros((h as usize, w as usize));
            for (x, y, p) in buf.enumerate_pixels() {
                out[(y as usize, x as usize)] = p.0[0] as f32 / 65535.0;
            }
            Ok(out)
        }
        ColorType::L8 => {
            let buf = img.into_luma8();
            let (w, h) = buf.dimensions();
            let mut out = Array2::<f32>::zeros((h as usize, w as usize));
            for (x, y, p) in buf.enumerate_pixels() {
                out[(y as usize, x as usize)] = p.0[0] as f32 / 255.0;
            }
            Ok(out)
        }
        other => Err(Error::BadChannelCount { expected: 1, got: other.channel_count() as usize }),
    }
}

pub fn save_rgb_png(path: &Path, img: &Array3<f32>) -> Result<()> {
    let (c, h, w) = img.dim();
    if c != 3 {
        return Err(Error::BadChannelCount { expected: 3, got: c });
    }
    let mut buf = ImageBuffer::<Rgb<u8>, Vec<u8>>::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let px = [
                (img[(0, y, x)].clamp(0.0, 1.0) * 255.0).round() as u8,
                (img[(1, y, x)].clamp(0.0, 1.0) * 255.0).round() as u8,
                (img[(2, y, x)].clamp(0.0, 1.0) * 255.0).round() as u8,
            ];
            buf.put_pixel(x as u32, y as u32, Rgb(px));
        }
    }
    buf.save(path).map_err(|e| Error::image(path.display().to_string(), e))
}

pub fn load_rgb_png(path: &Path) -> Result<Array3<f32>> {
    let img = image::open(path).map_err(|e| Error::image(path.display().to_string(), e))?;
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> = match img {
        DynamicImage::ImageRgb8(b) => b,
        other => {
            let got = other.color().channel_count() as usize;
            if got != 3 {
                return Err(Error::BadChannelCount { expected: 3, got });
            }
            other.into_rgb8()
        }
    };
    let (w, h) = buf.dimensions();
    let mut out = Array3::<f32>::zeros((3, h as usize, w as usize));
    for (x, y, p) in buf.enumerate_pixels() {
        for ci in 0..3 {
            out[(ci, y as usize, x as usize)] = p.0[ci] as f32 / 255.0;
        }
    }
    Ok(out)
}
