//! Image-plane helpers: separable resampling, color conversion, edge maps.
//!
//! Images are ndarray tensors in [0,1]: (H, W) single channel or (C, H, W)
//! multi-channel, f32.

use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResizeFilter {
    #[default]
    Bicubic,
    Bilinear,
    Area,
}

impl ResizeFilter {
    fn radius(self) -> f64 {
        match self {
            ResizeFilter::Bicubic => 2.0,
            ResizeFilter::Bilinear => 1.0,
            ResizeFilter::Area => 0.5,
        }
    }

    fn kernel(self, x: f64) -> f64 {
        match self {
            ResizeFilter::Bicubic => catmull_rom(x),
            ResizeFilter::Bilinear => {
                let a = x.abs();
                if a < 1.0 {
                    1.0 - a
                } else {
                    0.0
                }
            }
            ResizeFilter::Area => {
                if x.abs() <= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Keys cubic kernel with a = -0.5 (the common "bicubic").
fn catmull_rom(x: f64) -> f64 {
    let a = -0.5;
    let x = x.abs();
    if x < 1.0 {
        (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
    } else {
        0.0
    }
}

struct AxisWeights {
    // per output index: (first input tap, weights)
    taps: Vec<(usize, Vec<f32>)>,
}

fn axis_weights(n_in: usize, n_out: usize, filter: ResizeFilter) -> AxisWeights {
    let ratio = n_in as f64 / n_out as f64;
    let scale = ratio.max(1.0); // widen kernel when downsampling
    let radius = filter.radius() * scale;
    let mut taps = Vec::with_capacity(n_out);
    for o in 0..n_out {
        let center = (o as f64 + 0.5) * ratio - 0.5;
        let lo = (center - radius).ceil() as isize;
        let hi = (center + radius).floor() as isize;
        let mut ws = Vec::with_capacity((hi - lo + 1).max(0) as usize);
        let mut sum = 0.0;
        for t in lo..=hi {
            let w = filter.kernel((t as f64 - center) / scale);
            ws.push(w);
            sum += w;
        }
        if sum.abs() < 1e-12 {
            // degenerate window (can happen for area filter at ratio 1 edges)
            ws = vec![1.0];
            sum = 1.0;
        }
        let first = lo;
        // clamp taps into range by folding edge weights onto border pixels
        let mut folded: Vec<f64> = vec![0.0; n_in];
        for (i, w) in ws.iter().enumerate() {
            let idx = (first + i as isize).clamp(0, n_in as isize - 1) as usize;
            folded[idx] += w / sum;
        }
        let first_nz = folded.iter().position(|w| *w != 0.0).unwrap_or(0);
        let last_nz = folded.iter().rposition(|w| *w != 0.0).unwrap_or(0);
        let weights: Vec<f32> = folded[first_nz..=last_nz].iter().map(|w| *w as f32).collect();
        taps.push((first_nz, weights));
    }
    AxisWeights { taps }
}

/// Separable resize of a single-channel image; width pass first, then height.
pub fn resize(img: &Array2<f32>, oh: usize, ow: usize, filter: ResizeFilter) -> Array2<f32> {
    let (h, w) = img.dim();
    let wx = axis_weights(w, ow, filter);
    let mut tmp = Array2::<f32>::zeros((h, ow));
    for y in 0..h {
        let row = img.row(y);
        for (ox, (first, ws)) in wx.taps.iter().enumerate() {
            let mut acc = 0.0f32;
            for (i, wv) in ws.iter().enumerate() {
                acc += row[first + i] * wv;
            }
            tmp[(y, ox)] = acc;
        }
    }
    let wy = axis_weights(h, oh, filter);
    let mut out = Array2::<f32>::zeros((oh, ow));
    for (oy, (first, ws)) in wy.taps.iter().enumerate() {
        for ox in 0..ow {
            let mut acc = 0.0f32;
            for (i, wv) in ws.iter().enumerate() {
                acc += tmp[(first + i, ox)] * wv;
            }
            out[(oy, ox)] = acc;
        }
    }
    out
}

pub fn resize_chw(img: &Array3<f32>, oh: usize, ow: usize, filter: ResizeFilter) -> Array3<f32> {
    let c = img.dim().0;
    let mut out = Array3::<f32>::zeros((c, oh, ow));
    for ci in 0..c {
        let plane = img.index_axis(Axis(0), ci).to_owned();
        out.index_axis_mut(Axis(0), ci).assign(&resize(&plane, oh, ow, filter));
    }
    out
}

/// Center square crop of an (H, W) image.
pub fn center_crop_square(img: &Array2<f32>) -> Array2<f32> {
    let (h, w) = img.dim();
    let side = h.min(w);
    let y0 = (h - side) / 2;
    let x0 = (w - side) / 2;
    img.slice(ndarray::s![y0..y0 + side, x0..x0 + side]).to_owned()
}

pub fn center_crop_square_chw(img: &Array3<f32>) -> Array3<f32> {
    let (_, h, w) = img.dim();
    let side = h.min(w);
    let y0 = (h - side) / 2;
    let x0 = (w - side) / 2;
    img.slice(ndarray::s![.., y0..y0 + side, x0..x0 + side]).to_owned()
}

/// Rec. 601 luminance of a (3, H, W) image.
pub fn luma(rgb: &Array3<f32>) -> Array2<f32> {
    let (c, h, w) = rgb.dim();
    assert_eq!(c, 3, "luma expects 3 channels");
    let mut out = Array2::<f32>::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            out[(y, x)] =
                0.299 * rgb[(0, y, x)] + 0.587 * rgb[(1, y, x)] + 0.114 * rgb[(2, y, x)];
        }
    }
    out
}

pub fn clamp01(img: &mut Array2<f32>) {
    img.mapv_inplace(|v| v.clamp(0.0, 1.0));
}

/// Sobel gradient magnitude, replicate borders.
pub fn sobel_magnitude(img: &Array2<f32>) -> Array2<f32> {
    let (h, w) = img.dim();
    let get = |y: isize, x: isize| -> f32 {
        let yy = y.clamp(0, h as isize - 1) as usize;
        let xx = x.clamp(0, w as isize - 1) as usize;
        img[(yy, xx)]
    };
    let mut out = Array2::<f32>::zeros((h, w));
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = -get(y - 1, x - 1) - 2.0 * get(y, x - 1) - get(y + 1, x - 1)
                + get(y - 1, x + 1)
                + 2.0 * get(y, x + 1)
                + get(y + 1, x + 1);
            let gy = -get(y - 1, x - 1) - 2.0 * get(y - 1, x) - get(y - 1, x + 1)
                + get(y + 1, x - 1)
                + 2.0 * get(y + 1, x)
                + get(y + 1, x + 1);
            out[(y as usize, x as usize)] = (gx * gx + gy * gy).sqrt();
        }
    }
    out
}

/// Binary edge map at a fraction of the maximum gradient magnitude.
pub fn edge_map(img: &Array2<f32>, rel_threshold: f32) -> Array2<bool> {
    let mag = sobel_magnitude(img);
    let max = mag.iter().cloned().fold(0.0f32, f32::max);
    let thr = rel_threshold * max;
    mag.mapv(|v| v > thr && max > 0.0)
}

/// Fraction of `a` edge pixels with a `b` edge pixel within `radius` (L∞).
pub fn edge_overlap_fraction(a: &Array2<bool>, b: &Array2<bool>, radius: usize) -> f64 {
    let (h, w) = a.dim();
    let mut total = 0usize;
    let mut hit = 0usize;
    for y in 0..h {
        for x in 0..w {
            if !a[(y, x)] {
                continue;
            }
            total += 1;
            let y0 = y.saturating_sub(radius);
            let x0 = x.saturating_sub(radius);
            let y1 = (y + radius).min(h - 1);
            let x1 = (x + radius).min(w - 1);
            'scan: for yy in y0..=y1 {
                for xx in x0..=x1 {
                    if b[(yy, xx)] {
                        hit += 1;
                        break 'scan;
                    }
                }
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}
