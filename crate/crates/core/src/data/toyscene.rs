//! Synthetic paired scenes: random primitives rendered twice, once as RGB
//! with per-primitive color and fine texture, once as thermal intensity.
//! Geometry is shared exactly between the two renders, so RGB edges are
//! informative about thermal structure by construction.

use ndarray::{Array2, Array3};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::nn::rng::Rng;

const EDGE_SOFTNESS: f32 = 0.75; // px, anti-alias band shared by both modalities

#[derive(Debug, Clone, Copy)]
enum Shape {
    Disk { cx: f32, cy: f32, r: f32 },
    Rect { cx: f32, cy: f32, hw: f32, hh: f32, angle: f32 },
    Line { x0: f32, y0: f32, x1: f32, y1: f32, half_width: f32 },
}

impl Shape {
    /// Signed distance, negative inside.
    fn sdf(&self, x: f32, y: f32) -> f32 {
        match *self {
            Shape::Disk { cx, cy, r } => ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() - r,
            Shape::Rect { cx, cy, hw, hh, angle } => {
                let (s, c) = angle.sin_cos();
                let dx = x - cx;
                let dy = y - cy;
                let rx = (c * dx + s * dy).abs() - hw;
                let ry = (-s * dx + c * dy).abs() - hh;
                let ox = rx.max(0.0);
                let oy = ry.max(0.0);
                (ox * ox + oy * oy).sqrt() + rx.max(ry).min(0.0)
            }
            Shape::Line { x0, y0, x1, y1, half_width } => {
                let (dx, dy) = (x1 - x0, y1 - y0);
                let len2 = dx * dx + dy * dy;
                let t = if len2 > 0.0 {
                    (((x - x0) * dx + (y - y0) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (px, py) = (x0 + t * dx, y0 + t * dy);
                ((x - px).powi(2) + (y - py).powi(2)).sqrt() - half_width
            }
        }
    }

    fn coverage(&self, x: f32, y: f32) -> f32 {
        let d = self.sdf(x, y);
        (0.5 - d / EDGE_SOFTNESS).clamp(0.0, 1.0)
    }
}

struct Primitive {
    shape: Shape,
    color: [f32; 3],
    texture_freq: f32,
    texture_dir: (f32, f32),
    texture_phase: f32,
    texture_amp: f32,
    temperature: f32,
    temp_grad: (f32, f32),
}

/// Deterministic paired toy scene: (RGB (3,s,s), thermal (s,s)), both [0,1].
pub fn generate_toy_scene(rng: &mut Rng, size: usize) -> Result<(Array3<f32>, Array2<f32>)> {
    if size < 64 {
        return Err(Error::TooSmall { got: size, need: 64 });
    }
    let s = size as f32;

    // textured background, smooth in thermal, mildly textured in RGB
    let bg_thermal_base: f32 = rng.gen_range(0.25..0.55);
    let bg_thermal_slope = (rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
    let bg_color: [f32; 3] = [rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)];
    let bg_wave_freq: f32 = rng.gen_range(0.015..0.05);
    let bg_wave_dir = {
        let a: f32 = rng.gen_range(0.0..std::f32::consts::TAU);
        (a.cos(), a.sin())
    };
    let bg_luma = 0.299 * bg_color[0] + 0.587 * bg_color[1] + 0.114 * bg_color[2];

    let n_prims = rng.gen_range(3..=10);
    let mut prims = Vec::with_capacity(n_prims);
    for _ in 0..n_prims {
        let kind = rng.gen_range(0..3);
        let shape = match kind {
            0 => Shape::Disk {
                cx: rng.gen_range(0.1 * s..0.9 * s),
                cy: rng.gen_range(0.1 * s..0.9 * s),
                r: rng.gen_range(0.03 * s..0.22 * s),
            },
            1 => Shape::Rect {
                cx: rng.gen_range(0.1 * s..0.9 * s),
                cy: rng.gen_range(0.1 * s..0.9 * s),
                hw: rng.gen_range(0.04 * s..0.2 * s),
                hh: rng.gen_range(0.04 * s..0.2 * s),
                angle: rng.gen_range(0.0..std::f32::consts::PI),
            },
            _ => Shape::Line {
                x0: rng.gen_range(0.0..s),
                y0: rng.gen_range(0.0..s),
                x1: rng.gen_range(0.0..s),
                y1: rng.gen_range(0.0..s),
                half_width: rng.gen_range(0.008 * s..0.03 * s),
            },
        };
        // colors and temperatures are resampled until they contrast with
        // the background, so every primitive leaves edges in both renders
        let mut color;
        loop {
            color = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let luma: f32 = 0.299 * color[0] + 0.587 * color[1] + 0.114 * color[2];
            if (luma - bg_luma).abs() >= 0.2 {
                break;
            }
        }
        let mut temperature;
        loop {
            temperature = rng.gen_range(0.0..1.0);
            if (temperature - bg_thermal_base).abs() >= 0.25 {
                break;
            }
        }
        prims.push(Primitive {
            shape,
            color,
            texture_freq: rng.gen_range(0.7..1.6),
            texture_dir: {
                let a: f32 = rng.gen_range(0.0..std::f32::consts::TAU);
                (a.cos(), a.sin())
            },
            texture_phase: rng.gen_range(0.0..std::f32::consts::TAU),
            texture_amp: rng.gen_range(0.06..0.16),
            temperature,
            temp_grad: (rng.gen_range(-0.04..0.04), rng.gen_range(-0.04..0.04)),
        });
    }

    let mut rgb = Array3::<f32>::zeros((3, size, size));
    let mut thermal = Array2::<f32>::zeros((size, size));
    for y in 0..size {
        for x in 0..size {
            let xf = x as f32;
            let yf = y as f32;
            let wave =
                (bg_wave_freq * (bg_wave_dir.0 * xf + bg_wave_dir.1 * yf)).sin() * 0.05;
            let mut t = bg_thermal_base
                + bg_thermal_slope.0 * (xf / s - 0.5)
                + bg_thermal_slope.1 * (yf / s - 0.5)
                + wave;
            let mut px = [
                bg_color[0] + wave * 1.5,
                bg_color[1] + wave * 1.5,
                bg_color[2] + wave * 1.5,
            ];
            for p in &prims {
                let cov = p.shape.coverage(xf, yf);
                if cov <= 0.0 {
                    continue;
                }
                let stripe = (p.texture_freq
                    * (p.texture_dir.0 * xf + p.texture_dir.1 * yf)
                    + p.texture_phase)
                    .sin();
                for ci in 0..3 {
                    let textured = p.color[ci] * (1.0 + p.texture_amp * stripe);
                    px[ci] = px[ci] * (1.0 - cov) + textured * cov;
                }
                let temp = p.temperature
                    + p.temp_grad.0 * (xf / s - 0.5)
                    + p.temp_grad.1 * (yf / s - 0.5);
                t = t * (1.0 - cov) + temp * cov;
            }
            for ci in 0..3 {
                rgb[(ci, y, x)] = px[ci].clamp(0.0, 1.0);
            }
            thermal[(y, x)] = t.clamp(0.0, 1.0);
        }
    }
    Ok((rgb, thermal))
}
