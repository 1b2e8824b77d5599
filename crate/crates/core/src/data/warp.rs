//! Parametric homographies for misalignment augmentation.
//!
//! Warps act on normalized, center-origin image coordinates: pixel (x, y)
//! of a WxH image maps to u = (x + 0.5)/W - 0.5, v = (y + 0.5)/H - 0.5,
//! both in [-0.5, 0.5]. The matrix composes as
//! perspective . rotation . scale . translation, i.e. translation is
//! applied to a point first and the perspective warp last.

use nalgebra::{Matrix3, Vector3};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::rng::Rng;

const DET_EPS: f64 = 1e-9;

/// The five-field parametric form. Corner order: top-left, top-right,
/// bottom-right, bottom-left; offsets are fractions of width/height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpComponents {
    pub tx: f64,
    pub ty: f64,
    pub scale: f64,
    pub theta: f64, // degrees
    pub corner_jitter: [[f64; 2]; 4],
}

impl WarpComponents {
    pub fn identity() -> Self {
        WarpComponents { tx: 0.0, ty: 0.0, scale: 1.0, theta: 0.0, corner_jitter: [[0.0; 2]; 4] }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    fn is_pure_translation(&self) -> bool {
        self.scale == 1.0 && self.theta == 0.0 && self.corner_jitter == [[0.0; 2]; 4]
    }
}

/// A homography with an optional parametric decomposition. Results of
/// compose/invert generally carry no decomposition; only parametric warps
/// serialize.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpParams {
    pub components: Option<WarpComponents>,
    matrix: Matrix3<f64>,
}

impl WarpParams {
    pub fn identity() -> Self {
        WarpParams { components: Some(WarpComponents::identity()), matrix: Matrix3::identity() }
    }

    pub fn from_components(c: WarpComponents) -> Result<Self> {
        let matrix = normalize(matrix_from_components(&c)?)?;
        let det = matrix.determinant();
        if det.abs() <= DET_EPS {
            return Err(Error::SingularWarp { det });
        }
        Ok(WarpParams { components: Some(c), matrix })
    }

    pub fn from_matrix(matrix: Matrix3<f64>) -> Result<Self> {
        let det = matrix.determinant();
        if det.abs() <= DET_EPS {
            return Err(Error::SingularWarp { det });
        }
        Ok(WarpParams { components: None, matrix: normalize(matrix)? })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn is_identity_matrix(&self) -> bool {
        self.matrix == Matrix3::identity()
    }

    /// Forward map of a normalized point.
    pub fn apply_point(&self, u: f64, v: f64) -> (f64, f64) {
        let p = self.matrix * Vector3::new(u, v, 1.0);
        (p.x / p.z, p.y / p.z)
    }
}

impl Serialize for WarpParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match &self.components {
            Some(c) => c.serialize(s),
            None => Err(serde::ser::Error::custom(
                "warp has no parametric form and cannot be serialized",
            )),
        }
    }
}

impl<'de> Deserialize<'de> for WarpParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let c = WarpComponents::deserialize(d)?;
        WarpParams::from_components(c).map_err(serde::de::Error::custom)
    }
}

/// Scale H so H[2,2] = 1.
fn normalize(m: Matrix3<f64>) -> Result<Matrix3<f64>> {
    let h22 = m[(2, 2)];
    if h22.abs() < 1e-12 {
        return Err(Error::SingularWarp { det: m.determinant() });
    }
    Ok(m / h22)
}

fn matrix_from_components(c: &WarpComponents) -> Result<Matrix3<f64>> {
    let t = Matrix3::new(1.0, 0.0, c.tx, 0.0, 1.0, c.ty, 0.0, 0.0, 1.0);
    let s = Matrix3::new(c.scale, 0.0, 0.0, 0.0, c.scale, 0.0, 0.0, 0.0, 1.0);
    let rad = c.theta.to_radians();
    let (sin, cos) = if c.theta == 0.0 { (0.0, 1.0) } else { rad.sin_cos() };
    let r = Matrix3::new(cos, -sin, 0.0, sin, cos, 0.0, 0.0, 0.0, 1.0);
    let p = perspective_from_corners(&c.corner_jitter)?;
    Ok(p * r * s * t)
}

/// Homography mapping the canonical corners (+-0.5, +-0.5) onto their
/// jittered positions, solved by the standard 4-point DLT. Zero jitter is
/// the exact identity.
fn perspective_from_corners(jitter: &[[f64; 2]; 4]) -> Result<Matrix3<f64>> {
    if jitter.iter().all(|d| d[0] == 0.0 && d[1] == 0.0) {
        return Ok(Matrix3::identity());
    }
    let src = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)];
    let mut a = nalgebra::SMatrix::<f64, 8, 8>::zeros();
    let mut b = nalgebra::SVector::<f64, 8>::zeros();
    for (i, ((u, v), d)) in src.iter().zip(jitter.iter()).enumerate() {
        let (up, vp) = (u + d[0], v + d[1]);
        // u' (h20 u + h21 v + 1) = h00 u + h01 v + h02
        a[(2 * i, 0)] = *u;
        a[(2 * i, 1)] = *v;
        a[(2 * i, 2)] = 1.0;
        a[(2 * i, 6)] = -up * u;
        a[(2 * i, 7)] = -up * v;
        b[2 * i] = up;
        a[(2 * i + 1, 3)] = *u;
        a[(2 * i + 1, 4)] = *v;
        a[(2 * i + 1, 5)] = 1.0;
        a[(2 * i + 1, 6)] = -vp * u;
        a[(2 * i + 1, 7)] = -vp * v;
        b[2 * i + 1] = vp;
    }
    let h = a.lu().solve(&b).ok_or(Error::SingularWarp { det: 0.0 })?;
    Ok(Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0))
}

/// matrix(result) = matrix(a) . matrix(b), normalized to H[2,2] = 1. When
/// one side is the identity the other side's parametric form is kept.
pub fn compose_warps(a: &WarpParams, b: &WarpParams) -> Result<WarpParams> {
    let m = normalize(a.matrix * b.matrix)?;
    let det = m.determinant();
    if det.abs() <= DET_EPS {
        return Err(Error::SingularWarp { det });
    }
    let components = if a.is_identity_matrix() {
        b.components
    } else if b.is_identity_matrix() {
        a.components
    } else {
        None
    };
    Ok(WarpParams { components, matrix: m })
}

pub fn invert_warp(w: &WarpParams) -> Result<WarpParams> {
    let inv = w
        .matrix
        .try_inverse()
        .ok_or(Error::SingularWarp { det: w.matrix.determinant() })?;
    let m = normalize(inv)?;
    let components = match &w.components {
        Some(c) if c.is_identity() => Some(*c),
        Some(c) if c.is_pure_translation() => {
            Some(WarpComponents { tx: -c.tx, ty: -c.ty, ..WarpComponents::identity() })
        }
        _ => None,
    };
    Ok(WarpParams { components, matrix: m })
}

/// Sampling intervals for each warp parameter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WarpRanges {
    pub tx: (f64, f64),
    pub ty: (f64, f64),
    pub scale: (f64, f64),
    pub theta: (f64, f64),
    pub corner_jitter: (f64, f64),
}

impl Default for WarpRanges {
    fn default() -> Self {
        WarpRanges {
            tx: (-0.05, 0.05),
            ty: (-0.05, 0.05),
            scale: (0.95, 1.05),
            theta: (-3.0, 3.0),
            corner_jitter: (-0.02, 0.02),
        }
    }
}

impl WarpRanges {
    pub fn validate(&self) -> Result<()> {
        let fields: [(&'static str, (f64, f64)); 5] = [
            ("tx", self.tx),
            ("ty", self.ty),
            ("scale", self.scale),
            ("theta", self.theta),
            ("corner_jitter", self.corner_jitter),
        ];
        for (name, (lo, hi)) in fields {
            if lo > hi {
                return Err(Error::BadRange { field: name, lo, hi });
            }
        }
        Ok(())
    }

    pub fn identity_point() -> Self {
        WarpRanges {
            tx: (0.0, 0.0),
            ty: (0.0, 0.0),
            scale: (1.0, 1.0),
            theta: (0.0, 0.0),
            corner_jitter: (0.0, 0.0),
        }
    }
}

fn sample_interval(rng: &mut Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

pub fn sample_warp(rng: &mut Rng, ranges: &WarpRanges) -> Result<WarpParams> {
    ranges.validate()?;
    let mut jitter = [[0.0f64; 2]; 4];
    let tx = sample_interval(rng, ranges.tx);
    let ty = sample_interval(rng, ranges.ty);
    let scale = sample_interval(rng, ranges.scale);
    let theta = sample_interval(rng, ranges.theta);
    for corner in jitter.iter_mut() {
        corner[0] = sample_interval(rng, ranges.corner_jitter);
        corner[1] = sample_interval(rng, ranges.corner_jitter);
    }
    WarpParams::from_components(WarpComponents { tx, ty, scale, theta, corner_jitter: jitter })
}

/// Resample `img` under the forward warp `w`: output pixel p takes the
/// value at H^-1(p), bilinear, constant `fill` outside the source.
pub fn apply_warp_plane(
    img: &ndarray::Array2<f32>,
    w: &WarpParams,
    fill: f32,
) -> Result<ndarray::Array2<f32>> {
    let inv = invert_warp(w)?;
    let (h, wd) = img.dim();
    let mut out = ndarray::Array2::<f32>::zeros((h, wd));
    let hf = h as f64;
    let wf = wd as f64;
    for y in 0..h {
        for x in 0..wd {
            let u = (x as f64 + 0.5) / wf - 0.5;
            let v = (y as f64 + 0.5) / hf - 0.5;
            let (su, sv) = inv.apply_point(u, v);
            let sx = (su + 0.5) * wf - 0.5;
            let sy = (sv + 0.5) * hf - 0.5;
            out[(y, x)] = bilinear(img, sx, sy, fill);
        }
    }
    Ok(out)
}

pub fn apply_warp(
    img: &ndarray::Array3<f32>,
    w: &WarpParams,
    fill: f32,
) -> Result<ndarray::Array3<f32>> {
    let (c, h, wd) = img.dim();
    let mut out = ndarray::Array3::<f32>::zeros((c, h, wd));
    for ci in 0..c {
        let plane = img.index_axis(ndarray::Axis(0), ci).to_owned();
        out.index_axis_mut(ndarray::Axis(0), ci)
            .assign(&apply_warp_plane(&plane, w, fill)?);
    }
    Ok(out)
}

fn bilinear(img: &ndarray::Array2<f32>, sx: f64, sy: f64, fill: f32) -> f32 {
    let (h, w) = img.dim();
    let x0 = sx.floor();
    let y0 = sy.floor();
    let fx = (sx - x0) as f32;
    let fy = (sy - y0) as f32;
    let sample = |yy: f64, xx: f64| -> f32 {
        if yy < 0.0 || xx < 0.0 || yy > (h - 1) as f64 || xx > (w - 1) as f64 {
            fill
        } else {
            img[(yy as usize, xx as usize)]
        }
    };
    let v00 = sample(y0, x0);
    let v01 = sample(y0, x0 + 1.0);
    let v10 = sample(y0 + 1.0, x0);
    let v11 = sample(y0 + 1.0, x0 + 1.0);
    let top = v00 * (1.0 - fx) + v01 * fx;
    let bot = v10 * (1.0 - fx) + v11 * fx;
    top * (1.0 - fy) + bot * fy
}
