//! Degradation of HR thermal captures into LR inputs and preparation of
//! HR RGB references.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::{center_crop_square, center_crop_square_chw, resize, resize_chw, ResizeFilter};
use crate::nn::rng::rng_from_seed;
use crate::nn::scalar::Scalar;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradeConfig {
    pub lr_size: usize,
    pub ref_size: usize,
    pub noise_sigma: f64,
    pub downsample_filter: ResizeFilter,
}

impl Default for DegradeConfig {
    fn default() -> Self {
        DegradeConfig {
            lr_size: 64,
            ref_size: 512,
            noise_sigma: 0.02,
            downsample_filter: ResizeFilter::Bicubic,
        }
    }
}

impl DegradeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr_size < 8 {
            return Err(Error::Config(format!("lr_size {} below minimum 8", self.lr_size)));
        }
        if self.ref_size % self.lr_size != 0 {
            return Err(Error::Config(format!(
                "ref_size {} is not a multiple of lr_size {}",
                self.ref_size, self.lr_size
            )));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Config(format!("noise_sigma {} negative", self.noise_sigma)));
        }
        Ok(())
    }
}

/// Center-crop to square, resample to lr_size, add seeded Gaussian noise,
/// clamp to [0,1]. Deterministic for a fixed (input, config, seed).
pub fn degrade_thermal(
    hr_thermal: &Array3<f32>,
    cfg: &DegradeConfig,
    seed: u64,
) -> Result<Array2<f32>> {
    cfg.validate()?;
    let (c, h, w) = hr_thermal.dim();
    if c != 1 {
        return Err(Error::BadChannelCount { expected: 1, got: c });
    }
    if h.min(w) < cfg.lr_size {
        return Err(Error::InputTooSmall { got: w, got2: h, need: cfg.lr_size });
    }
    let plane = hr_thermal.index_axis(ndarray::Axis(0), 0).to_owned();
    let cropped = center_crop_square(&plane);
    let mut lr = resize(&cropped, cfg.lr_size, cfg.lr_size, cfg.downsample_filter);
    if cfg.noise_sigma > 0.0 {
        let mut rng = rng_from_seed(seed);
        let sigma = cfg.noise_sigma as f32;
        lr.mapv_inplace(|v| v + f32::standard_normal(&mut rng) * sigma);
    }
    lr.mapv_inplace(|v| v.clamp(0.0, 1.0));
    Ok(lr)
}

/// Center-crop the RGB frame with the same relative geometry as the thermal
/// crop and resample to ref_size.
pub fn prepare_reference(rgb: &Array3<f32>, cfg: &DegradeConfig) -> Result<Array3<f32>> {
    cfg.validate()?;
    let (c, h, w) = rgb.dim();
    if c != 3 {
        return Err(Error::BadChannelCount { expected: 3, got: c });
    }
    if h.min(w) < cfg.ref_size {
        return Err(Error::InputTooSmall { got: w, got2: h, need: cfg.ref_size });
    }
    let cropped = center_crop_square_chw(rgb);
    if cropped.dim().1 == cfg.ref_size {
        return Ok(cropped);
    }
    let mut out = resize_chw(&cropped, cfg.ref_size, cfg.ref_size, cfg.downsample_filter);
    out.mapv_inplace(|v| v.clamp(0.0, 1.0));
    Ok(out)
}

/// GT thermal at output resolution: same crop window as the LR input,
/// resampled to ref_size.
pub fn prepare_gt_thermal(hr_thermal: &Array3<f32>, cfg: &DegradeConfig) -> Result<Array2<f32>> {
    cfg.validate()?;
    let (c, h, w) = hr_thermal.dim();
    if c != 1 {
        return Err(Error::BadChannelCount { expected: 1, got: c });
    }
    if h.min(w) < cfg.lr_size {
        return Err(Error::InputTooSmall { got: w, got2: h, need: cfg.lr_size });
    }
    let plane = hr_thermal.index_axis(ndarray::Axis(0), 0).to_owned();
    let cropped = center_crop_square(&plane);
    if cropped.dim().0 == cfg.ref_size {
        return Ok(cropped);
    }
    let mut out = resize(&cropped, cfg.ref_size, cfg.ref_size, cfg.downsample_filter);
    out.mapv_inplace(|v| v.clamp(0.0, 1.0));
    Ok(out)
}
