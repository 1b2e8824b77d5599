//! Losses and evaluation metrics.

pub mod losses;
pub mod perceptual;
pub mod psnr_ssim;
pub mod report;

pub use losses::{l2_loss, l2_loss_with_grad, LossParts, TotalLoss};
pub use perceptual::{FeatureNet, LossConfig, PerceptualDistance, PerceptualFeatures, RandomPyramid};
pub use psnr_ssim::{psnr, ssim};
pub use report::{Aggregates, MetricsReport, PerImageMetrics};

use ndarray::{Array2, Array4};

use crate::error::{Error, Result};
use crate::nn::scalar::Scalar;

/// Metric-grade perceptual distance on single images in [0,1]; 1 or 3
/// channels, single channel replicated. Values outside [0,1] are rejected.
pub fn perceptual_distance<S: Scalar>(
    net: &mut PerceptualDistance<S>,
    a: &ndarray::Array3<S>,
    b: &ndarray::Array3<S>,
) -> Result<f64> {
    for img in [a, b] {
        let mut min = S::infinity();
        let mut max = S::neg_infinity();
        for v in img.iter() {
            if *v < min {
                min = *v;
            }
            if *v > max {
                max = *v;
            }
        }
        if min < S::zero() || max > S::one() {
            return Err(Error::Range { min: min.to_f(), max: max.to_f() });
        }
    }
    let to4 = |x: &ndarray::Array3<S>| -> Array4<S> {
        let (c, h, w) = x.dim();
        x.clone().into_shape_with_order((1, c, h, w)).unwrap()
    };
    Ok(net.distance(&to4(a), &to4(b))?.to_f())
}

/// Convenience wrapper for single-channel f32 planes.
pub fn perceptual_distance_plane(
    net: &mut PerceptualDistance<f32>,
    a: &Array2<f32>,
    b: &Array2<f32>,
) -> Result<f64> {
    let (h, w) = a.dim();
    let a3 = a.clone().into_shape_with_order((1, h, w)).unwrap();
    let (h2, w2) = b.dim();
    let b3 = b.clone().into_shape_with_order((1, h2, w2)).unwrap();
    perceptual_distance(net, &a3, &b3)
}
