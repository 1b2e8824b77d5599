//! Training loss: L = L2 + lambda * perceptual.

use ndarray::Array4;

use super::perceptual::{LossConfig, PerceptualDistance};
use crate::error::{Error, Result};
use crate::nn::scalar::Scalar;

/// Mean squared error over all elements.
pub fn l2_loss<S: Scalar>(pred: &Array4<S>, gt: &Array4<S>) -> Result<S> {
    check_shapes(pred, gt)?;
    let n = S::from_f(pred.len() as f64);
    let mut acc = S::zero();
    for (a, b) in pred.iter().zip(gt.iter()) {
        let d = *a - *b;
        acc += d * d;
    }
    Ok(acc / n)
}

pub fn l2_loss_with_grad<S: Scalar>(pred: &Array4<S>, gt: &Array4<S>) -> Result<(S, Array4<S>)> {
    check_shapes(pred, gt)?;
    let n = S::from_f(pred.len() as f64);
    let two = S::from_f(2.0);
    let mut acc = S::zero();
    let mut grad = pred.clone();
    grad.zip_mut_with(gt, |g, t| {
        let d = *g - *t;
        acc += d * d;
        *g = two * d / n;
    });
    Ok((acc / n, grad))
}

fn check_shapes<S: Scalar>(a: &Array4<S>, b: &Array4<S>) -> Result<()> {
    if a.dim() != b.dim() {
        let (d, e) = (a.dim(), b.dim());
        return Err(Error::ShapeMismatch {
            a: vec![d.0, d.1, d.2, d.3],
            b: vec![e.0, e.1, e.2, e.3],
        });
    }
    Ok(())
}

/// Per-component breakdown of one loss evaluation.
#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub l2: f64,
    pub perceptual: f64,
    pub total: f64,
}

/// The combined training objective. Owns the perceptual extractor so the
/// feature weights stay fixed across steps.
pub struct TotalLoss<S: Scalar> {
    pub lambda: S,
    perceptual: PerceptualDistance<S>,
}

impl<S: Scalar> TotalLoss<S> {
    pub fn from_config(cfg: &LossConfig) -> Result<Self> {
        Ok(TotalLoss {
            lambda: S::from_f(cfg.lambda),
            perceptual: PerceptualDistance::from_config(cfg)?,
        })
    }

    pub fn with_perceptual(lambda: f64, perceptual: PerceptualDistance<S>) -> Self {
        TotalLoss { lambda: S::from_f(lambda), perceptual }
    }

    pub fn value(&mut self, pred: &Array4<S>, gt: &Array4<S>) -> Result<LossParts> {
        let l2 = l2_loss(pred, gt)?;
        let p = if self.lambda == S::zero() {
            S::zero()
        } else {
            self.perceptual.distance(pred, gt)?
        };
        Ok(LossParts {
            l2: l2.to_f(),
            perceptual: p.to_f(),
            total: (l2 + self.lambda * p).to_f(),
        })
    }

    /// Loss and gradient w.r.t. pred.
    pub fn value_and_grad(
        &mut self,
        pred: &Array4<S>,
        gt: &Array4<S>,
    ) -> Result<(LossParts, Array4<S>)> {
        let (l2, mut grad) = l2_loss_with_grad(pred, gt)?;
        let p = if self.lambda == S::zero() {
            S::zero()
        } else {
            let (p, pgrad) = self.perceptual.distance_with_grad(pred, gt)?;
            let lambda = self.lambda;
            grad.zip_mut_with(&pgrad, |g, d| *g = *g + lambda * *d);
            p
        };
        Ok((
            LossParts {
                l2: l2.to_f(),
                perceptual: p.to_f(),
                total: (l2 + self.lambda * p).to_f(),
            },
            grad,
        ))
    }
}
