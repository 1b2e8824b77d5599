//! Perceptual distance over a pluggable frozen feature extractor.
//!
//! distance(a, b) = sum over stages of mean_{b,h,w} sum_c
//! (n(f(a)) - n(f(b)))^2 with per-position unit normalization
//! n(f) = f / sqrt(sum_c f^2 + eps). The default extractor is a
//! seed-fixed random strided conv pyramid; a pretrained extractor can be
//! slotted in through the `PerceptualFeatures` trait.

use ndarray::{Array4, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::conv::Conv2d;
use crate::nn::param::set_trainable;
use crate::nn::rng::derive_rng;
use crate::nn::scalar::Scalar;
use crate::nn::act::Silu;

const NORM_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureNet {
    #[default]
    RandomPyramid,
    External,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub lambda: f64,
    pub feature_net: FeatureNet,
    pub feature_seed: u64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { lambda: 1.0, feature_net: FeatureNet::RandomPyramid, feature_seed: 0 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(Error::Config(format!("lambda {} negative", self.lambda)));
        }
        Ok(())
    }
}

/// A frozen multi-stage feature extractor with a vector-Jacobian product.
pub trait PerceptualFeatures<S: Scalar>: Send {
    /// Per-stage feature maps for a (B, 3, H, W) input. `train` caches
    /// activations for one later `backward` call.
    fn features(&mut self, x: &Array4<S>, train: bool) -> Vec<Array4<S>>;
    /// Propagate per-stage output gradients back to the input.
    fn backward(&mut self, stage_grads: Vec<Array4<S>>) -> Array4<S>;
    fn stages(&self) -> usize;
}

/// Default extractor: 4 strided conv stages with seed-fixed random weights.
#[derive(Debug, Clone)]
pub struct RandomPyramid<S: Scalar> {
    convs: Vec<Conv2d<S>>,
    acts: Vec<Silu<S>>,
}

impl<S: Scalar> RandomPyramid<S> {
    pub fn new(seed: u64) -> Self {
        let mut rng = derive_rng(seed, "perceptual-pyramid", &[]);
        let widths = [3usize, 12, 24, 48, 48];
        let mut convs = Vec::new();
        for i in 0..4 {
            let mut conv = Conv2d::new(
                &format!("perceptual.stage{i}"),
                &mut rng,
                widths[i],
                widths[i + 1],
                3,
                2,
                1,
            );
            set_trainable(&mut conv, false);
            convs.push(conv);
        }
        RandomPyramid { convs, acts: (0..4).map(|_| Silu::new()).collect() }
    }
}

impl<S: Scalar> PerceptualFeatures<S> for RandomPyramid<S> {
    fn features(&mut self, x: &Array4<S>, train: bool) -> Vec<Array4<S>> {
        let mut out = Vec::with_capacity(4);
        let mut h = x.clone();
        for (conv, act) in self.convs.iter_mut().zip(self.acts.iter_mut()) {
            h = act.forward(&conv.forward(&h, train), train);
            out.push(h.clone());
        }
        out
    }

    fn backward(&mut self, stage_grads: Vec<Array4<S>>) -> Array4<S> {
        assert_eq!(stage_grads.len(), 4);
        let mut g: Option<Array4<S>> = None;
        for i in (0..4).rev() {
            let mut gi = stage_grads[i].clone();
            if let Some(from_above) = g {
                gi.zip_mut_with(&from_above, |a, b| *a = *a + *b);
            }
            let gi = self.acts[i].backward(&gi);
            g = Some(self.convs[i].backward(&gi));
        }
        g.unwrap()
    }

    fn stages(&self) -> usize {
        4
    }
}

/// The distance itself. Owns the extractor; both metric evaluation and the
/// differentiable training path go through here.
pub struct PerceptualDistance<S: Scalar> {
    net: Box<dyn PerceptualFeatures<S>>,
}

impl<S: Scalar> PerceptualDistance<S> {
    pub fn from_config(cfg: &LossConfig) -> Result<Self> {
        cfg.validate()?;
        match cfg.feature_net {
            FeatureNet::RandomPyramid => {
                Ok(PerceptualDistance { net: Box::new(RandomPyramid::new(cfg.feature_seed)) })
            }
            FeatureNet::External => Err(Error::Config(
                "feature_net = external requires an extractor provided via with_extractor"
                    .to_string(),
            )),
        }
    }

    pub fn with_extractor(net: Box<dyn PerceptualFeatures<S>>) -> Self {
        PerceptualDistance { net }
    }

    /// Distance over a batch; inputs (B, C, H, W) with C = 1 or 3.
    pub fn distance(&mut self, a: &Array4<S>, b: &Array4<S>) -> Result<S> {
        Ok(self.forward_internal(a, b, false)?.0)
    }

    /// Distance and its gradient w.r.t. the first argument.
    pub fn distance_with_grad(&mut self, pred: &Array4<S>, gt: &Array4<S>) -> Result<(S, Array4<S>)> {
        let (value, grad3) = self.forward_internal(pred, gt, true)?;
        let grad = grad3.expect("grad requested");
        Ok((value, grad))
    }

    fn forward_internal(
        &mut self,
        pred: &Array4<S>,
        gt: &Array4<S>,
        with_grad: bool,
    ) -> Result<(S, Option<Array4<S>>)> {
        if pred.dim() != gt.dim() {
            let d = pred.dim();
            let e = gt.dim();
            return Err(Error::ShapeMismatch {
                a: vec![d.0, d.1, d.2, d.3],
                b: vec![e.0, e.1, e.2, e.3],
            });
        }
        let c_in = pred.dim().1;
        if c_in != 1 && c_in != 3 {
            return Err(Error::BadChannelCount { expected: 3, got: c_in });
        }
        let pred3 = replicate3(pred);
        let gt3 = replicate3(gt);

        let feats_gt = self.net.features(&gt3, false);
        let feats_pred = self.net.features(&pred3, with_grad);

        let mut total = S::zero();
        let mut stage_grads = Vec::with_capacity(feats_pred.len());
        for (fa, fb) in feats_pred.iter().zip(feats_gt.iter()) {
            let (na, ra) = unit_normalize(fa);
            let (nb, _) = unit_normalize(fb);
            let (b, c, h, w) = na.dim();
            let denom = S::from_f((b * h * w) as f64);
            let mut stage = S::zero();
            let mut diff = na.clone();
            diff.zip_mut_with(&nb, |x, y| *x = *x - *y);
            for v in diff.iter() {
                stage += *v * *v;
            }
            total += stage / denom;
            if with_grad {
                // d/d(na) = 2 diff / denom, then through the normalization
                let mut gn = diff;
                let two = S::from_f(2.0);
                gn.mapv_inplace(|v| v * two / denom);
                stage_grads.push(normalize_backward(fa, &na, &ra, &gn));
            }
            let _ = c;
        }

        if with_grad {
            let gin3 = self.net.backward(stage_grads);
            Ok((total, Some(collapse3(&gin3, c_in))))
        } else {
            Ok((total, None))
        }
    }
}

fn replicate3<S: Scalar>(x: &Array4<S>) -> Array4<S> {
    let (b, c, h, w) = x.dim();
    if c == 3 {
        return x.clone();
    }
    let mut out = Array4::<S>::zeros((b, 3, h, w));
    for ci in 0..3 {
        out.index_axis_mut(Axis(1), ci).assign(&x.index_axis(Axis(1), 0));
    }
    out
}

fn collapse3<S: Scalar>(g: &Array4<S>, c_in: usize) -> Array4<S> {
    let (b, _c, h, w) = g.dim();
    if c_in == 3 {
        return g.clone();
    }
    let mut out = Array4::<S>::zeros((b, 1, h, w));
    for ci in 0..3 {
        out.index_axis_mut(Axis(1), 0)
            .zip_mut_with(&g.index_axis(Axis(1), ci), |a, b| *a = *a + *b);
    }
    out
}

/// f / sqrt(sum_c f^2 + eps) per spatial position; also returns the
/// reciprocal norms for the backward pass.
fn unit_normalize<S: Scalar>(f: &Array4<S>) -> (Array4<S>, Array4<S>) {
    let (b, c, h, w) = f.dim();
    let eps = S::from_f(NORM_EPS);
    let mut r = Array4::<S>::zeros((b, 1, h, w));
    for bi in 0..b {
        for y in 0..h {
            for x in 0..w {
                let mut s = S::zero();
                for ci in 0..c {
                    let v = f[(bi, ci, y, x)];
                    s += v * v;
                }
                r[(bi, 0, y, x)] = S::one() / (s + eps).sqrt();
            }
        }
    }
    let mut n = f.clone();
    for ci in 0..c {
        n.index_axis_mut(Axis(1), ci)
            .zip_mut_with(&r.index_axis(Axis(1), 0), |v, rr| *v = *v * *rr);
    }
    (n, r)
}

/// VJP of unit_normalize: gf = r * gn - f * r^3 * sum_c(f * gn).
fn normalize_backward<S: Scalar>(
    f: &Array4<S>,
    _n: &Array4<S>,
    r: &Array4<S>,
    gn: &Array4<S>,
) -> Array4<S> {
    let (b, c, h, w) = f.dim();
    let mut dot = Array4::<S>::zeros((b, 1, h, w));
    for bi in 0..b {
        for y in 0..h {
            for x in 0..w {
                let mut s = S::zero();
                for ci in 0..c {
                    s += f[(bi, ci, y, x)] * gn[(bi, ci, y, x)];
                }
                dot[(bi, 0, y, x)] = s;
            }
        }
    }
    let mut gf = Array4::<S>::zeros((b, c, h, w));
    for bi in 0..b {
        for y in 0..h {
            for x in 0..w {
                let rr = r[(bi, 0, y, x)];
                let d = dot[(bi, 0, y, x)];
                for ci in 0..c {
                    gf[(bi, ci, y, x)] =
                        rr * gn[(bi, ci, y, x)] - f[(bi, ci, y, x)] * rr * rr * rr * d;
                }
            }
        }
    }
    gf
}
