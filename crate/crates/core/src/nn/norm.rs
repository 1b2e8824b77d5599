//! Group and layer normalization with affine parameters.

use ndarray::{Array3, Array4, Axis};

use super::init;
use super::param::Param;
use super::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct GroupNorm<S: Scalar> {
    pub gamma: Param<S>, // (C)
    pub beta: Param<S>,  // (C)
    pub groups: usize,
    pub eps: f64,
    cache: Option<GnCache<S>>,
}

#[derive(Debug, Clone)]
struct GnCache<S> {
    xhat: Array4<S>,
    inv_std: ndarray::Array2<S>, // (B, groups)
}

impl<S: Scalar> GroupNorm<S> {
    pub fn new(name: &str, channels: usize, groups: usize) -> Self {
        assert!(channels % groups == 0, "channels {channels} not divisible by groups {groups}");
        GroupNorm {
            gamma: Param::new(format!("{name}.gamma"), init::ones(&[channels])),
            beta: Param::new(format!("{name}.beta"), init::zeros(&[channels])),
            groups,
            eps: 1e-5,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Array4<S>, train: bool) -> Array4<S> {
        self.cache = None;
        let (b, c, h, w) = x.dim();
        let cg = c / self.groups;
        let n = S::from_f((cg * h * w) as f64);
        let eps = S::from_f(self.eps);
        let mut xhat = x.clone();
        let mut inv_std = ndarray::Array2::<S>::zeros((b, self.groups));
        for bi in 0..b {
            for g in 0..self.groups {
                let mut slab = xhat.slice_mut(ndarray::s![bi, g * cg..(g + 1) * cg, .., ..]);
                let mut mean = S::zero();
                for v in slab.iter() {
                    mean += *v;
                }
                mean /= n;
                let mut var = S::zero();
                for v in slab.iter() {
                    let d = *v - mean;
                    var += d * d;
                }
                var /= n;
                let istd = S::one() / (var + eps).sqrt();
                inv_std[(bi, g)] = istd;
                slab.mapv_inplace(|v| (v - mean) * istd);
            }
        }
        let mut y = xhat.clone();
        for ci in 0..c {
            let gamma = self.gamma.value[ci];
            let beta = self.beta.value[ci];
            y.index_axis_mut(Axis(1), ci).mapv_inplace(|v| v * gamma + beta);
        }
        self.cache = train.then_some(GnCache { xhat, inv_std });
        y
    }

    pub fn backward(&mut self, gy: &Array4<S>) -> Array4<S> {
        let cache = self.cache.take().expect("groupnorm backward without forward(train)");
        let (b, c, h, w) = gy.dim();
        let cg = c / self.groups;
        let n = S::from_f((cg * h * w) as f64);

        if self.gamma.trainable {
            for ci in 0..c {
                let mut dg = S::zero();
                let mut db = S::zero();
                for bi in 0..b {
                    let gslab = gy.slice(ndarray::s![bi, ci, .., ..]);
                    let xslab = cache.xhat.slice(ndarray::s![bi, ci, .., ..]);
                    for (g, x) in gslab.iter().zip(xslab.iter()) {
                        dg += *g * *x;
                        db += *g;
                    }
                }
                self.gamma.grad[ci] += dg;
                self.beta.grad[ci] += db;
            }
        }

        let mut gx = Array4::<S>::zeros((b, c, h, w));
        for bi in 0..b {
            for g in 0..self.groups {
                let istd = cache.inv_std[(bi, g)];
                // dxhat = gy * gamma (per channel)
                let mut sum_dxhat = S::zero();
                let mut sum_dxhat_xhat = S::zero();
                for ci in g * cg..(g + 1) * cg {
                    let gamma = self.gamma.value[ci];
                    let gslab = gy.slice(ndarray::s![bi, ci, .., ..]);
                    let xslab = cache.xhat.slice(ndarray::s![bi, ci, .., ..]);
                    for (gv, xv) in gslab.iter().zip(xslab.iter()) {
                        let dxh = *gv * gamma;
                        sum_dxhat += dxh;
                        sum_dxhat_xhat += dxh * *xv;
                    }
                }
                for ci in g * cg..(g + 1) * cg {
                    let gamma = self.gamma.value[ci];
                    let gslab = gy.slice(ndarray::s![bi, ci, .., ..]);
                    let xslab = cache.xhat.slice(ndarray::s![bi, ci, .., ..]);
                    let mut out = gx.slice_mut(ndarray::s![bi, ci, .., ..]);
                    ndarray::Zip::from(&mut out).and(&gslab).and(&xslab).for_each(
                        |o, gv, xv| {
                            let dxh = *gv * gamma;
                            *o = istd * (dxh - sum_dxhat / n - *xv * sum_dxhat_xhat / n);
                        },
                    );
                }
            }
        }
        gx
    }

    pub fn visit_params(&self, f: &mut dyn FnMut(&Param<S>)) {
        f(&self.gamma);
        f(&self.beta);
    }

    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<S>)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }
}

impl<S: Scalar> super::param::Module<S> for GroupNorm<S> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<S>)) {
        GroupNorm::visit_params(self, f);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<S>)) {
        GroupNorm::visit_params_mut(self, f);
    }
}

/// LayerNorm over the channel (last) axis of (B, T, C) token tensors.
#[derive(Debug, Clone)]
pub struct LayerNorm<S: Scalar> {
    pub gamma: Param<S>,
    pub beta: Param<S>,
    pub eps: f64,
    cache: Option<LnCache<S>>,
}

#[derive(Debug, Clone)]
struct LnCache<S> {
    xhat: Array3<S>,
    inv_std: ndarray::Array2<S>, // (B, T)
}

impl<S: Scalar> LayerNorm<S> {
    pub fn new(name: &str, channels: usize) -> Self {
        LayerNorm {
            gamma: Param::new(format!("{name}.gamma"), init::ones(&[channels])),
            beta: Param::new(format!("{name}.beta"), init::zeros(&[channels])),
            eps: 1e-5,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Array3<S>, train: bool) -> Array3<S> {
        self.cache = None;
        let (b, t, c) = x.dim();
        let n = S::from_f(c as f64);
        let eps = S::from_f(self.eps);
        let mut xhat = x.clone();
        let mut inv_std = ndarray::Array2::<S>::zeros((b, t));
        for bi in 0..b {
            for ti in 0..t {
                let mut row = xhat.slice_mut(ndarray::s![bi, ti, ..]);
                let mut mean = S::zero();
                for v in row.iter() {
                    mean += *v;
                }
                mean /= n;
                let mut var = S::zero();
                for v in row.iter() {
                    let d = *v - mean;
                    var += d * d;
                }
                var /= n;
                let istd = S::one() / (var + eps).sqrt();
                inv_std[(bi, ti)] = istd;
                row.mapv_inplace(|v| (v - mean) * istd);
            }
        }
        let mut y = xhat.clone();
        for bi in 0..b {
            for ti in 0..t {
                let mut row = y.slice_mut(ndarray::s![bi, ti, ..]);
                for (ci, v) in row.iter_mut().enumerate() {
                    *v = *v * self.gamma.value[ci] + self.beta.value[ci];
                }
            }
        }
        self.cache = train.then_some(LnCache { xhat, inv_std });
        y
    }

    pub fn backward(&mut self, gy: &Array3<S>) -> Array3<S> {
        let cache = self.cache.take().expect("layernorm backward without forward(train)");
        let (b, t, c) = gy.dim();
        let n = S::from_f(c as f64);
        let mut gx = Array3::<S>::zeros((b, t, c));
        let mut dgamma = vec![S::zero(); c];
        let mut dbeta = vec![S::zero(); c];
        for bi in 0..b {
            for ti in 0..t {
                let grow = gy.slice(ndarray::s![bi, ti, ..]);
                let xrow = cache.xhat.slice(ndarray::s![bi, ti, ..]);
                let istd = cache.inv_std[(bi, ti)];
                let mut sum_dxhat = S::zero();
                let mut sum_dxhat_xhat = S::zero();
                for ci in 0..c {
                    let dxh = grow[ci] * self.gamma.value[ci];
                    sum_dxhat += dxh;
                    sum_dxhat_xhat += dxh * xrow[ci];
                    dgamma[ci] += grow[ci] * xrow[ci];
                    dbeta[ci] += grow[ci];
                }
                let mut orow = gx.slice_mut(ndarray::s![bi, ti, ..]);
                for ci in 0..c {
                    let dxh = grow[ci] * self.gamma.value[ci];
                    orow[ci] = istd * (dxh - sum_dxhat / n - xrow[ci] * sum_dxhat_xhat / n);
                }
            }
        }
        if self.gamma.trainable {
            for ci in 0..c {
                self.gamma.grad[ci] += dgamma[ci];
                self.beta.grad[ci] += dbeta[ci];
            }
        }
        gx
    }

    pub fn visit_params(&self, f: &mut dyn FnMut(&Param<S>)) {
        f(&self.gamma);
        f(&self.beta);
    }

    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<S>)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }
}

impl<S: Scalar> super::param::Module<S> for LayerNorm<S> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<S>)) {
        LayerNorm::visit_params(self, f);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<S>)) {
        LayerNorm::visit_params_mut(self, f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck;
    use crate::nn::param::Module as _;
    use crate::nn::rng::rng_from_seed;

    #[test]
    fn groupnorm_gradients_match_finite_differences() {
        let mut rng = rng_from_seed(5);
        let mut gn = GroupNorm::<f64>::new("gn", 8, 4);
        // non-trivial affine params
        gn.gamma.value.mapv_inplace(|_| 0.7);
        gn.beta.value.mapv_inplace(|_| -0.2);
        let x = Array4::from_shape_simple_fn((2, 8, 4, 4), || f64::standard_normal(&mut rng));
        let _ = gn.forward(&x, true);
        let w = gradcheck::readout_weights::<f64>(&[2, 8, 4, 4], 6);
        let gy = w.clone().into_dimensionality::<ndarray::Ix4>().unwrap();
        let gx = gn.backward(&gy);

        let params = vec![("gn.gamma".to_string(), 4), ("gn.beta".to_string(), 4)];
        let checks = gradcheck::check_params(
            &mut gn,
            |m| gradcheck::weighted_sum(&m.forward(&x, false), &w),
            &params,
            1e-6,
            42,
        );
        assert!(gradcheck::max_rel_err(&checks) < 1e-5, "{checks:?}");

        let mut xp = x.clone();
        let h = 1e-6;
        xp[(0, 3, 1, 2)] += h;
        let fp = gradcheck::weighted_sum(&gn.forward(&xp, false), &w);
        xp[(0, 3, 1, 2)] -= 2.0 * h;
        let fm = gradcheck::weighted_sum(&gn.forward(&xp, false), &w);
        let numeric = (fp - fm) / (2.0 * h);
        assert!(gradcheck::rel_err(gx[(0, 3, 1, 2)], numeric) < 1e-5);
    }

    #[test]
    fn layernorm_gradients_match_finite_differences() {
        let mut rng = rng_from_seed(8);
        let mut ln = LayerNorm::<f64>::new("ln", 8);
        ln.gamma.value.mapv_inplace(|_| 1.3);
        let x = Array3::from_shape_simple_fn((2, 5, 8), || f64::standard_normal(&mut rng));
        let _ = ln.forward(&x, true);
        let w = gradcheck::readout_weights::<f64>(&[2, 5, 8], 3);
        let gy = w.clone().into_dimensionality::<ndarray::Ix3>().unwrap();
        let gx = ln.backward(&gy);

        let params = vec![("ln.gamma".to_string(), 4), ("ln.beta".to_string(), 4)];
        let checks = gradcheck::check_params(
            &mut ln,
            |m| gradcheck::weighted_sum(&m.forward(&x, false), &w),
            &params,
            1e-6,
            42,
        );
        assert!(gradcheck::max_rel_err(&checks) < 1e-5, "{checks:?}");

        let mut xp = x.clone();
        let h = 1e-6;
        xp[(1, 4, 6)] += h;
        let fp = gradcheck::weighted_sum(&ln.forward(&xp, false), &w);
        xp[(1, 4, 6)] -= 2.0 * h;
        let fm = gradcheck::weighted_sum(&ln.forward(&xp, false), &w);
        let numeric = (fp - fm) / (2.0 * h);
        assert!(gradcheck::rel_err(gx[(1, 4, 6)], numeric) < 1e-5);
    }
}
