//! Dense layer over token tensors (B, T, C).

use ndarray::{linalg::general_mat_mul, Array2, Array3};

use super::init;
use super::param::Param;
use super::rng::Rng;
use super::scalar::Scalar;
use crate::lora::LoraAdapter;

#[derive(Debug, Clone)]
pub struct Linear<S: Scalar> {
    pub weight: Param<S>, // (d_out, d_in)
    pub bias: Option<Param<S>>,
    pub d_in: usize,
    pub d_out: usize,
    pub lora: Option<LoraAdapter<S>>,
    cache_x: Option<Array2<S>>, // (B*T, d_in)
}

impl<S: Scalar> Linear<S> {
    pub fn new(name: &str, rng: &mut Rng, d_in: usize, d_out: usize, bias: bool) -> Self {
        let weight =
            Param::new(format!("{name}.weight"), init::he_normal(rng, &[d_out, d_in], d_in));
        let bias = bias.then(|| Param::new(format!("{name}.bias"), init::zeros(&[d_out])));
        Linear { weight, bias, d_in, d_out, lora: None, cache_x: None }
    }

    fn effective_weight(&self) -> Array2<S> {
        let w = self
            .weight
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .unwrap()
            .to_owned();
        match &self.lora {
            None => w,
            Some(ad) => {
                if ad.b_is_zero() {
                    w
                } else {
                    let mut out = w;
                    out.zip_mut_with(&ad.delta(), |a, d| *a = *a + *d);
                    out
                }
            }
        }
    }

    pub fn forward(&mut self, x: &Array3<S>, train: bool) -> Array3<S> {
        self.cache_x = None;
        let (b, t, c) = x.dim();
        assert_eq!(c, self.d_in, "linear {} expects d_in {}, got {c}", self.weight.name, self.d_in);
        let x2 = x.view().into_shape_with_order((b * t, c)).unwrap();
        let w = self.effective_weight();
        let mut y2 = Array2::<S>::zeros((b * t, self.d_out));
        general_mat_mul(S::one(), &x2, &w.t(), S::zero(), &mut y2);
        if let Some(bias) = &self.bias {
            for mut row in y2.rows_mut() {
                for (v, &bv) in row.iter_mut().zip(bias.value.iter()) {
                    *v = *v + bv;
                }
            }
        }
        if train {
            self.cache_x = Some(x2.to_owned());
        }
        y2.into_shape_with_order((b, t, self.d_out)).unwrap()
    }

    pub fn backward(&mut self, gy: &Array3<S>) -> Array3<S> {
        let x2 = self.cache_x.take().expect("linear backward without forward(train)");
        let (b, t, d_out) = gy.dim();
        let gy2 = gy.view().into_shape_with_order((b * t, d_out)).unwrap();
        let w = self.effective_weight();

        if self.weight.trainable || self.lora.is_some() {
            let mut dw = Array2::<S>::zeros((self.d_out, self.d_in));
            general_mat_mul(S::one(), &gy2.t(), &x2, S::zero(), &mut dw);
            if let Some(ad) = &mut self.lora {
                ad.accumulate_grads(&dw);
            }
            if self.weight.trainable {
                self.weight.grad.zip_mut_with(&dw.into_dyn(), |g, d| *g = *g + *d);
            }
        }
        if let Some(bias) = &mut self.bias {
            if bias.trainable {
                for row in gy2.rows() {
                    for (g, &v) in bias.grad.iter_mut().zip(row.iter()) {
                        *g = *g + v;
                    }
                }
            }
        }
        let mut gx2 = Array2::<S>::zeros((b * t, self.d_in));
        general_mat_mul(S::one(), &gy2, &w, S::zero(), &mut gx2);
        gx2.into_shape_with_order((b, t, self.d_in)).unwrap()
    }

    pub fn visit_params(&self, f: &mut dyn FnMut(&Param<S>)) {
        f(&self.weight);
        if let Some(b) = &self.bias {
            f(b);
        }
        if let Some(ad) = &self.lora {
            ad.visit_params(f);
        }
    }

    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<S>)) {
        f(&mut self.weight);
        if let Some(b) = &mut self.bias {
            f(b);
        }
        if let Some(ad) = &mut self.lora {
            ad.visit_params_mut(f);
        }
    }
}

impl<S: Scalar> super::param::Module<S> for Linear<S> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<S>)) {
        Linear::visit_params(self, f);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<S>)) {
        Linear::visit_params_mut(self, f);
    }
}

impl<S: Scalar> crate::lora::AdaptSite<S> for Linear<S> {
    fn site_name(&self) -> &str {
        &self.weight.name
    }

    fn site_dims(&self) -> (usize, usize) {
        (self.d_in, self.d_out)
    }

    fn adapter(&self) -> Option<&LoraAdapter<S>> {
        self.lora.as_ref()
    }

    fn attach(&mut self, adapter: LoraAdapter<S>) {
        self.lora = Some(adapter);
    }

    fn detach(&mut self) -> Option<LoraAdapter<S>> {
        self.lora.take()
    }

    fn fold_delta(&mut self, delta: &Array2<S>) {
        let mut w = self.weight.value.view_mut().into_dimensionality::<ndarray::Ix2>().unwrap();
        w.zip_mut_with(delta, |a, d| *a = *a + *d);
    }

    fn set_base_trainable(&mut self, trainable: bool) {
        self.weight.trainable = trainable;
        if let Some(b) = &mut self.bias {
            b.trainable = trainable;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck;
    use crate::nn::rng::rng_from_seed;

    #[test]
    fn linear_gradients_match_finite_differences() {
        let mut rng = rng_from_seed(2);
        let mut lin = Linear::<f64>::new("fc", &mut rng, 6, 7, true);
        let x = Array3::from_shape_simple_fn((2, 5, 6), || f64::standard_normal(&mut rng));
        let y = lin.forward(&x, true);
        let w = gradcheck::readout_weights::<f64>(&[2, 5, 7], 4);
        let gy = w.clone().into_dimensionality::<ndarray::Ix3>().unwrap();
        let gx = lin.backward(&gy);
        let _ = y;

        let params = vec![("fc.weight".to_string(), 8), ("fc.bias".to_string(), 3)];
        let checks = gradcheck::check_params(
            &mut lin,
            |m| gradcheck::weighted_sum(&m.forward(&x, false), &w),
            &params,
            1e-5,
            42,
        );
        assert!(gradcheck::max_rel_err(&checks) < 1e-6, "{checks:?}");

        let mut xp = x.clone();
        let h = 1e-5;
        xp[(1, 2, 3)] += h;
        let fp = gradcheck::weighted_sum(&lin.forward(&xp, false), &w);
        xp[(1, 2, 3)] -= 2.0 * h;
        let fm = gradcheck::weighted_sum(&lin.forward(&xp, false), &w);
        let numeric = (fp - fm) / (2.0 * h);
        assert!(gradcheck::rel_err(gx[(1, 2, 3)], numeric) < 1e-6);
    }
}
