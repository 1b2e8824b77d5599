//! 2-D convolution via im2col + GEMM, with hand-written backward.
//!
//! Batch images are processed independently (rayon) and per-image partial
//! weight gradients are reduced in batch order, so results are bitwise
//! deterministic for any worker count.

use ndarray::{linalg::general_mat_mul, Array2, Array4, ArrayD, Axis};
use rayon::prelude::*;

use super::init;
use super::param::Param;
use super::rng::Rng;
use super::scalar::Scalar;
use crate::lora::LoraAdapter;

#[derive(Debug, Clone)]
pub struct Conv2d<S: Scalar> {
    pub weight: Param<S>, // (cout, cin, k, k)
    pub bias: Param<S>,   // (cout)
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub lora: Option<LoraAdapter<S>>,
    cache: Option<Cache<S>>,
}

#[derive(Debug, Clone)]
struct Cache<S> {
    cols: Vec<Array2<S>>, // per image: (cin*k*k, ho*wo)
    in_hw: (usize, usize),
    out_hw: (usize, usize),
}

impl<S: Scalar> Conv2d<S> {
    pub fn new(
        name: &str,
        rng: &mut Rng,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    ) -> Self {
        super::tune_allocator();
        let fan_in = cin * kernel * kernel;
        let weight = Param::new(
            format!("{name}.weight"),
            init::he_normal(rng, &[cout, cin, kernel, kernel], fan_in),
        );
        let bias = Param::new(format!("{name}.bias"), init::zeros(&[cout]));
        Conv2d { weight, bias, cin, cout, kernel, stride, pad, lora: None, cache: None }
    }

    /// All-zero weights and bias: the projection contributes nothing until
    /// trained.
    pub fn zero_init(name: &str, cin: usize, cout: usize, kernel: usize) -> Self {
        let pad = kernel / 2;
        let weight =
            Param::new(format!("{name}.weight"), init::zeros(&[cout, cin, kernel, kernel]));
        let bias = Param::new(format!("{name}.bias"), init::zeros(&[cout]));
        Conv2d { weight, bias, cin, cout, kernel, stride: 1, pad, lora: None, cache: None }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let ho = (h + 2 * self.pad - self.kernel) / self.stride + 1;
        let wo = (w + 2 * self.pad - self.kernel) / self.stride + 1;
        (ho, wo)
    }

    /// Flattened (cout, cin*k*k) weight including any LoRA delta.
    fn effective_weight2(&self) -> Array2<S> {
        let ckk = self.cin * self.kernel * self.kernel;
        let w2 = self
            .weight
            .value
            .view()
            .into_shape_with_order((self.cout, ckk))
            .expect("conv weight layout")
            .to_owned();
        match &self.lora {
            None => w2,
            Some(ad) => {
                if ad.b_is_zero() {
                    w2
                } else {
                    let mut out = w2;
                    let delta = ad.delta(); // (d_out, d_in)
                    out.zip_mut_with(&delta, |w, d| *w = *w + *d);
                    out
                }
            }
        }
    }

    pub fn forward(&mut self, x: &Array4<S>, train: bool) -> Array4<S> {
        self.cache = None; // release last step's buffers before allocating new ones
        let (b, cin, h, w) = x.dim();
        assert_eq!(cin, self.cin, "conv {} expects {} input channels, got {cin}", self.weight.name, self.cin);
        let (ho, wo) = self.out_hw(h, w);
        let w2 = self.effective_weight2();
        let bias = &self.bias.value;

        let mut y = Array4::<S>::zeros((b, self.cout, ho, wo));
        let cols_cache: Vec<Array2<S>> = y
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .map(|(bi, yi)| {
                let cols =
                    im2col(&x.index_axis(Axis(0), bi), self.kernel, self.stride, self.pad, ho, wo);
                let mut y2 = yi.into_shape_with_order((self.cout, ho * wo)).unwrap();
                general_mat_mul(S::one(), &w2, &cols, S::zero(), &mut y2);
                for (c, &bv) in bias.iter().enumerate() {
                    for v in y2.row_mut(c).as_slice_mut().unwrap() {
                        *v += bv;
                    }
                }
                cols
            })
            .collect();

        self.cache = if train {
            Some(Cache { cols: cols_cache, in_hw: (h, w), out_hw: (ho, wo) })
        } else {
            None
        };
        y
    }

    /// Propagates gradients; accumulates into weight/bias/adapter grads.
    pub fn backward(&mut self, gy: &Array4<S>) -> Array4<S> {
        let cache = self.cache.take().expect("conv backward without forward(train)");
        let (b, cout, ho, wo) = gy.dim();
        assert_eq!(cout, self.cout);
        assert_eq!((ho, wo), cache.out_hw);
        let (h, w) = cache.in_hw;
        let ckk = self.cin * self.kernel * self.kernel;
        let w2 = self.effective_weight2();
        // Small transposes are materialized so every GEMM runs on row-major
        // operands; transposed views of the big cols buffers thrash caches.
        let w2t = w2.t().to_owned();
        let need_dw = self.weight.trainable || self.lora.is_some();
        let (cin, kernel, stride, pad) = (self.cin, self.kernel, self.stride, self.pad);

        // One fused parallel pass per image: dcols GEMM feeds col2im while
        // still cache-hot, then the per-image dW GEMM.
        let mut gx = Array4::<S>::zeros((b, cin, h, w));
        let per_image: Vec<(Option<Array2<S>>, [S; 1])> = gx
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .map(|(bi, mut gxi)| {
                let gy2 = gy
                    .index_axis(Axis(0), bi)
                    .into_shape_with_order((cout, ho * wo))
                    .unwrap();
                // dX columns = W^T . dY
                let mut dcols = Array2::<S>::zeros((ckk, ho * wo));
                general_mat_mul(S::one(), &w2t, &gy2, S::zero(), &mut dcols);
                col2im_into(&dcols, cin, kernel, stride, pad, h, w, ho, wo, &mut gxi);
                drop(dcols);
                let dw = if need_dw {
                    let mut gy2t = Array2::<S>::zeros((ho * wo, cout));
                    gy2t.assign(&gy2.t());
                    let mut dwt = Array2::<S>::zeros((ckk, cout));
                    general_mat_mul(S::one(), &cache.cols[bi], &gy2t, S::zero(), &mut dwt);
                    let mut dw = Array2::<S>::zeros((cout, ckk));
                    dw.assign(&dwt.t());
                    Some(dw)
                } else {
                    None
                };
                (dw, [S::zero(); 1])
            })
            .collect();

        // Reduce in batch order for determinism.
        let mut dw_total: Option<Array2<S>> = None;
        for (dw, _) in per_image {
            if let Some(dw) = dw {
                match &mut dw_total {
                    None => dw_total = Some(dw),
                    Some(acc) => acc.zip_mut_with(&dw, |a, d| *a = *a + *d),
                }
            }
        }

        if let Some(dw_eff) = dw_total {
            if let Some(ad) = &mut self.lora {
                ad.accumulate_grads(&dw_eff);
            }
            if self.weight.trainable {
                let dw_dyn: ArrayD<S> = dw_eff
                    .into_shape_with_order((self.cout, self.cin, self.kernel, self.kernel))
                    .unwrap()
                    .into_dyn();
                self.weight.grad.zip_mut_with(&dw_dyn, |g, d| *g = *g + *d);
            }
        }
        if self.bias.trainable {
            for c in 0..cout {
                let mut s = S::zero();
                for bi in 0..b {
                    let plane = gy.slice(ndarray::s![bi, c, .., ..]);
                    for v in plane.as_slice().expect("contiguous gy plane") {
                        s += *v;
                    }
                }
                self.bias.grad[c] += s;
            }
        }
        gx
    }

    pub fn visit_params(&self, f: &mut dyn FnMut(&Param<S>)) {
        f(&self.weight);
        f(&self.bias);
        if let Some(ad) = &self.lora {
            ad.visit_params(f);
        }
    }

    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<S>)) {
        f(&mut self.weight);
        f(&mut self.bias);
        if let Some(ad) = &mut self.lora {
            ad.visit_params_mut(f);
        }
    }

    pub fn d_in(&self) -> usize {
        self.cin * self.kernel * self.kernel
    }

    pub fn d_out(&self) -> usize {
        self.cout
    }
}

impl<S: Scalar> super::param::Module<S> for Conv2d<S> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<S>)) {
        Conv2d::visit_params(self, f);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<S>)) {
        Conv2d::visit_params_mut(self, f);
    }
}

impl<S: Scalar> crate::lora::AdaptSite<S> for Conv2d<S> {
    fn site_name(&self) -> &str {
        &self.weight.name
    }

    fn site_dims(&self) -> (usize, usize) {
        (self.d_in(), self.d_out())
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

    fn fold_delta(&mut self, delta: &ndarray::Array2<S>) {
        let ckk = self.cin * self.kernel * self.kernel;
        let mut w2 = self
            .weight
            .value
            .view_mut()
            .into_shape_with_order((self.cout, ckk))
            .expect("conv weight layout");
        w2.zip_mut_with(delta, |w, d| *w = *w + *d);
    }

    fn set_base_trainable(&mut self, trainable: bool) {
        self.weight.trainable = trainable;
        self.bias.trainable = trainable;
    }
}

/// Unfold one image (c, h, w) into (c*k*k, ho*wo) patch columns.
fn im2col<S: Scalar>(
    img: &ndarray::ArrayView3<S>,
    k: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
) -> Array2<S> {
    let (c, h, w) = img.dim();
    let mut cols = Array2::<S>::zeros((c * k * k, ho * wo));
    let img_slice = img.as_slice().expect("contiguous image");
    let cols_slice = cols.as_slice_mut().expect("contiguous cols");
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k * k + ky * k + kx) * (ho * wo);
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    let out_base = row + oy * wo;
                    if iy < 0 || iy >= h as isize {
                        continue; // already zero
                    }
                    let in_base = ci * h * w + iy as usize * w;
                    if stride == 1 {
                        // contiguous span: ix = ox + kx - pad for ox in 0..wo
                        let off = kx as isize - pad as isize;
                        let ox_start = (-off).max(0) as usize;
                        let ox_end = (w as isize - off).min(wo as isize).max(0) as usize;
                        if ox_start < ox_end {
                            let src = in_base + (ox_start as isize + off) as usize;
                            cols_slice[out_base + ox_start..out_base + ox_end]
                                .copy_from_slice(&img_slice[src..src + (ox_end - ox_start)]);
                        }
                    } else {
                        for ox in 0..wo {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix >= 0 && ix < w as isize {
                                cols_slice[out_base + ox] = img_slice[in_base + ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Fold patch-column gradients back onto the input image (scatter-add).
#[allow(clippy::too_many_arguments)]
fn col2im_into<S: Scalar>(
    dcols: &Array2<S>,
    c: usize,
    k: usize,
    stride: usize,
    pad: usize,
    h: usize,
    w: usize,
    ho: usize,
    wo: usize,
    img: &mut ndarray::ArrayViewMut3<S>,
) {
    let img_slice = img.as_slice_mut().expect("contiguous image");
    let d = dcols.as_slice().expect("contiguous cols");
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k * k + ky * k + kx) * (ho * wo);
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let in_base = ci * h * w + iy as usize * w;
                    let out_base = row + oy * wo;
                    for ox in 0..wo {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            img_slice[in_base + ix as usize] += d[out_base + ox];
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck;
    use crate::nn::rng::rng_from_seed;

    fn rand_input(shape: (usize, usize, usize, usize), seed: u64) -> Array4<f64> {
        let mut rng = rng_from_seed(seed);
        Array4::from_shape_simple_fn(shape, || f64::standard_normal(&mut rng))
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        for (stride, pad, hw) in [(1usize, 1usize, 6usize), (2, 1, 8)] {
            let mut rng = rng_from_seed(11);
            let mut conv = Conv2d::<f64>::new("conv", &mut rng, 3, 4, 3, stride, pad);
            let x = rand_input((2, 3, hw, hw), 5);
            let y = conv.forward(&x, true);
            let w = gradcheck::readout_weights::<f64>(&[2, 4, y.dim().2, y.dim().3], 9);
            let gy = w.clone().into_dimensionality::<ndarray::Ix4>().unwrap();
            let gx = conv.backward(&gy);

            let params = vec![("conv.weight".to_string(), 8), ("conv.bias".to_string(), 2)];
            let checks = gradcheck::check_params(
                &mut conv,
                |m| gradcheck::weighted_sum(&m.forward(&x, false), &w),
                &params,
                1e-5,
                42,
            );
            assert!(gradcheck::max_rel_err(&checks) < 1e-6, "{checks:?}");

            // input gradient via direct perturbation
            let mut xp = x.clone();
            for &(bi, ci, yi, xi) in &[(0usize, 0usize, 0usize, 0usize), (1, 2, hw - 1, 3)] {
                let h = 1e-5;
                xp[(bi, ci, yi, xi)] += h;
                let fp = gradcheck::weighted_sum(&conv.forward(&xp, false), &w);
                xp[(bi, ci, yi, xi)] -= 2.0 * h;
                let fm = gradcheck::weighted_sum(&conv.forward(&xp, false), &w);
                xp[(bi, ci, yi, xi)] += h;
                let numeric = (fp - fm) / (2.0 * h);
                assert!(
                    gradcheck::rel_err(gx[(bi, ci, yi, xi)], numeric) < 1e-6,
                    "input grad mismatch at {:?}",
                    (bi, ci, yi, xi)
                );
            }
        }
    }

    #[test]
    fn zero_init_conv_outputs_zero() {
        let mut conv = Conv2d::<f32>::zero_init("proj", 4, 4, 1);
        let mut rng = rng_from_seed(3);
        let x = Array4::from_shape_simple_fn((1, 4, 5, 5), || f32::standard_normal(&mut rng));
        let y = conv.forward(&x, false);
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn lora_adapted_conv_matches_dense_delta() {
        let mut rng = rng_from_seed(17);
        let mut conv = Conv2d::<f64>::new("c", &mut rng, 2, 3, 3, 1, 1);
        let x = rand_input((1, 2, 5, 5), 23);
        let base = conv.forward(&x, false);
        let mut ad = crate::lora::LoraAdapter::<f64>::new("c.weight", 7, 18, 3, 2, 2.0);
        // push B away from zero so the adapter actually contributes
        ad.b.value.mapv_inplace(|_| 0.3);
        conv.lora = Some(ad);
        let adapted = conv.forward(&x, false);
        let delta = conv.lora.as_ref().unwrap().delta();
        crate::lora::AdaptSite::fold_delta(&mut conv, &delta);
        conv.lora = None;
        let merged = conv.forward(&x, false);
        let mut max = 0.0f64;
        for (a, b) in adapted.iter().zip(merged.iter()) {
            max = max.max((a - b).abs());
        }
        assert!(max < 1e-12, "merge mismatch {max}");
        assert!(adapted.iter().zip(base.iter()).any(|(a, b)| (a - b).abs() > 1e-6));
    }
}
