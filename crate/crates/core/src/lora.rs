//! Low-rank adaptation of linear and convolutional transforms.
//!
//! An adapter holds factors A (r, d_in) and B (d_out, r); the adapted
//! transform computes base(x) + (alpha/r) * B(A(x)). B starts at zero, so a
//! freshly injected model is bitwise identical to its base.

use ndarray::{linalg::general_mat_mul, Array2};

use crate::error::{Error, Result};
use crate::nn::init;
use crate::nn::param::Param;
use crate::nn::rng::derive_rng;
use crate::nn::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct LoraAdapter<S: Scalar> {
    pub a: Param<S>, // (rank, d_in)
    pub b: Param<S>, // (d_out, rank)
    pub rank: usize,
    pub alpha: f64,
}

impl<S: Scalar> LoraAdapter<S> {
    pub fn new(site: &str, seed: u64, d_in: usize, d_out: usize, rank: usize, alpha: f64) -> Self {
        assert!(rank >= 1, "lora rank must be >= 1");
        let mut rng = derive_rng(seed, "lora-init", &[site]);
        // A ~ N(0, 1/r), B = 0: identity at init with nonzero gradient.
        let std = S::from_f((1.0 / rank as f64).sqrt());
        let a = Param::new(format!("{site}.lora_a"), init::gaussian(&mut rng, &[rank, d_in], std));
        let b = Param::new(format!("{site}.lora_b"), init::zeros(&[d_out, rank]));
        LoraAdapter { a, b, rank, alpha }
    }

    pub fn scale(&self) -> S {
        S::from_f(self.alpha / self.rank as f64)
    }

    pub fn b_is_zero(&self) -> bool {
        self.b.value.iter().all(|v| *v == S::zero())
    }

    /// scale * B . A as a dense (d_out, d_in) matrix.
    pub fn delta(&self) -> Array2<S> {
        let a2 = self.a.value.view().into_dimensionality::<ndarray::Ix2>().unwrap();
        let b2 = self.b.value.view().into_dimensionality::<ndarray::Ix2>().unwrap();
        let (d_out, _) = b2.dim();
        let (_, d_in) = a2.dim();
        let mut d = Array2::<S>::zeros((d_out, d_in));
        general_mat_mul(self.scale(), &b2, &a2, S::zero(), &mut d);
        d
    }

    /// Given the gradient of the loss w.r.t. the effective (base + delta)
    /// weight, accumulate gradients for A and B.
    pub fn accumulate_grads(&mut self, dw_eff: &Array2<S>) {
        let a2 = self.a.value.view().into_dimensionality::<ndarray::Ix2>().unwrap();
        let b2 = self.b.value.view().into_dimensionality::<ndarray::Ix2>().unwrap();
        let s = self.scale();
        // dB = s . dW . A^T, dA = s . B^T . dW
        let mut db = Array2::<S>::zeros(b2.dim());
        general_mat_mul(s, dw_eff, &a2.t(), S::zero(), &mut db);
        let mut da = Array2::<S>::zeros(a2.dim());
        general_mat_mul(s, &b2.t(), dw_eff, S::zero(), &mut da);
        self.b.grad.zip_mut_with(&db.into_dyn(), |g, d| *g = *g + *d);
        self.a.grad.zip_mut_with(&da.into_dyn(), |g, d| *g = *g + *d);
    }

    pub fn param_count(&self) -> usize {
        self.a.len() + self.b.len()
    }

    pub fn visit_params(&self, f: &mut dyn FnMut(&Param<S>)) {
        f(&self.a);
        f(&self.b);
    }

    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<S>)) {
        f(&mut self.a);
        f(&mut self.b);
    }
}

/// A transform that can host an adapter: linear layers and convolutions.
pub trait AdaptSite<S: Scalar> {
    /// Stable site name (the base weight's parameter path).
    fn site_name(&self) -> &str;
    /// (d_in, d_out) of the flattened transform.
    fn site_dims(&self) -> (usize, usize);
    fn adapter(&self) -> Option<&LoraAdapter<S>>;
    fn attach(&mut self, adapter: LoraAdapter<S>);
    /// Remove the adapter, returning it.
    fn detach(&mut self) -> Option<LoraAdapter<S>>;
    /// Fold a dense (d_out, d_in) delta into the base weight.
    fn fold_delta(&mut self, delta: &Array2<S>);
    fn set_base_trainable(&mut self, trainable: bool);
}

/// A model exposing its adaptable transforms.
pub trait Adaptable<S: Scalar> {
    fn visit_sites(&mut self, f: &mut dyn FnMut(&mut dyn AdaptSite<S>));
}

/// Attach adapters to every site whose name contains any of the selector's
/// comma-separated patterns. Base weights freeze; only A/B stay trainable.
/// Returns the number of adapted sites.
pub fn inject<S: Scalar, M: Adaptable<S> + ?Sized>(
    model: &mut M,
    selector: &str,
    rank: usize,
    alpha: f64,
    seed: u64,
) -> Result<usize> {
    let patterns: Vec<&str> =
        selector.split(',').map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    let mut n = 0usize;
    model.visit_sites(&mut |site| {
        if patterns.iter().any(|p| site.site_name().contains(p)) {
            let (d_in, d_out) = site.site_dims();
            let name = site.site_name().to_string();
            site.attach(LoraAdapter::new(&name, seed, d_in, d_out, rank, alpha));
            site.set_base_trainable(false);
            n += 1;
        }
    });
    if n == 0 {
        return Err(Error::NoMatch { selector: selector.to_string() });
    }
    Ok(n)
}

/// Fold every adapter into its base weight and remove it. The merged model
/// computes the same function as the adapted one (within float tolerance).
pub fn merge<S: Scalar, M: Adaptable<S> + ?Sized>(model: &mut M) -> Result<usize> {
    let mut n = 0usize;
    model.visit_sites(&mut |site| {
        if site.adapter().is_some() {
            let ad = site.detach().unwrap();
            let delta = ad.delta();
            site.fold_delta(&delta);
            site.set_base_trainable(true);
            n += 1;
        }
    });
    if n == 0 {
        return Err(Error::AdaptersAbsent);
    }
    Ok(n)
}

/// Expected parameter growth for adapters of the given rank over sites.
pub fn expected_param_increase(rank: usize, dims: &[(usize, usize)]) -> usize {
    dims.iter().map(|&(d_in, d_out)| rank * (d_in + d_out)).sum()
}
