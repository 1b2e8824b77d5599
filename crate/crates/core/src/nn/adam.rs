//! Adam optimizer over the module parameter tree.

use std::collections::HashMap;

use ndarray::ArrayD;

use super::param::Module;
use super::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 2e-5, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct Adam<S: Scalar> {
    pub cfg: AdamConfig,
    step: u64,
    state: HashMap<String, (ArrayD<S>, ArrayD<S>)>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(cfg: AdamConfig) -> Self {
        Adam { cfg, step: 0, state: HashMap::new() }
    }

    /// One update over every trainable parameter. Gradients are left
    /// untouched; call `zero_grads` before the next backward pass.
    pub fn step<M: Module<S> + ?Sized>(&mut self, model: &mut M) {
        self.step += 1;
        let t = self.step as i32;
        let b1 = S::from_f(self.cfg.beta1);
        let b2 = S::from_f(self.cfg.beta2);
        let lr = S::from_f(self.cfg.lr);
        let eps = S::from_f(self.cfg.eps);
        let bc1 = S::one() - b1.powi(t);
        let bc2 = S::one() - b2.powi(t);
        let state = &mut self.state;
        model.visit_params_mut(&mut |p| {
            if !p.trainable {
                return;
            }
            let (m, v) = state
                .entry(p.name.clone())
                .or_insert_with(|| (ArrayD::zeros(p.value.raw_dim()), ArrayD::zeros(p.value.raw_dim())));
            ndarray::Zip::from(&mut p.value)
                .and(&p.grad)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = b1 * *m + (S::one() - b1) * g;
                    *v = b2 * *v + (S::one() - b2) * g * g;
                    let mhat = *m / bc1;
                    let vhat = *v / bc2;
                    *w = *w - lr * mhat / (vhat.sqrt() + eps);
                });
        });
    }
}

/// Scale all trainable gradients so their global L2 norm is at most
/// `max_norm`. Returns the pre-clip norm.
pub fn clip_grad_norm<S: Scalar, M: Module<S> + ?Sized>(model: &mut M, max_norm: f64) -> f64 {
    let mut sq = 0.0f64;
    model.visit_params(&mut |p| {
        if p.trainable {
            for g in p.grad.iter() {
                let gf = g.to_f();
                sq += gf * gf;
            }
        }
    });
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = S::from_f(max_norm / norm);
        model.visit_params_mut(&mut |p| {
            if p.trainable {
                p.grad.mapv_inplace(|g| g * scale);
            }
        });
    }
    norm
}
