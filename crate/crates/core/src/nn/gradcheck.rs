//! Central finite-difference verification of analytic gradients.
//!
//! The numeric side only ever calls the forward path, so it stays
//! independent of the backward implementations it checks.

use super::param::{get_grad_coord, get_param_coord, set_param_coord, Module};
use super::rng::derive_rng;
use super::scalar::Scalar;
use rand::Rng as _;

#[derive(Debug, Clone)]
pub struct CoordCheck {
    pub param: String,
    pub idx: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

/// |a-n| / max(|a|, |n|, floor). Coordinates where both sides are below the
/// floor count as exact.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let floor = 1e-7;
    if analytic.abs() < floor && numeric.abs() < floor {
        return 0.0;
    }
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compare stored parameter gradients against central differences of `loss`
/// on `samples_per` random coordinates of each named parameter. The model
/// must already hold gradients from one backward pass of the same loss.
pub fn check_params<S: Scalar, M: Module<S> + ?Sized, F: FnMut(&mut M) -> f64>(
    model: &mut M,
    mut loss: F,
    params: &[(String, usize)], // (name, coordinate count to sample)
    h: f64,
    seed: u64,
) -> Vec<CoordCheck> {
    let mut out = Vec::new();
    for (name, samples) in params {
        let mut len = 0usize;
        model.visit_params(&mut |p| {
            if &p.name == name {
                len = p.len();
            }
        });
        assert!(len > 0, "parameter {name} not found or empty");
        let mut rng = derive_rng(seed, "gradcheck", &[name]);
        for _ in 0..*samples {
            let idx = rng.gen_range(0..len);
            let orig = get_param_coord(model, name, idx).unwrap();
            let hp = S::from_f(h);
            set_param_coord(model, name, idx, orig + hp).unwrap();
            let fp = loss(model);
            set_param_coord(model, name, idx, orig - hp).unwrap();
            let fm = loss(model);
            set_param_coord(model, name, idx, orig).unwrap();
            let numeric = (fp - fm) / (2.0 * h);
            let analytic = get_grad_coord(model, name, idx).unwrap().to_f();
            out.push(CoordCheck {
                param: name.clone(),
                idx,
                analytic,
                numeric,
                rel_err: rel_err(analytic, numeric),
            });
        }
    }
    out
}

pub fn max_rel_err(checks: &[CoordCheck]) -> f64 {
    checks.iter().map(|c| c.rel_err).fold(0.0, f64::max)
}

/// Weighted-sum readout turning a tensor output into a scalar loss with
/// non-degenerate gradients: loss = sum(w .* y) with fixed pseudo-random w.
pub fn readout_weights<S: Scalar>(shape: &[usize], seed: u64) -> ndarray::ArrayD<S> {
    let mut rng = derive_rng(seed, "readout", &[]);
    let n: usize = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        data.push(S::from_f(rng.gen_range(-1.0..1.0)));
    }
    ndarray::ArrayD::from_shape_vec(ndarray::IxDyn(shape), data).unwrap()
}

pub fn weighted_sum<S: Scalar, D: ndarray::Dimension>(
    y: &ndarray::Array<S, D>,
    w: &ndarray::ArrayD<S>,
) -> f64 {
    let mut acc = S::zero();
    for (a, b) in y.iter().zip(w.iter()) {
        acc += *a * *b;
    }
    acc.to_f()
}
