//! Weight initialization.

use ndarray::{ArrayD, IxDyn};

use super::rng::Rng;
use super::scalar::Scalar;

/// He-style normal init: N(0, 2/fan_in).
pub fn he_normal<S: Scalar>(rng: &mut Rng, shape: &[usize], fan_in: usize) -> ArrayD<S> {
    let std = S::from_f((2.0 / fan_in as f64).sqrt());
    gaussian(rng, shape, std)
}

/// N(0, std^2) with the given std.
pub fn gaussian<S: Scalar>(rng: &mut Rng, shape: &[usize], std: S) -> ArrayD<S> {
    let n: usize = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        data.push(S::standard_normal(rng) * std);
    }
    ArrayD::from_shape_vec(IxDyn(shape), data).expect("shape/product mismatch")
}

pub fn zeros<S: Scalar>(shape: &[usize]) -> ArrayD<S> {
    ArrayD::zeros(IxDyn(shape))
}

pub fn ones<S: Scalar>(shape: &[usize]) -> ArrayD<S> {
    ArrayD::from_elem(IxDyn(shape), S::one())
}
