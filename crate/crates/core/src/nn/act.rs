//! Smooth activations. SiLU is used throughout: its smoothness keeps
//! finite-difference gradient checks well-conditioned.

use ndarray::ArrayD;

use super::scalar::Scalar;

#[derive(Debug, Clone, Default)]
pub struct Silu<S: Scalar> {
    cache: Option<ArrayD<S>>,
}

fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

impl<S: Scalar> Silu<S> {
    pub fn new() -> Self {
        Silu { cache: None }
    }

    pub fn forward<D: ndarray::Dimension>(
        &mut self,
        x: &ndarray::Array<S, D>,
        train: bool,
    ) -> ndarray::Array<S, D> {
        self.cache = None;
        if train {
            self.cache = Some(x.clone().into_dyn());
        }
        x.mapv(|v| v * sigmoid(v))
    }

    pub fn backward<D: ndarray::Dimension>(
        &mut self,
        gy: &ndarray::Array<S, D>,
    ) -> ndarray::Array<S, D> {
        let x = self.cache.take().expect("silu backward without forward(train)");
        let x = x.into_dimensionality::<D>().unwrap();
        let mut gx = gy.clone();
        gx.zip_mut_with(&x, |g, &v| {
            let s = sigmoid(v);
            *g = *g * (s * (S::one() + v * (S::one() - s)));
        });
        gx
    }
}

/// Stateless helpers for places that do not need a backward pass.
pub fn silu_map<S: Scalar, D: ndarray::Dimension>(x: &ndarray::Array<S, D>) -> ndarray::Array<S, D> {
    x.mapv(|v| v * sigmoid(v))
}
