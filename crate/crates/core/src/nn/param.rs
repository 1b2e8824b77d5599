//! Parameters and the module visitor used for counting, checkpointing,
//! optimization and LoRA injection.

use ndarray::ArrayD;

use super::scalar::Scalar;
use crate::error::{Error, Result};

/// One named tensor with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param<S: Scalar> {
    pub name: String,
    pub value: ArrayD<S>,
    pub grad: ArrayD<S>,
    pub trainable: bool,
}

impl<S: Scalar> Param<S> {
    pub fn new(name: impl Into<String>, value: ArrayD<S>) -> Self {
        let grad = ArrayD::zeros(value.raw_dim());
        Param { name: name.into(), value, grad, trainable: true }
    }

    pub fn frozen(name: impl Into<String>, value: ArrayD<S>) -> Self {
        let mut p = Self::new(name, value);
        p.trainable = false;
        p
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(S::zero());
    }
}

/// Walks every parameter of a module tree.
pub trait Module<S: Scalar> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<S>));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<S>));
}

/// Exact parameter count. `trainable_only` restricts to parameters an
/// optimizer would update.
pub fn count_params<S: Scalar, M: Module<S> + ?Sized>(model: &M, trainable_only: bool) -> usize {
    let mut n = 0usize;
    model.visit_params(&mut |p| {
        if !trainable_only || p.trainable {
            n += p.len();
        }
    });
    n
}

pub fn zero_grads<S: Scalar, M: Module<S> + ?Sized>(model: &mut M) {
    model.visit_params_mut(&mut |p| p.zero_grad());
}

pub fn set_trainable<S: Scalar, M: Module<S> + ?Sized>(model: &mut M, trainable: bool) {
    model.visit_params_mut(&mut |p| p.trainable = trainable);
}

/// SHA-256 over the little-endian bytes of every parameter value, in visit
/// order. Used by freeze contracts.
pub fn param_checksum<S: Scalar, M: Module<S> + ?Sized>(model: &M) -> [u8; 32] {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    model.visit_params(&mut |p| {
        h.update(p.name.as_bytes());
        let mut buf = Vec::with_capacity(p.len() * S::DTYPE.size_bytes());
        for &v in p.value.iter() {
            v.write_le(&mut buf);
        }
        h.update(&buf);
    });
    h.finalize().into()
}

/// Read one scalar coordinate of a named parameter (finite-difference probes).
pub fn get_param_coord<S: Scalar, M: Module<S> + ?Sized>(
    model: &M,
    name: &str,
    idx: usize,
) -> Result<S> {
    let mut out = None;
    model.visit_params(&mut |p| {
        if p.name == name {
            out = p.value.iter().nth(idx).copied();
        }
    });
    out.ok_or_else(|| Error::NoMatch { selector: format!("{name}[{idx}]") })
}

/// Write one scalar coordinate of a named parameter.
pub fn set_param_coord<S: Scalar, M: Module<S> + ?Sized>(
    model: &mut M,
    name: &str,
    idx: usize,
    v: S,
) -> Result<()> {
    let mut found = false;
    model.visit_params_mut(&mut |p| {
        if p.name == name {
            if let Some(slot) = p.value.iter_mut().nth(idx) {
                *slot = v;
                found = true;
            }
        }
    });
    if found {
        Ok(())
    } else {
        Err(Error::NoMatch { selector: format!("{name}[{idx}]") })
    }
}

/// Gradient of a named parameter coordinate after a backward pass.
pub fn get_grad_coord<S: Scalar, M: Module<S> + ?Sized>(
    model: &M,
    name: &str,
    idx: usize,
) -> Result<S> {
    let mut out = None;
    model.visit_params(&mut |p| {
        if p.name == name {
            out = p.grad.iter().nth(idx).copied();
        }
    });
    out.ok_or_else(|| Error::NoMatch { selector: format!("{name}[{idx}]") })
}

/// Names of all parameters, in visit order.
pub fn param_names<S: Scalar, M: Module<S> + ?Sized>(model: &M) -> Vec<String> {
    let mut names = Vec::new();
    model.visit_params(&mut |p| names.push(p.name.clone()));
    names
}
