//! Scalar abstraction so the network stack can run in f32 (training) and
//! f64 (finite-difference verification) from one code path.

use ndarray::{LinalgScalar, ScalarOperand};
use rand::distributions::uniform::SampleUniform;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn size_bytes(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::F64 => "f64",
        }
    }
}

pub trait Scalar:
    'static
    + Copy
    + Send
    + Sync
    + std::fmt::Debug
    + std::fmt::Display
    + num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + ScalarOperand
    + LinalgScalar
    + SampleUniform
    + PartialOrd
{
    const DTYPE: Dtype;

    fn from_f(v: f64) -> Self;
    fn to_f(self) -> f64;
    fn read_le(bytes: &[u8]) -> Self;
    fn write_le(self, out: &mut Vec<u8>);
    fn standard_normal(rng: &mut super::rng::Rng) -> Self;
}

impl Scalar for f32 {
    const DTYPE: Dtype = Dtype::F32;

    fn from_f(v: f64) -> Self {
        v as f32
    }
    fn to_f(self) -> f64 {
        self as f64
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes[..4].try_into().unwrap())
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn standard_normal(rng: &mut super::rng::Rng) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Scalar for f64 {
    const DTYPE: Dtype = Dtype::F64;

    fn from_f(v: f64) -> Self {
        v
    }
    fn to_f(self) -> f64 {
        self
    }
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes[..8].try_into().unwrap())
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn standard_normal(rng: &mut super::rng::Rng) -> Self {
        StandardNormal.sample(rng)
    }
}
