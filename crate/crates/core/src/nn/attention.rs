//! Multi-head scaled-dot-product attention over token tensors (B, T, C).
//!
//! The same layer serves self-attention (kv = None) and cross-attention to
//! an external key/value sequence such as a prompt embedding. The parameter
//! set is exactly q/k/v/out projections; nothing depends on the sequence
//! layout, which is what lets the caller fuse modalities into one sequence
//! without adding parameters.

use ndarray::{linalg::general_mat_mul, s, Array2, Array3, Array4};
use rayon::prelude::*;

use super::linear::Linear;
use super::param::Param;
use super::rng::Rng;
use super::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Attention<S: Scalar> {
    pub q: Linear<S>,
    pub k: Linear<S>,
    pub v: Linear<S>,
    pub out: Linear<S>,
    pub heads: usize,
    pub dim: usize,
    pub kv_dim: usize,
    cache: Option<AttnCache<S>>,
}

#[derive(Debug, Clone)]
struct AttnCache<S> {
    q3: Array3<S>,
    k3: Array3<S>,
    v3: Array3<S>,
    p: Array4<S>, // (B, heads, Tq, Tk) softmax weights
    self_attn: bool,
}

impl<S: Scalar> Attention<S> {
    pub fn new(name: &str, rng: &mut Rng, dim: usize, kv_dim: usize, heads: usize) -> Self {
        super::tune_allocator();
        assert!(dim % heads == 0, "attention width {dim} not divisible by heads {heads}");
        Attention {
            q: Linear::new(&format!("{name}.q"), rng, dim, dim, false),
            k: Linear::new(&format!("{name}.k"), rng, kv_dim, dim, false),
            v: Linear::new(&format!("{name}.v"), rng, kv_dim, dim, false),
            out: Linear::new(&format!("{name}.out"), rng, dim, dim, true),
            heads,
            dim,
            kv_dim,
            cache: None,
        }
    }

    /// kv = None runs self-attention on `x`.
    pub fn forward(&mut self, x: &Array3<S>, kv: Option<&Array3<S>>, train: bool) -> Array3<S> {
        self.cache = None;
        let (b, tq, _c) = x.dim();
        let self_attn = kv.is_none();
        let kv_src = kv.unwrap_or(x);
        let tk = kv_src.dim().1;
        let q3 = self.q.forward(x, train);
        let k3 = self.k.forward(kv_src, train);
        let v3 = self.v.forward(kv_src, train);
        let h = self.heads;
        let dh = self.dim / h;
        let scale = S::from_f(1.0 / (dh as f64).sqrt());

        let jobs: Vec<(usize, usize)> =
            (0..b).flat_map(|bi| (0..h).map(move |hi| (bi, hi))).collect();
        let results: Vec<(Array2<S>, Array2<S>)> = jobs
            .par_iter()
            .map(|&(bi, hi)| {
                let qv = q3.slice(s![bi, .., hi * dh..(hi + 1) * dh]);
                let kvw = k3.slice(s![bi, .., hi * dh..(hi + 1) * dh]);
                let vv = v3.slice(s![bi, .., hi * dh..(hi + 1) * dh]);
                let mut scores = Array2::<S>::zeros((tq, tk));
                general_mat_mul(scale, &qv, &kvw.t(), S::zero(), &mut scores);
                softmax_rows(&mut scores);
                let mut o = Array2::<S>::zeros((tq, dh));
                general_mat_mul(S::one(), &scores, &vv, S::zero(), &mut o);
                (o, scores)
            })
            .collect();

        let mut merged = Array3::<S>::zeros((b, tq, self.dim));
        let mut p = Array4::<S>::zeros((b, h, tq, tk));
        for (&(bi, hi), (o, scores)) in jobs.iter().zip(results.into_iter()) {
            merged.slice_mut(s![bi, .., hi * dh..(hi + 1) * dh]).assign(&o);
            if train {
                p.slice_mut(s![bi, hi, .., ..]).assign(&scores);
            }
        }
        let y = self.out.forward(&merged, train);
        if train {
            self.cache = Some(AttnCache { q3, k3, v3, p, self_attn });
        }
        y
    }

    /// Returns (grad wrt x, grad wrt kv). For self-attention the kv grad is
    /// already folded into the first component and the second is None.
    pub fn backward(&mut self, gy: &Array3<S>) -> (Array3<S>, Option<Array3<S>>) {
        let cache = self.cache.take().expect("attention backward without forward(train)");
        let dmerged = self.out.backward(gy);
        let (b, tq, _) = dmerged.dim();
        let h = self.heads;
        let dh = self.dim / h;
        let tk = cache.k3.dim().1;
        let scale = S::from_f(1.0 / (dh as f64).sqrt());

        let jobs: Vec<(usize, usize)> =
            (0..b).flat_map(|bi| (0..h).map(move |hi| (bi, hi))).collect();
        let results: Vec<(Array2<S>, Array2<S>, Array2<S>)> = jobs
            .par_iter()
            .map(|&(bi, hi)| {
                let dov = dmerged.slice(s![bi, .., hi * dh..(hi + 1) * dh]);
                let qv = cache.q3.slice(s![bi, .., hi * dh..(hi + 1) * dh]);
                let kvw = cache.k3.slice(s![bi, .., hi * dh..(hi + 1) * dh]);
                let vv = cache.v3.slice(s![bi, .., hi * dh..(hi + 1) * dh]);
                let pv = cache.p.slice(s![bi, hi, .., ..]);

                let mut dv = Array2::<S>::zeros((tk, dh));
                general_mat_mul(S::one(), &pv.t(), &dov, S::zero(), &mut dv);
                let mut dp = Array2::<S>::zeros((tq, tk));
                general_mat_mul(S::one(), &dov, &vv.t(), S::zero(), &mut dp);
                // softmax backward rows: ds = p * (dp - sum(dp * p))
                let mut ds = dp;
                for (mut ds_row, p_row) in ds.rows_mut().into_iter().zip(pv.rows()) {
                    let mut dot = S::zero();
                    for (d, p) in ds_row.iter().zip(p_row.iter()) {
                        dot += *d * *p;
                    }
                    for (d, p) in ds_row.iter_mut().zip(p_row.iter()) {
                        *d = *p * (*d - dot);
                    }
                }
                let mut dq = Array2::<S>::zeros((tq, dh));
                general_mat_mul(scale, &ds, &kvw, S::zero(), &mut dq);
                let mut dk = Array2::<S>::zeros((tk, dh));
                general_mat_mul(scale, &ds.t(), &qv, S::zero(), &mut dk);
                (dq, dk, dv)
            })
            .collect();

        let mut dq3 = Array3::<S>::zeros((b, tq, self.dim));
        let mut dk3 = Array3::<S>::zeros((b, tk, self.dim));
        let mut dv3 = Array3::<S>::zeros((b, tk, self.dim));
        for (&(bi, hi), (dq, dk, dv)) in jobs.iter().zip(results.into_iter()) {
            dq3.slice_mut(s![bi, .., hi * dh..(hi + 1) * dh]).assign(&dq);
            dk3.slice_mut(s![bi, .., hi * dh..(hi + 1) * dh]).assign(&dk);
            dv3.slice_mut(s![bi, .., hi * dh..(hi + 1) * dh]).assign(&dv);
        }

        let gx_q = self.q.backward(&dq3);
        let gkv_k = self.k.backward(&dk3);
        let gkv_v = self.v.backward(&dv3);
        let mut gkv = gkv_k;
        gkv.zip_mut_with(&gkv_v, |a, b| *a = *a + *b);
        if cache.self_attn {
            let mut gx = gx_q;
            gx.zip_mut_with(&gkv, |a, b| *a = *a + *b);
            (gx, None)
        } else {
            (gx_q, Some(gkv))
        }
    }

    pub fn visit_params(&self, f: &mut dyn FnMut(&Param<S>)) {
        self.q.visit_params(f);
        self.k.visit_params(f);
        self.v.visit_params(f);
        self.out.visit_params(f);
    }

    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<S>)) {
        self.q.visit_params_mut(f);
        self.k.visit_params_mut(f);
        self.v.visit_params_mut(f);
        self.out.visit_params_mut(f);
    }

    pub fn visit_sites(&mut self, f: &mut dyn FnMut(&mut dyn crate::lora::AdaptSite<S>)) {
        f(&mut self.q);
        f(&mut self.k);
        f(&mut self.v);
        f(&mut self.out);
    }
}

impl<S: Scalar> super::param::Module<S> for Attention<S> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<S>)) {
        Attention::visit_params(self, f);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<S>)) {
        Attention::visit_params_mut(self, f);
    }
}

fn softmax_rows<S: Scalar>(m: &mut Array2<S>) {
    for mut row in m.rows_mut() {
        let mut max = S::neg_infinity();
        for v in row.iter() {
            if *v > max {
                max = *v;
            }
        }
        let mut sum = S::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}
