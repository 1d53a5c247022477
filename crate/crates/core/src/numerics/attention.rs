//! Fused single-head scaled dot-product attention.
//!
//! Works one batch element at a time with `Tq × Tk` scratch buffers. The
//! reverse pass recomputes the attention weights and regenerates the dropout
//! mask from its seed instead of keeping `B × T × T` tensors alive.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::scalar::{gemm, Operand};
use super::{mix_seed, Scalar, Tensor};

/// Dropout applied to attention weights, reproducible from `seed`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttentionDropout {
    pub rate: f64,
    pub seed: u64,
}

pub(crate) struct AttentionShape {
    pub batch: usize,
    pub tq: usize,
    pub tk: usize,
    pub dk: usize,
    pub dv: usize,
}

pub(crate) fn check_shapes<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    key_mask: &[bool],
) -> Result<AttentionShape> {
    let bad = || {
        Error::dim(
            "attention",
            format!("q {:?}, k {:?}, v {:?}, mask {}", q.shape(), k.shape(), v.shape(), key_mask.len()),
        )
    };
    if q.rank() != 3 || k.rank() != 3 || v.rank() != 3 {
        return Err(bad());
    }
    let (batch, tq, dk) = (q.shape()[0], q.shape()[1], q.shape()[2]);
    let (tk, dv) = (k.shape()[1], v.shape()[2]);
    if k.shape()[0] != batch || k.shape()[2] != dk || v.shape()[0] != batch || v.shape()[1] != tk || key_mask.len() != batch * tk {
        return Err(bad());
    }
    Ok(AttentionShape { batch, tq, tk, dk, dv })
}

fn op<T>(data: &[T], rows: usize, cols: usize, transposed: bool) -> Operand<'_, T> {
    Operand { data, rows, cols, transposed }
}

/// Attention weights of batch element `b` into `probs` (`tq × tk`).
fn element_probs<T: Scalar>(s: &AttentionShape, q: &[T], k: &[T], mask: &[bool], scale: T, probs: &mut [T]) {
    gemm(op(q, s.tq, s.dk, false), op(k, s.tk, s.dk, true), T::zero(), probs);
    if s.tk == 0 {
        return;
    }
    for row in probs.chunks_mut(s.tk) {
        let mut max = T::neg_infinity();
        for (v, &keep) in row.iter_mut().zip(mask) {
            *v = if keep { *v * scale } else { T::neg_infinity() };
            max = max.max(*v);
        }
        if max == T::neg_infinity() {
            row.iter_mut().for_each(|v| *v = T::zero());
            continue;
        }
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
}

/// Per-element keep factors (`0` or `1 / (1 − rate)`), regenerated identically on each call.
fn element_dropout<T: Scalar>(d: &AttentionDropout, b: usize, out: &mut [T]) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(d.seed, b as u64));
    let keep = T::lit(1.0 / (1.0 - d.rate));
    for v in out.iter_mut() {
        *v = if rng.gen::<f64>() < d.rate { T::zero() } else { keep };
    }
}

fn active(dropout: Option<&AttentionDropout>) -> Option<&AttentionDropout> {
    dropout.filter(|d| d.rate > 0.0)
}

/// `softmax(mask(q·kᵀ·scale)) · v` with optional dropout on the weights.
///
/// `q` is `B × Tq × dk`, `k` is `B × Tk × dk`, `v` is `B × Tk × dv`; keys with
/// `key_mask[b·Tk + j] == false` receive zero weight.
pub fn attention<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    key_mask: &[bool],
    scale: T,
    dropout: Option<&AttentionDropout>,
) -> Result<Tensor<T>> {
    let s = check_shapes(q, k, v, key_mask)?;
    if let Some(d) = dropout {
        if !(0.0..1.0).contains(&d.rate) {
            return Err(Error::Parameter(format!("dropout rate {} outside [0, 1)", d.rate)));
        }
    }
    let dropout = active(dropout);
    let mut out = vec![T::zero(); s.batch * s.tq * s.dv];
    let mut probs = vec![T::zero(); s.tq * s.tk];
    let mut keep = vec![T::zero(); if dropout.is_some() { s.tq * s.tk } else { 0 }];
    for b in 0..s.batch {
        let qb = &q.data()[b * s.tq * s.dk..(b + 1) * s.tq * s.dk];
        let kb = &k.data()[b * s.tk * s.dk..(b + 1) * s.tk * s.dk];
        let vb = &v.data()[b * s.tk * s.dv..(b + 1) * s.tk * s.dv];
        element_probs(&s, qb, kb, &key_mask[b * s.tk..(b + 1) * s.tk], scale, &mut probs);
        if let Some(d) = dropout {
            element_dropout(d, b, &mut keep);
            probs.iter_mut().zip(&keep).for_each(|(p, &m)| *p *= m);
        }
        gemm(
            op(&probs, s.tq, s.tk, false),
            op(vb, s.tk, s.dv, false),
            T::zero(),
            &mut out[b * s.tq * s.dv..(b + 1) * s.tq * s.dv],
        );
    }
    Tensor::new(vec![s.batch, s.tq, s.dv], out)
}

pub(crate) struct AttentionGrads<T> {
    pub dq: Vec<T>,
    pub dk: Vec<T>,
    pub dv: Vec<T>,
}

/// Reverse pass of [`attention`] for upstream gradient `g` (`B × Tq × dv`).
pub(crate) fn attention_backward<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    key_mask: &[bool],
    scale: T,
    dropout: Option<&AttentionDropout>,
    g: &Tensor<T>,
) -> Result<AttentionGrads<T>> {
    let s = check_shapes(q, k, v, key_mask)?;
    let dropout = active(dropout);
    let mut dq = vec![T::zero(); s.batch * s.tq * s.dk];
    let mut dk = vec![T::zero(); s.batch * s.tk * s.dk];
    let mut dv = vec![T::zero(); s.batch * s.tk * s.dv];
    let mut probs = vec![T::zero(); s.tq * s.tk];
    let mut dprobs = vec![T::zero(); s.tq * s.tk];
    let mut keep = vec![T::zero(); if dropout.is_some() { s.tq * s.tk } else { 0 }];
    for b in 0..s.batch {
        let qb = &q.data()[b * s.tq * s.dk..(b + 1) * s.tq * s.dk];
        let kb = &k.data()[b * s.tk * s.dk..(b + 1) * s.tk * s.dk];
        let vb = &v.data()[b * s.tk * s.dv..(b + 1) * s.tk * s.dv];
        let gb = &g.data()[b * s.tq * s.dv..(b + 1) * s.tq * s.dv];
        element_probs(&s, qb, kb, &key_mask[b * s.tk..(b + 1) * s.tk], scale, &mut probs);

        // dP' = G · Vᵀ, where P' is the (dropped) weight matrix
        gemm(op(gb, s.tq, s.dv, false), op(vb, s.tk, s.dv, true), T::zero(), &mut dprobs);
        if let Some(d) = dropout {
            element_dropout(d, b, &mut keep);
            dprobs.iter_mut().zip(&keep).for_each(|(x, &m)| *x *= m);
            // dV = P'ᵀ · G needs the dropped weights; reuse `keep` to hold them.
            keep.iter_mut().zip(&probs).for_each(|(m, &p)| *m *= p);
            gemm(op(&keep, s.tq, s.tk, true), op(gb, s.tq, s.dv, false), T::zero(), &mut dv[b * s.tk * s.dv..(b + 1) * s.tk * s.dv]);
        } else {
            gemm(op(&probs, s.tq, s.tk, true), op(gb, s.tq, s.dv, false), T::zero(), &mut dv[b * s.tk * s.dv..(b + 1) * s.tk * s.dv]);
        }

        // softmax reverse, then the score scale
        if s.tk > 0 {
            for (drow, prow) in dprobs.chunks_mut(s.tk).zip(probs.chunks(s.tk)) {
                let dot: T = drow.iter().zip(prow).map(|(&a, &p)| a * p).sum();
                for (x, &p) in drow.iter_mut().zip(prow) {
                    *x = p * (*x - dot) * scale;
                }
            }
        }
        gemm(op(&dprobs, s.tq, s.tk, false), op(kb, s.tk, s.dk, false), T::zero(), &mut dq[b * s.tq * s.dk..(b + 1) * s.tq * s.dk]);
        gemm(op(&dprobs, s.tq, s.tk, true), op(qb, s.tq, s.dk, false), T::zero(), &mut dk[b * s.tk * s.dk..(b + 1) * s.tk * s.dk]);
    }
    Ok(AttentionGrads { dq, dk, dv })
}
