//! Forward kernels shared by the eager API and the tape.

use crate::error::{Error, Result};

use super::scalar::{gemm, Operand};
use super::{Scalar, Tensor};

/// Plain matrix product of `m × k` and `k × n` tensors.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.expect_rank(2, "matmul")?;
    b.expect_rank(2, "matmul")?;
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let (k2, n) = (b.shape()[0], b.shape()[1]);
    if k != k2 {
        return Err(Error::dim(
            "matmul",
            format!("{:?} x {:?}", a.shape(), b.shape()),
        ));
    }
    let mut out = vec![T::zero(); m * n];
    gemm(
        Operand { data: a.data(), rows: m, cols: k, transposed: false },
        Operand { data: b.data(), rows: k, cols: n, transposed: false },
        T::zero(),
        &mut out,
    );
    Tensor::new(vec![m, n], out)
}

/// Batched product `a[i] · b[i]` (or `a[i] · b[i]ᵀ` when `transpose_b`).
pub fn batch_matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, transpose_b: bool) -> Result<Tensor<T>> {
    a.expect_rank(3, "batch_matmul")?;
    b.expect_rank(3, "batch_matmul")?;
    let (batch, m, k) = (a.shape()[0], a.shape()[1], a.shape()[2]);
    let (rb, cb) = (b.shape()[1], b.shape()[2]);
    let (k2, n) = if transpose_b { (cb, rb) } else { (rb, cb) };
    if b.shape()[0] != batch || k != k2 {
        return Err(Error::dim(
            "batch_matmul",
            format!("{:?} x {:?} (transpose_b={transpose_b})", a.shape(), b.shape()),
        ));
    }
    let mut out = vec![T::zero(); batch * m * n];
    for i in 0..batch {
        gemm(
            Operand { data: &a.data()[i * m * k..(i + 1) * m * k], rows: m, cols: k, transposed: false },
            Operand { data: &b.data()[i * rb * cb..(i + 1) * rb * cb], rows: rb, cols: cb, transposed: transpose_b },
            T::zero(),
            &mut out[i * m * n..(i + 1) * m * n],
        );
    }
    Tensor::new(vec![batch, m, n], out)
}

fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    if max == T::neg_infinity() {
        row.iter_mut().for_each(|v| *v = T::zero());
        return;
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

/// Softmax along the last axis, stabilized by subtracting the row maximum.
/// A row that is entirely `-inf` maps to zeros.
pub fn softmax_rows<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let mut out = x.clone();
    let d = x.last_dim();
    if d > 0 {
        out.data_mut().chunks_mut(d).for_each(softmax_in_place);
    }
    out
}

/// Softmax over key positions of `scores[B, Tq, Tk]`; keys with
/// `key_mask[b * Tk + j] == false` receive exactly zero weight.
pub fn masked_softmax<T: Scalar>(scores: &Tensor<T>, key_mask: &[bool]) -> Result<Tensor<T>> {
    scores.expect_rank(3, "masked_softmax")?;
    let (batch, tq, tk) = (scores.shape()[0], scores.shape()[1], scores.shape()[2]);
    if key_mask.len() != batch * tk {
        return Err(Error::dim(
            "masked_softmax",
            format!("mask length {} for scores {:?}", key_mask.len(), scores.shape()),
        ));
    }
    let mut out = scores.clone();
    if tk == 0 {
        return Ok(out);
    }
    for (r, row) in out.data_mut().chunks_mut(tk).enumerate() {
        let b = r / tq.max(1);
        let mask = &key_mask[b * tk..(b + 1) * tk];
        for (v, &keep) in row.iter_mut().zip(mask) {
            if !keep {
                *v = T::neg_infinity();
            }
        }
        softmax_in_place(row);
    }
    Ok(out)
}

/// Normalized activations and reciprocal standard deviations per row.
pub(crate) struct LayerNormParts<T> {
    pub output: Tensor<T>,
    pub normalized: Tensor<T>,
    pub inv_std: Vec<T>,
}

pub(crate) fn layer_norm_parts<T: Scalar>(
    x: &Tensor<T>,
    gain: &Tensor<T>,
    bias: &Tensor<T>,
    eps: T,
) -> Result<LayerNormParts<T>> {
    let d = x.last_dim();
    if gain.len() != d || bias.len() != d {
        return Err(Error::dim(
            "layer_norm",
            format!("feature dim {d}, gain {:?}, bias {:?}", gain.shape(), bias.shape()),
        ));
    }
    if eps <= T::zero() {
        return Err(Error::Parameter("layer_norm eps must be positive".into()));
    }
    let rows = x.outer_len();
    let dn = T::from_usize(d).unwrap();
    let mut normalized = x.clone();
    let mut output = x.clone();
    let mut inv_std = Vec::with_capacity(rows);
    for r in 0..rows {
        let src = x.row(r);
        let mean = src.iter().copied().sum::<T>() / dn;
        let var = src.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dn;
        let rs = T::one() / (var + eps).sqrt();
        inv_std.push(rs);
        let nrow = &mut normalized.data_mut()[r * d..(r + 1) * d];
        for (n, &v) in nrow.iter_mut().zip(src) {
            *n = (v - mean) * rs;
        }
        let orow = &mut output.data_mut()[r * d..(r + 1) * d];
        for j in 0..d {
            orow[j] = normalized.data()[r * d + j] * gain.data()[j] + bias.data()[j];
        }
    }
    Ok(LayerNormParts { output, normalized, inv_std })
}

/// Layer normalization over the last axis with affine gain and bias.
pub fn layer_norm<T: Scalar>(x: &Tensor<T>, gain: &Tensor<T>, bias: &Tensor<T>, eps: T) -> Result<Tensor<T>> {
    layer_norm_parts(x, gain, bias, eps).map(|p| p.output)
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// GELU, tanh approximation.
pub fn gelu<T: Scalar>(x: T) -> T {
    let (c, a, half) = (T::lit(GELU_C), T::lit(GELU_A), T::lit(0.5));
    half * x * (T::one() + (c * (x + a * x * x * x)).tanh())
}

pub(crate) fn gelu_grad<T: Scalar>(x: T) -> T {
    let (c, a, half) = (T::lit(GELU_C), T::lit(GELU_A), T::lit(0.5));
    let t = (c * (x + a * x * x * x)).tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + T::lit(3.0) * a * x * x)
}
