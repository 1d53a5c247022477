use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{mix_seed, AttentionDropout, Scalar, Tape, Tensor, Var};
use crate::signal::NUM_CHANNELS;

use super::config::LAYER_NORM_EPS;
use super::params::layer_key;
use super::{ModelConfig, ModelParams};

/// Forward-pass mode. Training draws dropout masks from a seeded generator;
/// evaluation is deterministic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train { seed: u64 },
    Eval,
}

/// Fixed sinusoidal encoding for positions `0..len`, `len × width`.
pub fn positional_encoding<T: Scalar>(len: usize, width: usize) -> Tensor<T> {
    Tensor::from_fn(&[len, width], |i| {
        let (pos, j) = ((i / width) as f64, i % width);
        let freq = 10_000f64.powf(-((j / 2 * 2) as f64) / width as f64);
        let angle = pos * freq;
        T::lit(if j % 2 == 0 { angle.sin() } else { angle.cos() })
    })
}

/// Hands out one derived seed per dropout site so every mask is reproducible.
struct Dropout {
    rate: f64,
    seed: Option<u64>,
    sites: u64,
}

impl Dropout {
    fn next_seed(&mut self) -> Option<u64> {
        let seed = self.seed.filter(|_| self.rate > 0.0)?;
        self.sites += 1;
        Some(mix_seed(seed, self.sites))
    }

    fn attention(&mut self) -> Option<AttentionDropout> {
        let rate = self.rate;
        self.next_seed().map(|seed| AttentionDropout { rate, seed })
    }

    fn apply<T: Scalar>(&mut self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var> {
        let Some(seed) = self.next_seed() else { return Ok(x) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keep = T::lit(1.0 / (1.0 - self.rate));
        let shape = tape.value(x).shape().to_vec();
        let rate = self.rate;
        let mask = Tensor::from_fn(&shape, |_| if rng.gen::<f64>() < rate { T::zero() } else { keep });
        tape.mul_const(x, mask)
    }
}

/// Records the forward pass for features `x` of shape `B × T × D`.
///
/// `frame_mask` has `B × T` entries; keys at masked frames get zero
/// attention weight, so valid outputs do not depend on padding.
/// Returns predictions of shape `B × T × 12`.
pub fn forward_on_tape<'a, T: Scalar>(
    tape: &mut Tape<'a, T>,
    params: &'a ModelParams<T>,
    x: Var,
    frame_mask: &[bool],
    mode: Mode,
) -> Result<Var> {
    forward_tensors_on_tape(tape, params.config(), params.tensors(), x, frame_mask, mode)
}

/// [`forward_on_tape`] over a bare name → tensor map laid out as by
/// [`build_model`](super::build_model).
pub fn forward_tensors_on_tape<'a, T: Scalar>(
    tape: &mut Tape<'a, T>,
    cfg: &ModelConfig,
    tensors: &'a BTreeMap<String, Tensor<T>>,
    x: Var,
    frame_mask: &[bool],
    mode: Mode,
) -> Result<Var> {
    let fetch = |name: &str| -> Result<&'a Tensor<T>> {
        tensors.get(name).ok_or_else(|| Error::Config(format!("missing parameter {name}")))
    };
    let shape = tape.value(x).shape().to_vec();
    if shape.len() != 3 || shape[2] != cfg.input_dim {
        return Err(Error::dim(
            "forward",
            format!("expected B x T x {}, got {shape:?}", cfg.input_dim),
        ));
    }
    let (b, t, d) = (shape[0], shape[1], cfg.width);
    if t > cfg.max_len {
        return Err(Error::dim("forward", format!("sequence length {t} exceeds max_len {}", cfg.max_len)));
    }
    if frame_mask.len() != b * t {
        return Err(Error::dim("forward", format!("mask length {} for {b} x {t}", frame_mask.len())));
    }
    let mut dropout = Dropout {
        rate: cfg.dropout,
        seed: match mode {
            Mode::Train { seed } => Some(seed),
            Mode::Eval => None,
        },
        sites: 0,
    };
    let linear = |tape: &mut Tape<'a, T>, input: Var, prefix: &str| -> Result<Var> {
        let w = tape.param(&format!("{prefix}.weight"), fetch(&format!("{prefix}.weight"))?);
        let bias = tape.param(&format!("{prefix}.bias"), fetch(&format!("{prefix}.bias"))?);
        let y = tape.matmul(input, w)?;
        tape.add_bias(y, bias)
    };
    let eps = T::lit(LAYER_NORM_EPS);
    let inv_sqrt_d = T::lit(1.0 / (d as f64).sqrt());

    let flat = tape.reshape(x, &[b * t, cfg.input_dim])?;
    let mut h = linear(tape, flat, "input")?;
    let pe = positional_encoding::<T>(t, d);
    let pe_batch = Tensor::from_fn(&[b * t, d], |i| pe.data()[i % (t * d)]);
    h = tape.add_const(h, &pe_batch)?;

    for l in 0..cfg.layers {
        let q = linear(tape, h, &layer_key(l, "attn.q"))?;
        // q·b_k shifts every score in a row by the same amount and softmax
        // cancels it exactly, so the key bias is registered but never applied.
        let kw = layer_key(l, "attn.k.weight");
        let kw = tape.param(&kw, fetch(&kw)?);
        let kb = layer_key(l, "attn.k.bias");
        tape.param(&kb, fetch(&kb)?);
        let k = tape.matmul(h, kw)?;
        let v = linear(tape, h, &layer_key(l, "attn.v"))?;
        let q = tape.reshape(q, &[b, t, d])?;
        let k = tape.reshape(k, &[b, t, d])?;
        let v = tape.reshape(v, &[b, t, d])?;
        let ctx = tape.attention(q, k, v, frame_mask, inv_sqrt_d, dropout.attention())?;
        let ctx = tape.reshape(ctx, &[b * t, d])?;
        let attn = linear(tape, ctx, &layer_key(l, "attn.o"))?;
        let res = tape.add(h, attn)?;
        h = norm(tape, &fetch, res, &layer_key(l, "norm1"), eps)?;

        let ff = linear(tape, h, &layer_key(l, "ff1"))?;
        let ff = tape.gelu(ff);
        let ff = linear(tape, ff, &layer_key(l, "ff2"))?;
        let ff = dropout.apply(tape, ff)?;
        let res = tape.add(h, ff)?;
        h = norm(tape, &fetch, res, &layer_key(l, "norm2"), eps)?;
    }

    let out = linear(tape, h, "output")?;
    tape.reshape(out, &[b, t, NUM_CHANNELS])
}

fn norm<'a, T: Scalar>(
    tape: &mut Tape<'a, T>,
    fetch: &impl Fn(&str) -> Result<&'a Tensor<T>>,
    x: Var,
    prefix: &str,
    eps: T,
) -> Result<Var> {
    let g = tape.param(&format!("{prefix}.gain"), fetch(&format!("{prefix}.gain"))?);
    let b = tape.param(&format!("{prefix}.bias"), fetch(&format!("{prefix}.bias"))?);
    tape.layer_norm(x, g, b, eps)
}

/// Predictions `B × T × 12` for padded features `B × T × D`.
pub fn forward<T: Scalar>(params: &ModelParams<T>, features: &Tensor<T>, frame_mask: &[bool], mode: Mode) -> Result<Tensor<T>> {
    let mut tape = Tape::new();
    let x = tape.constant(features.clone());
    let y = forward_on_tape(&mut tape, params, x, frame_mask, mode)?;
    Ok(tape.value(y).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, ModelConfig, SizeClass};

    fn tiny(dim: usize) -> ModelParams<f64> {
        build_model(&ModelConfig::preset(SizeClass::Tiny, dim), 11).unwrap()
    }

    #[test]
    fn output_shape() {
        let p = tiny(5);
        let x = Tensor::from_fn(&[1, 9, 5], |i| (i as f64 * 0.37).sin());
        let y = forward(&p, &x, &[true; 9], Mode::Eval).unwrap();
        assert_eq!(y.shape(), &[1, 9, 12]);
    }

    #[test]
    fn dim_mismatch_is_shape_error() {
        let p = tiny(5);
        let x = Tensor::zeros(&[1, 3, 4]);
        assert!(matches!(forward(&p, &x, &[true; 3], Mode::Eval), Err(Error::Dimension { .. })));
    }

    #[test]
    fn eval_is_deterministic_and_train_uses_dropout() {
        let p = tiny(3);
        let x = Tensor::from_fn(&[2, 6, 3], |i| (i as f64).cos());
        let m = [true; 12];
        let a = forward(&p, &x, &m, Mode::Eval).unwrap();
        assert_eq!(a, forward(&p, &x, &m, Mode::Eval).unwrap());
        let t1 = forward(&p, &x, &m, Mode::Train { seed: 1 }).unwrap();
        assert_eq!(t1, forward(&p, &x, &m, Mode::Train { seed: 1 }).unwrap());
        assert_ne!(t1, a);
    }

    #[test]
    fn positional_encoding_first_rows() {
        let pe = positional_encoding::<f64>(2, 4);
        assert_eq!(pe.row(0), &[0.0, 1.0, 0.0, 1.0]);
        assert!((pe.at(1, 0) - 1f64.sin()).abs() < 1e-15);
        assert!((pe.at(1, 3) - (0.01f64).cos()).abs() < 1e-15);
    }
}
