use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};
use crate::signal::NUM_CHANNELS;

use super::ModelConfig;

/// Named weight tensors of one model plus the config they were built for.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    config: ModelConfig,
    tensors: BTreeMap<String, Tensor<T>>,
}

/// Closed-form parameter total:
/// `L·(4(d²+d) + 2df + f + d + 4d) + (Dd + d) + (12d + 12)`.
pub fn param_count(c: &ModelConfig) -> usize {
    let (d, f, l, input) = (c.width, c.ff_width, c.layers, c.input_dim);
    let per_layer = 4 * (d * d + d) + 2 * d * f + f + d + 4 * d;
    l * per_layer + (input * d + d) + (NUM_CHANNELS * d + NUM_CHANNELS)
}

pub(crate) fn layer_key(layer: usize, name: &str) -> String {
    format!("layers.{layer}.{name}")
}

/// `(name, shape)` of every tensor a config allocates, in build order.
pub(crate) fn tensor_specs(c: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let (d, f) = (c.width, c.ff_width);
    let mut specs = vec![
        ("input.weight".to_string(), vec![c.input_dim, d]),
        ("input.bias".to_string(), vec![d]),
    ];
    for l in 0..c.layers {
        for proj in ["q", "k", "v", "o"] {
            specs.push((layer_key(l, &format!("attn.{proj}.weight")), vec![d, d]));
            specs.push((layer_key(l, &format!("attn.{proj}.bias")), vec![d]));
        }
        specs.push((layer_key(l, "norm1.gain"), vec![d]));
        specs.push((layer_key(l, "norm1.bias"), vec![d]));
        specs.push((layer_key(l, "ff1.weight"), vec![d, f]));
        specs.push((layer_key(l, "ff1.bias"), vec![f]));
        specs.push((layer_key(l, "ff2.weight"), vec![f, d]));
        specs.push((layer_key(l, "ff2.bias"), vec![d]));
        specs.push((layer_key(l, "norm2.gain"), vec![d]));
        specs.push((layer_key(l, "norm2.bias"), vec![d]));
    }
    specs.push(("output.weight".to_string(), vec![d, NUM_CHANNELS]));
    specs.push(("output.bias".to_string(), vec![NUM_CHANNELS]));
    specs
}

/// Deterministic initialization: Glorot-uniform weight matrices, zero
/// biases, unit normalization gains.
pub fn build_model<T: Scalar>(config: &ModelConfig, seed: u64) -> Result<ModelParams<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors = BTreeMap::new();
    for (name, shape) in tensor_specs(config) {
        let t = if name.ends_with(".gain") {
            Tensor::ones(&shape)
        } else if shape.len() == 2 {
            let bound = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
            Tensor::from_fn(&shape, |_| T::lit(rng.gen_range(-bound..bound)))
        } else {
            Tensor::zeros(&shape)
        };
        tensors.insert(name, t);
    }
    Ok(ModelParams { config: config.clone(), tensors })
}

impl<T: Scalar> ModelParams<T> {
    /// Assembles params from named tensors, checking names and shapes against `config`.
    pub fn from_tensors(config: ModelConfig, mut tensors: BTreeMap<String, Tensor<T>>) -> Result<Self> {
        config.validate()?;
        let specs = tensor_specs(&config);
        let mut ordered = BTreeMap::new();
        for (name, shape) in specs {
            let t = tensors
                .remove(&name)
                .ok_or_else(|| Error::Config(format!("missing parameter {name}")))?;
            if t.shape() != shape.as_slice() {
                return Err(Error::dim(
                    "model params",
                    format!("{name}: expected {shape:?}, found {:?}", t.shape()),
                ));
            }
            if !t.is_finite() {
                return Err(Error::Numeric(format!("parameter {name} has non-finite values")));
            }
            ordered.insert(name, t);
        }
        if let Some(extra) = tensors.keys().next() {
            return Err(Error::Config(format!("unexpected parameter {extra}")));
        }
        Ok(Self { config, tensors: ordered })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn tensors(&self) -> &BTreeMap<String, Tensor<T>> {
        &self.tensors
    }

    /// Count by enumerating allocated tensors.
    pub fn num_parameters(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            config: self.config.clone(),
            tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
        }
    }
}
