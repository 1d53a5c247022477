use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};
use crate::signal::{ArticulatoryTrajectory, FeatureMatrix, MODEL_RATE, NUM_CHANNELS};

pub const DEFAULT_BATCH_SIZE: usize = 16;

/// Aligned feature/target pair for one sentence of one subject.
#[derive(Clone, Debug, PartialEq)]
pub struct Utterance<T> {
    pub subject: String,
    pub sentence: u32,
    pub features: FeatureMatrix<T>,
    pub targets: ArticulatoryTrajectory<T>,
}

impl<T: Scalar> Utterance<T> {
    pub fn new(
        subject: impl Into<String>,
        sentence: u32,
        features: FeatureMatrix<T>,
        targets: ArticulatoryTrajectory<T>,
    ) -> Result<Self> {
        for rate in [features.rate(), targets.rate()] {
            if rate != MODEL_RATE {
                return Err(Error::Parameter(format!("frame rate {rate} Hz at the model boundary, expected {MODEL_RATE}")));
            }
        }
        if features.len() != targets.len() {
            return Err(Error::Misalignment {
                features: features.len(),
                targets: targets.len(),
            });
        }
        Ok(Self {
            subject: subject.into(),
            sentence,
            features,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `subject/sentence` identifier used in reports.
    pub fn id(&self) -> String {
        format!("{}/{}", self.subject, self.sentence)
    }
}

/// Zero-padded batch: features `B × Tmax × D`, targets `B × Tmax × 12`, and a
/// frame mask that is true exactly for `t < lengths[b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch<T> {
    pub features: Tensor<T>,
    pub targets: Tensor<T>,
    pub mask: Vec<bool>,
    pub lengths: Vec<usize>,
    /// Position of each row in the utterance list the batch was built from.
    pub indices: Vec<usize>,
}

impl<T: Scalar> Batch<T> {
    /// Pads the given utterances to the longest one among them.
    pub fn from_utterances(utts: &[&Utterance<T>], indices: Vec<usize>) -> Result<Self> {
        let dim = utts.first().map_or(0, |u| u.features.dim());
        if let Some(u) = utts.iter().find(|u| u.features.dim() != dim) {
            return Err(Error::Conflict(format!(
                "utterance {} has feature dim {}, batch has {dim}",
                u.id(),
                u.features.dim()
            )));
        }
        let b = utts.len();
        let tmax = utts.iter().map(|u| u.len()).max().unwrap_or(0);
        let mut features = Tensor::zeros(&[b, tmax, dim]);
        let mut targets = Tensor::zeros(&[b, tmax, NUM_CHANNELS]);
        let mut mask = vec![false; b * tmax];
        for (i, u) in utts.iter().enumerate() {
            let n = u.len();
            features.data_mut()[i * tmax * dim..i * tmax * dim + n * dim].copy_from_slice(u.features.frames().data());
            targets.data_mut()[i * tmax * NUM_CHANNELS..i * tmax * NUM_CHANNELS + n * NUM_CHANNELS]
                .copy_from_slice(u.targets.frames().data());
            mask[i * tmax..i * tmax + n].iter_mut().for_each(|m| *m = true);
        }
        Ok(Self {
            features,
            targets,
            mask,
            lengths: utts.iter().map(|u| u.len()).collect(),
            indices,
        })
    }

    pub fn size(&self) -> usize {
        self.lengths.len()
    }

    pub fn max_len(&self) -> usize {
        self.features.shape()[1]
    }

    pub fn valid_frames(&self) -> usize {
        self.lengths.iter().sum()
    }

    /// Valid `len × channels` slice of a `B × Tmax × C` tensor for row `b`.
    pub fn valid_region<'t>(&self, t: &'t Tensor<T>, b: usize) -> &'t [T] {
        let (tmax, c) = (t.shape()[1], t.shape()[2]);
        &t.data()[b * tmax * c..b * tmax * c + self.lengths[b] * c]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchOptions {
    pub batch_size: usize,
    pub shuffle: bool,
    pub seed: u64,
    /// Group similar lengths before cutting batches (order within the sorted
    /// list still follows the shuffle when enabled).
    pub sort_by_length: bool,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
            shuffle: false,
            seed: 0,
            sort_by_length: false,
        }
    }
}

/// Cuts `ceil(N / batch_size)` padded batches, optionally in a seeded random order.
pub fn make_batches<T: Scalar>(utts: &[Utterance<T>], opts: &BatchOptions) -> Result<Vec<Batch<T>>> {
    if opts.batch_size == 0 {
        return Err(Error::Parameter("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..utts.len()).collect();
    if opts.shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(opts.seed));
    }
    if opts.sort_by_length {
        order.sort_by_key(|&i| utts[i].len());
    }
    order
        .chunks(opts.batch_size)
        .map(|chunk| {
            let refs: Vec<&Utterance<T>> = chunk.iter().map(|&i| &utts[i]).collect();
            Batch::from_utterances(&refs, chunk.to_vec())
        })
        .collect()
}

/// Concatenates per-subject lists in order; all features must share a name and dim.
pub fn pool_subjects<T: Scalar>(per_subject: Vec<Vec<Utterance<T>>>) -> Result<Vec<Utterance<T>>> {
    let mut pooled: Vec<Utterance<T>> = Vec::with_capacity(per_subject.iter().map(Vec::len).sum());
    for list in per_subject {
        for u in list {
            if let Some(first) = pooled.first() {
                if first.features.dim() != u.features.dim() || first.features.name() != u.features.name() {
                    return Err(Error::Conflict(format!(
                        "cannot pool {} ({} x{}) with {} ({} x{})",
                        first.id(),
                        first.features.name(),
                        first.features.dim(),
                        u.id(),
                        u.features.name(),
                        u.features.dim()
                    )));
                }
            }
            pooled.push(u);
        }
    }
    Ok(pooled)
}
