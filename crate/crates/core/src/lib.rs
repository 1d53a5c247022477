//! Acoustic-to-articulatory inversion toolkit.
//!
//! The crate covers the whole pipeline from raw paired audio/EMA recordings
//! to correlation reports:
//!
//! * [`signal`]: resampling, MFCC extraction, EMA low-pass/decimation/normalization.
//! * [`corpus`]: on-disk layout, the AAIF/AAIT binary formats, splits and padded batches.
//! * [`numerics`]: dense tensors with tape-based reverse-mode differentiation.
//! * [`model`]: single-head non-autoregressive transformer regressor.
//! * [`training`]: masked MSE, Adam, plateau scheduling, early stopping, regimes.
//! * [`evaluation`]: per-utterance, per-articulator Pearson correlation reports.
//! * [`synth`]: synthetic paired corpora with a known forward map.
//!
//! Numerical code is generic over [`Scalar`] (`f32`/`f64`). Training runs in
//! `f64`; the aliases below name the concrete types used by the pipeline.

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod numerics;
pub mod signal;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use numerics::Scalar;

/// Dense tensor in the training precision.
pub type Tensor = numerics::Tensor<f64>;
/// Gradient tape in the training precision.
pub type Tape<'a> = numerics::Tape<'a, f64>;
/// Feature matrix in the training precision.
pub type FeatureMatrix = signal::FeatureMatrix<f64>;
/// Articulatory trajectory in the training precision.
pub type Trajectory = signal::ArticulatoryTrajectory<f64>;
/// Audio waveform in the processing precision.
pub type Waveform = signal::Waveform<f64>;
/// Model weights in the training precision.
pub type ModelParams = model::ModelParams<f64>;
/// Paired utterance in the training precision.
pub type Utterance = corpus::Utterance<f64>;
/// Padded batch in the training precision.
pub type Batch = corpus::Batch<f64>;
/// Single-precision tensor, as stored on disk.
pub type Tensor32 = numerics::Tensor<f32>;
