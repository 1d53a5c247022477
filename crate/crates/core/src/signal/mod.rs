//! DSP frontend: audio resampling and MFCCs, EMA filtering, rate conversion,
//! normalization and stream alignment.

mod ema;
mod filter;
mod io;
mod mfcc;
mod resample;

pub use ema::{align, downsample_ema, lowpass_ema, normalize_utterance, resample_trajectory, MAX_ALIGN_GAP};
pub use filter::{filtfilt, sosfilt, Biquad, Butterworth};
pub use io::{read_ema_csv, read_wav, write_ema_csv, write_wav};
pub use mfcc::{log_mel_energies, mfcc, MfccConfig};
pub use resample::resample_audio;

use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};

/// Articulatory channel names in canonical (table) order.
pub const CHANNELS: [&str; 12] = [
    "ULx", "ULy", "LLx", "LLy", "Jawx", "Jawy", "TTx", "TTy", "TDx", "TDy", "TBx", "TBy",
];
pub const NUM_CHANNELS: usize = CHANNELS.len();

/// Raw EMA sampling rate.
pub const EMA_RATE: f64 = 250.0;
/// Frame rate of every model input and target.
pub const MODEL_RATE: f64 = 100.0;
/// Audio rate expected by the feature extractors.
pub const AUDIO_RATE: u32 = 16_000;
/// Default EMA low-pass cutoff in Hz.
pub const EMA_CUTOFF_HZ: f64 = 25.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Waveform<T> {
    pub samples: Vec<T>,
    pub rate: u32,
}

impl<T: Scalar> Waveform<T> {
    pub fn new(samples: Vec<T>, rate: u32) -> Result<Self> {
        if rate == 0 {
            return Err(Error::Parameter("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Numeric(format!("non-finite audio sample at index {i}")));
        }
        Ok(Self { samples, rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.rate as f64
    }
}

/// Twelve articulatory channels, `frames × 12`, in [`CHANNELS`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct ArticulatoryTrajectory<T> {
    frames: Tensor<T>,
    rate: f64,
}

impl<T: Scalar> ArticulatoryTrajectory<T> {
    pub fn new(frames: Tensor<T>, rate: f64) -> Result<Self> {
        if frames.rank() != 2 || frames.shape()[1] != NUM_CHANNELS {
            return Err(Error::dim(
                "trajectory",
                format!("expected T x {NUM_CHANNELS}, got {:?}", frames.shape()),
            ));
        }
        if !(rate > 0.0) {
            return Err(Error::Parameter(format!("trajectory rate {rate} must be positive")));
        }
        Ok(Self { frames, rate })
    }

    /// Builds from per-channel sample vectors of equal length.
    pub fn from_channels(channels: &[Vec<T>], rate: f64) -> Result<Self> {
        if channels.len() != NUM_CHANNELS {
            return Err(Error::dim("trajectory", format!("{} channels", channels.len())));
        }
        let n = channels[0].len();
        if channels.iter().any(|c| c.len() != n) {
            return Err(Error::dim("trajectory", "channels differ in length"));
        }
        let frames = Tensor::from_fn(&[n, NUM_CHANNELS], |i| channels[i % NUM_CHANNELS][i / NUM_CHANNELS]);
        Self::new(frames, rate)
    }

    pub fn frames(&self) -> &Tensor<T> {
        &self.frames
    }

    pub fn into_frames(self) -> Tensor<T> {
        self.frames
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, c: usize) -> Vec<T> {
        (0..self.len()).map(|t| self.frames.at(t, c)).collect()
    }

    pub(crate) fn map_channels(&self, rate: f64, mut f: impl FnMut(&[T]) -> Result<Vec<T>>) -> Result<Self> {
        let chans = (0..NUM_CHANNELS)
            .map(|c| f(&self.channel(c)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_channels(&chans, rate)
    }

    pub fn truncated(&self, len: usize) -> Self {
        let len = len.min(self.len());
        let data = self.frames.data()[..len * NUM_CHANNELS].to_vec();
        Self {
            frames: Tensor::new(vec![len, NUM_CHANNELS], data).expect("prefix shape"),
            rate: self.rate,
        }
    }
}

/// Time-major feature frames with a declared rate and feature name.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<T> {
    frames: Tensor<T>,
    rate: f64,
    name: String,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(frames: Tensor<T>, rate: f64, name: impl Into<String>) -> Result<Self> {
        if frames.rank() != 2 || frames.shape()[1] == 0 {
            return Err(Error::dim(
                "feature matrix",
                format!("expected T x D with D > 0, got {:?}", frames.shape()),
            ));
        }
        Ok(Self {
            frames,
            rate,
            name: name.into(),
        })
    }

    pub fn frames(&self) -> &Tensor<T> {
        &self.frames
    }

    pub fn into_frames(self) -> Tensor<T> {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.frames.shape()[1]
    }

    pub fn len(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn truncated(&self, len: usize) -> Self {
        let len = len.min(self.len());
        let d = self.dim();
        Self {
            frames: Tensor::new(vec![len, d], self.frames.data()[..len * d].to_vec()).expect("prefix shape"),
            rate: self.rate,
            name: self.name.clone(),
        }
    }
}
