use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftNum, FftPlanner};

use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};

use super::{FeatureMatrix, Waveform, AUDIO_RATE, MODEL_RATE};

/// Frozen MFCC recipe: 25 ms Hann window, 10 ms hop, 512-point spectrum,
/// 26 mel filters over 0–8 kHz, log floor 1e-10, orthonormal DCT-II, c0..c12.
#[derive(Clone, Debug, PartialEq)]
pub struct MfccConfig {
    pub window: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub num_filters: usize,
    pub num_coeffs: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            window: 400,
            hop: 160,
            fft_size: 512,
            num_filters: 26,
            num_coeffs: 13,
            low_hz: 0.0,
            high_hz: 8000.0,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn frame_count(&self, samples: usize) -> usize {
        if samples < self.window {
            0
        } else {
            1 + (samples - self.window) / self.hop
        }
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// `num_filters × (fft_size/2 + 1)` triangular weights.
fn mel_filterbank(cfg: &MfccConfig, rate: f64) -> Vec<Vec<f64>> {
    let bins = cfg.fft_size / 2 + 1;
    let (lo, hi) = (hz_to_mel(cfg.low_hz), hz_to_mel(cfg.high_hz));
    let edges: Vec<f64> = (0..cfg.num_filters + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.num_filters + 1) as f64))
        .collect();
    (0..cfg.num_filters)
        .map(|m| {
            let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * rate / cfg.fft_size as f64;
                    if f <= l || f >= r {
                        0.0
                    } else if f <= c {
                        (f - l) / (c - l)
                    } else {
                        (r - f) / (r - c)
                    }
                })
                .collect()
        })
        .collect()
}

fn check_input<T: Scalar>(w: &Waveform<T>, cfg: &MfccConfig) -> Result<()> {
    if w.rate != AUDIO_RATE {
        return Err(Error::Parameter(format!(
            "MFCC expects {AUDIO_RATE} Hz audio, got {} Hz",
            w.rate
        )));
    }
    if w.len() < cfg.window {
        return Err(Error::InputTooShort(format!(
            "{} samples, need at least {}",
            w.len(),
            cfg.window
        )));
    }
    Ok(())
}

/// Log mel filterbank energies, `frames × num_filters`.
pub fn log_mel_energies<T: Scalar + FftNum>(w: &Waveform<T>, cfg: &MfccConfig) -> Result<Tensor<T>> {
    check_input(w, cfg)?;
    let frames = cfg.frame_count(w.len());
    let bank = mel_filterbank(cfg, w.rate as f64);
    let hann: Vec<T> = (0..cfg.window)
        .map(|n| T::lit(0.5 - 0.5 * (2.0 * PI * n as f64 / cfg.window as f64).cos()))
        .collect();
    let fft = FftPlanner::<T>::new().plan_fft_forward(cfg.fft_size);
    let bins = cfg.fft_size / 2 + 1;
    let mut buf = vec![Complex::new(T::zero(), T::zero()); cfg.fft_size];
    let mut power = vec![0.0f64; bins];
    let mut out = Vec::with_capacity(frames * cfg.num_filters);
    for f in 0..frames {
        let start = f * cfg.hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            let v = if i < cfg.window { w.samples[start + i] * hann[i] } else { T::zero() };
            *slot = Complex::new(v, T::zero());
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr().to_f64_lossy();
        }
        for filter in &bank {
            let e: f64 = filter.iter().zip(&power).map(|(w, p)| w * p).sum();
            out.push(T::lit(e.max(cfg.log_floor).ln()));
        }
    }
    Tensor::new(vec![frames, cfg.num_filters], out)
}

/// MFCCs at 100 frames/s: `1 + floor((N − 400) / 160)` frames of 13 coefficients (c0 first).
pub fn mfcc<T: Scalar + FftNum>(w: &Waveform<T>) -> Result<FeatureMatrix<T>> {
    let cfg = MfccConfig::default();
    let logmel = log_mel_energies(w, &cfg)?;
    let n = cfg.num_filters;
    let dct: Vec<Vec<f64>> = (0..cfg.num_coeffs)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            (0..n)
                .map(|i| scale * (PI * k as f64 * (i as f64 + 0.5) / n as f64).cos())
                .collect()
        })
        .collect();
    let frames = logmel.shape()[0];
    let mut out = Vec::with_capacity(frames * cfg.num_coeffs);
    for f in 0..frames {
        let row = logmel.row(f);
        for basis in &dct {
            let c: f64 = basis.iter().zip(row).map(|(b, v)| b * v.to_f64_lossy()).sum();
            out.push(T::lit(c));
        }
    }
    FeatureMatrix::new(Tensor::new(vec![frames, cfg.num_coeffs], out)?, MODEL_RATE, "MFCC")
}
