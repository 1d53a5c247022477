use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::Scalar;

use super::Waveform;

/// Zero crossings of the interpolation kernel on each side of its centre.
const HALF_ZERO_CROSSINGS: f64 = 32.0;
/// Passband edge as a fraction of the lower Nyquist frequency.
const ROLLOFF: f64 = 0.95;

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn blackman(u: f64) -> f64 {
    // u in [-1, 1], peak at 0
    0.42 + 0.5 * (PI * u).cos() + 0.08 * (2.0 * PI * u).cos()
}

/// Band-limited resampling with a Blackman-windowed sinc kernel.
///
/// The output has `round(len · target / source)` samples. Equal rates return
/// the input unchanged; an empty input yields an empty output.
pub fn resample_audio<T: Scalar>(w: &Waveform<T>, target_rate: u32) -> Result<Waveform<T>> {
    if target_rate == 0 {
        return Err(Error::Parameter("target rate must be positive".into()));
    }
    if w.rate == target_rate {
        return Ok(w.clone());
    }
    let (src, dst) = (w.rate as u64, target_rate as u64);
    let n_in = w.samples.len() as u64;
    let n_out = ((n_in * dst + src / 2) / src) as usize;
    let x: Vec<f64> = w.samples.iter().map(|v| v.to_f64_lossy()).collect();

    // kernel cutoff relative to the input rate's Nyquist
    let cutoff = ROLLOFF * (dst as f64 / src as f64).min(1.0);
    let half_width = HALF_ZERO_CROSSINGS / cutoff;
    let step = src as f64 / dst as f64;

    let mut out = Vec::with_capacity(n_out);
    for n in 0..n_out {
        let centre = n as f64 * step;
        let lo = (centre - half_width).ceil().max(0.0) as usize;
        let hi = ((centre + half_width).floor() as usize).min(x.len().saturating_sub(1));
        let mut acc = 0.0;
        for (i, &xi) in x.iter().enumerate().take(hi + 1).skip(lo) {
            let offset = centre - i as f64;
            acc += xi * cutoff * sinc(cutoff * offset) * blackman(offset / half_width);
        }
        out.push(T::lit(acc));
    }
    Waveform::new(out, target_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Amplitude of the `freq` component via a single DFT bin over `x`.
    fn tone_amplitude(x: &[f64], rate: f64, freq: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (n, &v) in x.iter().enumerate() {
            let ph = 2.0 * PI * freq * n as f64 / rate;
            re += v * ph.cos();
            im -= v * ph.sin();
        }
        2.0 * (re * re + im * im).sqrt() / x.len() as f64
    }

    #[test]
    fn identity_rate_is_unchanged() {
        let w = Waveform::new(vec![0.1f64, -0.2, 0.3], 16_000).unwrap();
        assert_eq!(resample_audio(&w, 16_000).unwrap(), w);
    }

    #[test]
    fn one_second_at_48k_gives_16k_samples() {
        let w = Waveform::new(vec![0.0f64; 48_000], 48_000).unwrap();
        let r = resample_audio(&w, 16_000).unwrap();
        assert_eq!(r.rate, 16_000);
        assert!((r.len() as i64 - 16_000).abs() <= 1);
    }

    #[test]
    fn empty_input_gives_empty_output() {
        let w = Waveform::<f64>::new(vec![], 48_000).unwrap();
        assert!(resample_audio(&w, 16_000).unwrap().is_empty());
    }

    #[test]
    fn tone_amplitude_preserved_within_half_db() {
        let samples: Vec<f64> = (0..48_000)
            .map(|n| 0.5 * (2.0 * PI * 1000.0 * n as f64 / 48_000.0).sin())
            .collect();
        let w = Waveform::new(samples, 48_000).unwrap();
        let r = resample_audio(&w, 16_000).unwrap();
        // skip kernel edge effects: one full second of 1 kHz has an integer number of cycles
        let inner = &r.samples[1600..14_400];
        let amp = tone_amplitude(inner, 16_000.0, 1000.0);
        let db = 20.0 * (amp / 0.5).log10();
        assert!(db.abs() < 0.5, "gain {db} dB");
    }
}
