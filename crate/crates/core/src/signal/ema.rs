use crate::error::{Error, Result};
use crate::numerics::Scalar;

use super::filter::{filtfilt, Butterworth};
use super::{ArticulatoryTrajectory, FeatureMatrix, EMA_RATE, MODEL_RATE};

/// Butterworth order used for EMA smoothing (per pass).
pub const EMA_FILTER_ORDER: usize = 4;
/// Largest tolerated frame-count gap between features and targets.
pub const MAX_ALIGN_GAP: usize = 5;

/// Zero-phase low-pass of every channel.
pub fn lowpass_ema<T: Scalar>(t: &ArticulatoryTrajectory<T>, cutoff_hz: f64) -> Result<ArticulatoryTrajectory<T>> {
    let filter = Butterworth::<T>::lowpass(EMA_FILTER_ORDER, cutoff_hz, t.rate())?;
    t.map_channels(t.rate(), |c| Ok(filtfilt(&filter, c)))
}

/// Linear-interpolation rate conversion to `floor(T · target / rate)` frames.
///
/// Intended for already low-passed trajectories; no anti-alias filter is applied.
pub fn resample_trajectory<T: Scalar>(t: &ArticulatoryTrajectory<T>, target_rate: f64) -> Result<ArticulatoryTrajectory<T>> {
    if !(target_rate > 0.0) {
        return Err(Error::Parameter(format!("target rate {target_rate} must be positive")));
    }
    let ratio = t.rate() / target_rate;
    let out_len = (t.len() as f64 * target_rate / t.rate() + 1e-9).floor() as usize;
    t.map_channels(target_rate, |c| {
        Ok((0..out_len)
            .map(|n| {
                let pos = n as f64 * ratio;
                let i = pos.floor() as usize;
                let frac = T::lit(pos - i as f64);
                if i + 1 < c.len() {
                    c[i] + (c[i + 1] - c[i]) * frac
                } else {
                    c[i]
                }
            })
            .collect())
    })
}

/// 250 Hz → 100 Hz conversion of a low-passed trajectory.
pub fn downsample_ema<T: Scalar>(t: &ArticulatoryTrajectory<T>) -> Result<ArticulatoryTrajectory<T>> {
    if (t.rate() - EMA_RATE).abs() > 1e-9 {
        return Err(Error::Parameter(format!("expected {EMA_RATE} Hz EMA, got {} Hz", t.rate())));
    }
    resample_trajectory(t, MODEL_RATE)
}

/// Per-channel mean removal and unit population variance; constant channels become zero.
pub fn normalize_utterance<T: Scalar>(t: &ArticulatoryTrajectory<T>) -> Result<ArticulatoryTrajectory<T>> {
    if t.len() < 2 {
        return Err(Error::InputTooShort(format!("normalization needs >= 2 frames, got {}", t.len())));
    }
    let n = T::from_usize(t.len()).unwrap();
    t.map_channels(t.rate(), |c| {
        let mean = c.iter().copied().sum::<T>() / n;
        let var = c.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let std = var.sqrt();
        if std <= T::lit(1e-12) * mean.abs().max(T::one()) {
            return Ok(vec![T::zero(); c.len()]);
        }
        Ok(c.iter().map(|&v| (v - mean) / std).collect())
    })
}

/// Truncates both streams from the end to the shorter length.
pub fn align<T: Scalar>(
    f: &FeatureMatrix<T>,
    t: &ArticulatoryTrajectory<T>,
) -> Result<(FeatureMatrix<T>, ArticulatoryTrajectory<T>)> {
    if f.len().abs_diff(t.len()) > MAX_ALIGN_GAP {
        return Err(Error::Misalignment {
            features: f.len(),
            targets: t.len(),
        });
    }
    let n = f.len().min(t.len());
    Ok((f.truncated(n), t.truncated(n)))
}
