use std::f64::consts::PI;

use aai_core::numerics::Tensor;
use aai_core::signal::{
    downsample_ema, lowpass_ema, mfcc, normalize_utterance, read_wav, resample_audio, write_wav, ArticulatoryTrajectory,
    MfccConfig, Waveform, AUDIO_RATE, EMA_CUTOFF_HZ, EMA_RATE,
};
use proptest::prelude::*;

fn tone(freq: f64, rate: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (2.0 * PI * freq * i as f64 / rate).sin()).collect()
}

/// Steady-state gain in dB, measured away from the edges.
fn gain_db(freq: f64) -> f64 {
    let n = 2500;
    let x = tone(freq, EMA_RATE, n);
    let t = ArticulatoryTrajectory::from_channels(&vec![x.clone(); 12], EMA_RATE).unwrap();
    let y = lowpass_ema(&t, EMA_CUTOFF_HZ).unwrap().channel(0);
    let rms = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64).sqrt();
    20.0 * (rms(&y[500..2000]) / rms(&x[500..2000])).log10()
}

#[test]
fn lowpass_band_edges() {
    assert!(gain_db(5.0).abs() <= 1.0, "5 Hz: {} dB", gain_db(5.0));
    assert!(gain_db(80.0) <= -30.0, "80 Hz: {} dB", gain_db(80.0));
}

#[test]
fn lowpass_is_zero_phase_on_centred_impulse() {
    let mut x = vec![0.0f64; 1251];
    x[625] = 1.0;
    let t = ArticulatoryTrajectory::from_channels(&vec![x; 12], EMA_RATE).unwrap();
    let y = lowpass_ema(&t, EMA_CUTOFF_HZ).unwrap().channel(3);
    let asym = (0..y.len()).map(|i| (y[i] - y[y.len() - 1 - i]).abs()).fold(0.0, f64::max);
    assert!(asym < 1e-8, "asymmetry {asym}");
}

fn pipeline(t: &ArticulatoryTrajectory<f64>) -> ArticulatoryTrajectory<f64> {
    normalize_utterance(&downsample_ema(&lowpass_ema(t, EMA_CUTOFF_HZ).unwrap()).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pipeline_commutes_with_positive_affine(
        len in 50usize..600,
        scale in 0.01f64..100.0,
        offset in -50.0f64..50.0,
        seed in any::<u32>(),
    ) {
        let chans: Vec<Vec<f64>> = (0..12)
            .map(|c| (0..len).map(|i| ((i as f64) * 0.05 * (c + 1) as f64 + seed as f64).sin() + 0.1 * c as f64).collect())
            .collect();
        let t = ArticulatoryTrajectory::from_channels(&chans, EMA_RATE).unwrap();
        let scaled: Vec<Vec<f64>> = chans.iter().map(|c| c.iter().map(|v| scale * v + offset).collect()).collect();
        let ts = ArticulatoryTrajectory::from_channels(&scaled, EMA_RATE).unwrap();
        let diff = pipeline(&t).frames().sub(pipeline(&ts).frames()).unwrap().max_abs();
        prop_assert!(diff < 1e-8, "diff {}", diff);
    }

    #[test]
    fn mfcc_frame_count_formula(n in 400usize..24_000) {
        let w = Waveform::new(tone(440.0, 16_000.0, n), AUDIO_RATE).unwrap();
        let f = mfcc(&w).unwrap();
        prop_assert_eq!(f.len(), 1 + (n - 400) / 160);
        prop_assert_eq!(f.dim(), 13);
        prop_assert_eq!(MfccConfig::default().frame_count(n), f.len());
    }

    #[test]
    fn normalize_is_idempotent(len in 2usize..300, seed in any::<u16>()) {
        let chans: Vec<Vec<f64>> = (0..12)
            .map(|c| (0..len).map(|i| ((i * 31 + c * 7 + seed as usize) % 97) as f64 * 0.3 - 4.0).collect())
            .collect();
        let once = normalize_utterance(&ArticulatoryTrajectory::from_channels(&chans, 100.0).unwrap()).unwrap();
        let twice = normalize_utterance(&once).unwrap();
        prop_assert!(once.frames().sub(twice.frames()).unwrap().max_abs() < 1e-12);
    }
}

#[test]
fn mfcc_examples() {
    let one_sec = Waveform::new(tone(300.0, 16_000.0, 16_000), AUDIO_RATE).unwrap();
    assert_eq!(mfcc(&one_sec).unwrap().len(), 98);
    let short = Waveform::new(vec![0.0; 6_320], AUDIO_RATE).unwrap();
    assert_eq!(mfcc(&short).unwrap().len(), 38);
    let too_short = Waveform::new(vec![0.0; 300], AUDIO_RATE).unwrap();
    assert!(mfcc(&too_short).is_err());
}

#[test]
fn wav_to_mfcc_through_disk_and_resampling() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("1.wav");
    let w = Waveform::new(tone(220.0, 22_050.0, 22_050).iter().map(|v| 0.5 * v).collect(), 22_050).unwrap();
    write_wav(&path, &w).unwrap();
    let back: Waveform<f64> = read_wav(&path).unwrap();
    assert_eq!(back.rate, 22_050);
    let at16k = resample_audio(&back, AUDIO_RATE).unwrap();
    assert_eq!(at16k.len(), 16_000);
    let f = mfcc(&at16k).unwrap();
    assert_eq!((f.len(), f.dim(), f.rate()), (98, 13, 100.0));
    assert!(f.frames().is_finite());
}

#[test]
fn downsampled_lengths() {
    for (n, expect) in [(500, 200), (250, 100), (501, 200)] {
        let t = ArticulatoryTrajectory::<f64>::new(Tensor::zeros(&[n, 12]), EMA_RATE).unwrap();
        assert_eq!(downsample_ema(&t).unwrap().len(), expect);
    }
}
