//! Synthetic paired corpora: band-limited random trajectories pushed through a
//! fixed frame-wise map, so the ideal inverse is known.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::{make_splits, write_feature_file, write_target_file, CorpusLayout, Split, DEFAULT_RATIOS};
use crate::error::{Error, Result};
use crate::numerics::{mix_seed, Tensor};
use crate::signal::{normalize_utterance, ArticulatoryTrajectory, FeatureMatrix, MODEL_RATE, NUM_CHANNELS};

/// File name of the spec written at the corpus root.
pub const MANIFEST_FILE: &str = "synth.manifest";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    Linear,
    LinearTanh,
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MapKind::Linear => "linear",
            MapKind::LinearTanh => "linear+tanh",
        })
    }
}

impl FromStr for MapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(MapKind::Linear),
            "linear+tanh" | "tanh" => Ok(MapKind::LinearTanh),
            other => Err(Error::Config(format!("unknown map kind {other:?} (linear, linear+tanh)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub subjects: usize,
    pub utterances_per_subject: usize,
    /// Utterance duration range in seconds, inclusive.
    pub min_duration: f64,
    pub max_duration: f64,
    pub dim: usize,
    pub map: MapKind,
    /// Seeds the map matrix and every per-utterance generator.
    pub seed: u64,
    pub noise_std: f64,
    pub bandwidth_hz: f64,
    pub feature_name: String,
    pub split_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            subjects: 2,
            utterances_per_subject: 40,
            min_duration: 3.0,
            max_duration: 5.0,
            dim: 64,
            map: MapKind::Linear,
            seed: 0,
            noise_std: 0.0,
            bandwidth_hz: 8.0,
            feature_name: "SYNTH".into(),
            split_seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dim < NUM_CHANNELS {
            return bad(format!("feature dim {} below {NUM_CHANNELS}", self.dim));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz < MODEL_RATE / 2.0) {
            return bad(format!("bandwidth {} Hz outside (0, {})", self.bandwidth_hz, MODEL_RATE / 2.0));
        }
        if !(self.min_duration * MODEL_RATE >= 2.0 && self.min_duration <= self.max_duration && self.max_duration.is_finite()) {
            return bad(format!("duration range [{}, {}] s", self.min_duration, self.max_duration));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise std {}", self.noise_std));
        }
        if self.subjects == 0 || self.utterances_per_subject == 0 {
            return bad("need at least one subject and one utterance".into());
        }
        if self.feature_name.is_empty() || self.feature_name.contains(['/', '\\', '.', '\n']) {
            return bad(format!("feature name {:?}", self.feature_name));
        }
        Ok(())
    }

    pub fn subject_name(index: usize) -> String {
        format!("S{:02}", index + 1)
    }

    /// `key = value` lines, readable by [`SynthSpec::from_manifest`].
    pub fn to_manifest(&self) -> String {
        format!(
            "subjects = {}\nutterances_per_subject = {}\nmin_duration = {}\nmax_duration = {}\ndim = {}\nmap = {}\nseed = {}\nnoise_std = {}\nbandwidth_hz = {}\nfeature_name = {}\nsplit_seed = {}\n",
            self.subjects,
            self.utterances_per_subject,
            self.min_duration,
            self.max_duration,
            self.dim,
            self.map,
            self.seed,
            self.noise_std,
            self.bandwidth_hz,
            self.feature_name,
            self.split_seed
        )
    }

    /// Parses manifest text; missing keys keep their defaults.
    pub fn from_manifest(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            spec.set(key, value).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Assigns one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<V: FromStr>(key: &str, v: &str) -> std::result::Result<V, String> {
            v.parse().map_err(|_| format!("invalid value {v:?} for {key}"))
        }
        match key {
            "subjects" => self.subjects = num(key, value)?,
            "utterances_per_subject" => self.utterances_per_subject = num(key, value)?,
            "min_duration" => self.min_duration = num(key, value)?,
            "max_duration" => self.max_duration = num(key, value)?,
            "dim" => self.dim = num(key, value)?,
            "map" => self.map = value.parse().map_err(|e: Error| e.to_string())?,
            "seed" => self.seed = num(key, value)?,
            "noise_std" => self.noise_std = num(key, value)?,
            "bandwidth_hz" => self.bandwidth_hz = num(key, value)?,
            "feature_name" => self.feature_name = value.to_string(),
            "split_seed" => self.split_seed = num(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Seed of utterance `utterance` of subject `subject` (both 0-based).
    pub fn utterance_seed(&self, subject: usize, utterance: usize) -> u64 {
        mix_seed(mix_seed(self.seed, subject as u64 + 1), utterance as u64 + 1)
    }
}

/// `frames × 12` sum of random-phase sinusoids at DFT-grid frequencies below
/// `bandwidth_hz`, normalized per channel.
pub fn band_limited_trajectory(frames: usize, bandwidth_hz: f64, seed: u64) -> Result<ArticulatoryTrajectory<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = frames as f64;
    // bin k sits at k·rate/n Hz; keep at least one bin
    let bins = (((bandwidth_hz * n / MODEL_RATE).ceil() as usize).saturating_sub(1)).max(1);
    let mut data = vec![0.0; frames * NUM_CHANNELS];
    for c in 0..NUM_CHANNELS {
        for k in 1..=bins {
            let amp: f64 = rng.sample::<f64, _>(StandardNormal).abs();
            let phase = rng.gen::<f64>() * std::f64::consts::TAU;
            let w = std::f64::consts::TAU * k as f64 / n;
            for t in 0..frames {
                data[t * NUM_CHANNELS + c] += amp * (w * t as f64 + phase).cos();
            }
        }
    }
    normalize_utterance(&ArticulatoryTrajectory::new(Tensor::new(vec![frames, NUM_CHANNELS], data)?, MODEL_RATE)?)
}

/// Trajectory for one utterance; its duration is drawn from the spec's range.
pub fn gen_trajectories(spec: &SynthSpec, seed: u64) -> Result<ArticulatoryTrajectory<f64>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let secs = if spec.max_duration > spec.min_duration {
        rng.gen_range(spec.min_duration..=spec.max_duration)
    } else {
        spec.min_duration
    };
    let frames = (secs * MODEL_RATE).round() as usize;
    band_limited_trajectory(frames, spec.bandwidth_hz, mix_seed(seed, 0x7472_616a))
}

/// Seed-derived `D × 12` map with full column rank and entries of variance 1/12.
pub fn map_matrix(spec: &SynthSpec) -> Result<Tensor<f64>> {
    spec.validate()?;
    let d = spec.dim;
    let std = 1.0 / (NUM_CHANNELS as f64).sqrt();
    for attempt in 0u64.. {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0x6d61_7000 + attempt));
        let m = Tensor::from_fn(&[d, NUM_CHANNELS], |_| std * rng.sample::<f64, _>(StandardNormal));
        if min_gram_schmidt_norm(&m) > 1e-6 {
            return Ok(m);
        }
    }
    unreachable!("rank check loop only exits by returning")
}

/// Smallest column residual norm after Gram-Schmidt, relative to the column norm.
fn min_gram_schmidt_norm(m: &Tensor<f64>) -> f64 {
    let (d, k) = (m.shape()[0], m.shape()[1]);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut worst = f64::INFINITY;
    for c in 0..k {
        let col: Vec<f64> = (0..d).map(|r| m.at(r, c)).collect();
        let norm0 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = col;
        for q in &basis {
            let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.min(if norm0 > 0.0 { norm / norm0 } else { 0.0 });
        if norm > 0.0 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    worst
}

/// Applies the frame-wise map `M·x` (optionally through tanh) and adds
/// Gaussian noise drawn from `noise_seed`.
pub fn forward_map(
    traj: &ArticulatoryTrajectory<f64>,
    spec: &SynthSpec,
    map: &Tensor<f64>,
    noise_seed: u64,
) -> Result<FeatureMatrix<f64>> {
    let d = spec.dim;
    if map.shape() != [d, NUM_CHANNELS] {
        return Err(Error::dim("forward_map", format!("map {:?} for dim {d}", map.shape())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let x = traj.frames();
    let frames = Tensor::from_fn(&[traj.len(), d], |i| {
        let (t, r) = (i / d, i % d);
        let mut v: f64 = map.row(r).iter().zip(x.row(t)).map(|(a, b)| a * b).sum();
        if spec.map == MapKind::LinearTanh {
            v = v.tanh();
        }
        if spec.noise_std > 0.0 {
            v += spec.noise_std * rng.sample::<f64, _>(StandardNormal);
        }
        v
    });
    FeatureMatrix::new(frames, MODEL_RATE, spec.feature_name.clone())
}

/// One generated utterance.
#[derive(Clone, Debug)]
pub struct SynthUtterance {
    pub subject: String,
    pub sentence: u32,
    pub features: FeatureMatrix<f64>,
    pub targets: ArticulatoryTrajectory<f64>,
}

/// Generates every utterance in memory, subjects in order, sentences numbered from 1.
pub fn gen_utterances(spec: &SynthSpec) -> Result<Vec<SynthUtterance>> {
    let map = map_matrix(spec)?;
    let mut out = Vec::with_capacity(spec.subjects * spec.utterances_per_subject);
    for s in 0..spec.subjects {
        for u in 0..spec.utterances_per_subject {
            let seed = spec.utterance_seed(s, u);
            let targets = gen_trajectories(spec, seed)?;
            let features = forward_map(&targets, spec, &map, mix_seed(seed, 0x6e6f_6973))?;
            out.push(SynthUtterance {
                subject: SynthSpec::subject_name(s),
                sentence: u as u32 + 1,
                features,
                targets,
            });
        }
    }
    Ok(out)
}

/// Writes the corpus, the split manifests for `spec.split_seed`, and the spec manifest.
pub fn gen_corpus(spec: &SynthSpec, out_dir: &Path) -> Result<CorpusLayout> {
    spec.validate()?;
    let layout = CorpusLayout::new(out_dir);
    for s in 0..spec.subjects {
        let dir = layout.subject_dir(&SynthSpec::subject_name(s));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    for u in gen_utterances(spec)? {
        write_target_file(&layout.target_path(&u.subject, u.sentence), &u.targets)?;
        write_feature_file(&layout.feature_path(&u.subject, u.sentence, &spec.feature_name), &u.features)?;
    }
    let ids: Vec<u32> = (1..=spec.utterances_per_subject as u32).collect();
    let split: Split = make_splits(&ids, DEFAULT_RATIOS, spec.split_seed)?;
    let split_dir = layout.split_dir(spec.split_seed);
    fs::create_dir_all(&split_dir).map_err(|e| Error::io(&split_dir, e))?;
    layout.write_split(&split)?;
    let manifest = out_dir.join(MANIFEST_FILE);
    fs::write(&manifest, spec.to_manifest()).map_err(|e| Error::io(&manifest, e))?;
    Ok(layout)
}
