//! Corpus-building stages: `preprocess`, `mfcc` and `synth`.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use aai_core::corpus::{make_splits, write_feature_file, write_target_file, CorpusLayout, DEFAULT_RATIOS};
use aai_core::signal::{
    align, downsample_ema, lowpass_ema, mfcc, normalize_utterance, read_ema_csv, read_wav, resample_audio,
    resample_trajectory, write_wav, AUDIO_RATE, EMA_CUTOFF_HZ, EMA_RATE, MODEL_RATE,
};
use aai_core::synth::{gen_corpus, SynthSpec};
use aai_core::{Error, Waveform};
use anyhow::{Context, Result};

use crate::UsageError;

const MFCC_NAME: &str = "MFCC";

fn sorted_subdirs(root: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        if entry.path().is_dir() {
            out.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    out.sort();
    Ok(out)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(())
}

fn load_16k(path: &Path) -> Result<Waveform> {
    let w: Waveform = read_wav(path)?;
    Ok(if w.rate == AUDIO_RATE { w } else { resample_audio(&w, AUDIO_RATE)? })
}

/// Counts of what a corpus-building stage wrote.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct BuildSummary {
    pub subjects: usize,
    pub utterances: usize,
}

/// Turns `raw/<subject>/<id>.{wav,csv}` pairs (EMA CSV at `ema_rate` Hz) into
/// an aligned corpus: 16 kHz WAV, 100 Hz normalized targets and MFCC features,
/// plus the split for `split_seed` over the sentence ids every subject has.
pub fn preprocess(raw: &Path, corpus: &Path, ema_rate: f64, split_seed: u64) -> Result<BuildSummary> {
    let layout = CorpusLayout::new(corpus);
    let subjects = sorted_subdirs(raw)?;
    if subjects.is_empty() {
        return Err(UsageError(format!("no subject directories under {}", raw.display())).into());
    }
    let mut common: Option<BTreeSet<u32>> = None;
    let mut summary = BuildSummary::default();
    for subject in &subjects {
        let src = raw.join(subject);
        let mut ids = BTreeSet::new();
        for entry in fs::read_dir(&src).map_err(|e| Error::io(&src, e))? {
            let path = entry.map_err(|e| Error::io(&src, e))?.path();
            if path.extension().is_some_and(|e| e == "csv") && path.with_extension("wav").exists() {
                let stem = path.file_stem().unwrap_or_default().to_string_lossy();
                let id: u32 = stem
                    .parse()
                    .map_err(|_| Error::Format { path: path.clone(), detail: "sentence ids must be unsigned integers".into() })?;
                ids.insert(id);
            }
        }
        create_dir(&layout.subject_dir(subject))?;
        for &id in &ids {
            let csv = src.join(format!("{id}.csv"));
            let ema = read_ema_csv::<f64>(&csv, ema_rate)?;
            let smooth = lowpass_ema(&ema, EMA_CUTOFF_HZ).with_context(|| format!("filtering {}", csv.display()))?;
            let at_model_rate = if ema_rate == EMA_RATE { downsample_ema(&smooth)? } else { resample_trajectory(&smooth, MODEL_RATE)? };
            let targets = normalize_utterance(&at_model_rate).with_context(|| format!("normalizing {}", csv.display()))?;

            let wav_path = src.join(format!("{id}.wav"));
            let audio = load_16k(&wav_path)?;
            write_wav(&layout.wav_path(subject, id), &audio)?;
            let features = mfcc(&audio).with_context(|| format!("MFCC of {}", wav_path.display()))?;
            let (features, targets) = align(&features, &targets).with_context(|| format!("aligning {subject}/{id}"))?;
            write_target_file(&layout.target_path(subject, id), &targets)?;
            write_feature_file(&layout.feature_path(subject, id, MFCC_NAME), &features)?;
            summary.utterances += 1;
        }
        common = Some(match common {
            None => ids,
            Some(c) => c.intersection(&ids).copied().collect(),
        });
        summary.subjects += 1;
    }
    let ids: Vec<u32> = common.unwrap_or_default().into_iter().collect();
    layout.write_split(&make_splits(&ids, DEFAULT_RATIOS, split_seed)?)?;
    Ok(summary)
}

/// Writes `<id>.aaif-MFCC` next to every `<id>.wav` of the chosen subjects.
pub fn extract_mfcc(corpus: &Path, subjects: &[String]) -> Result<BuildSummary> {
    let layout = CorpusLayout::new(corpus);
    let subjects = if subjects.is_empty() { layout.subjects()? } else { subjects.to_vec() };
    let mut summary = BuildSummary::default();
    for subject in &subjects {
        for id in layout.sentences_with(subject, "wav")? {
            let wav = layout.wav_path(subject, id);
            let features = mfcc(&load_16k(&wav)?).with_context(|| format!("MFCC of {}", wav.display()))?;
            write_feature_file(&layout.feature_path(subject, id, MFCC_NAME), &features)?;
            summary.utterances += 1;
        }
        summary.subjects += 1;
    }
    Ok(summary)
}

/// Applies `key=value` overrides to a spec.
pub fn apply_overrides(spec: &mut SynthSpec, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| UsageError(format!("expected key=value, got {item:?}")))?;
        spec.set(key.trim(), value.trim()).map_err(UsageError)?;
    }
    spec.validate()?;
    Ok(())
}

pub fn synth(spec: &SynthSpec, out: &Path) -> Result<BuildSummary> {
    gen_corpus(spec, out)?;
    Ok(BuildSummary { subjects: spec.subjects, utterances: spec.subjects * spec.utterances_per_subject })
}
