use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::numerics::Scalar;
use crate::signal::align;

use super::batch::Utterance;
use super::format::{read_feature_file, read_target_file};
use super::split::{read_split, write_split, Split};

const SPLITS_DIR: &str = "splits";

/// `root/<subject>/<sentence>.{wav|aait|aaif-<feature>}` plus
/// `root/splits/<seed>/{train,val,test}.txt`.
#[derive(Clone, Debug)]
pub struct CorpusLayout {
    root: PathBuf,
}

impl CorpusLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn subject_dir(&self, subject: &str) -> PathBuf {
        self.root.join(subject)
    }

    pub fn wav_path(&self, subject: &str, sentence: u32) -> PathBuf {
        self.subject_dir(subject).join(format!("{sentence}.wav"))
    }

    pub fn target_path(&self, subject: &str, sentence: u32) -> PathBuf {
        self.subject_dir(subject).join(format!("{sentence}.aait"))
    }

    pub fn feature_path(&self, subject: &str, sentence: u32, feature: &str) -> PathBuf {
        self.subject_dir(subject).join(format!("{sentence}.aaif-{feature}"))
    }

    pub fn split_dir(&self, seed: u64) -> PathBuf {
        self.root.join(SPLITS_DIR).join(seed.to_string())
    }

    pub fn write_split(&self, split: &Split) -> Result<()> {
        write_split(&self.split_dir(split.seed), split)
    }

    pub fn read_split(&self, seed: u64) -> Result<Split> {
        read_split(&self.split_dir(seed), seed)
    }

    /// Subject directories, sorted.
    pub fn subjects(&self) -> Result<Vec<String>> {
        let entries = fs::read_dir(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let mut out = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&self.root, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if entry.path().is_dir() && name != SPLITS_DIR && !name.starts_with('.') {
                out.push(name);
            }
        }
        out.sort();
        Ok(out)
    }

    /// Sentence ids in a subject directory that have a file with `extension`.
    pub fn sentences_with(&self, subject: &str, extension: &str) -> Result<Vec<u32>> {
        let dir = self.subject_dir(subject);
        let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut ids = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some((stem, ext)) = name.split_once('.') {
                if ext == extension {
                    if let Ok(id) = stem.parse() {
                        ids.push(id);
                    }
                }
            }
        }
        ids.sort_unstable();
        Ok(ids)
    }

    /// Loads aligned utterances; feature and target files must already agree
    /// to within the alignment bound and are truncated to the shorter one.
    pub fn load_utterances<T: Scalar>(&self, subject: &str, feature: &str, sentences: &[u32]) -> Result<Vec<Utterance<T>>> {
        sentences
            .iter()
            .map(|&id| {
                let f = read_feature_file(&self.feature_path(subject, id, feature))?;
                let t = read_target_file(&self.target_path(subject, id))?;
                let (f, t) = align(&f, &t)?;
                Utterance::new(subject, id, f, t)
            })
            .collect()
    }
}
