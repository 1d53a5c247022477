use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::corpus::DEFAULT_BATCH_SIZE;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    /// One model per subject from scratch.
    SubjectSpecific,
    /// One model on the union of all subjects' training data.
    Pooled,
    /// Per-subject fine-tuning from a pooled checkpoint.
    FineTuned,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::SubjectSpecific, Regime::Pooled, Regime::FineTuned];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::SubjectSpecific => "ss",
            Regime::Pooled => "pooled",
            Regime::FineTuned => "ft",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ss" | "subject-specific" => Ok(Regime::SubjectSpecific),
            "pooled" | "p" => Ok(Regime::Pooled),
            "ft" | "fine-tuned" => Ok(Regime::FineTuned),
            other => Err(Error::Config(format!("unknown regime {other:?} (ss, pooled, ft)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub regime: Regime,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub scheduler_factor: f64,
    pub scheduler_patience: usize,
    pub min_lr: f64,
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub warm_start: Option<PathBuf>,
    pub sort_by_length: bool,
}

impl TrainConfig {
    pub fn new(regime: Regime) -> Self {
        Self {
            regime,
            learning_rate: 1e-4,
            batch_size: DEFAULT_BATCH_SIZE,
            scheduler_factor: 0.5,
            scheduler_patience: 5,
            min_lr: 1e-6,
            early_stop_patience: 15,
            max_epochs: 300,
            seed: 0,
            warm_start: None,
            sort_by_length: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.scheduler_factor > 0.0 && self.scheduler_factor < 1.0) {
            return Err(Error::Config(format!("scheduler factor {} outside (0, 1)", self.scheduler_factor)));
        }
        if !(self.min_lr >= 0.0) {
            return Err(Error::Config(format!("min_lr {} must be non-negative", self.min_lr)));
        }
        if self.regime == Regime::FineTuned && self.warm_start.is_none() {
            return Err(Error::Config("fine-tuning requires a warm-start checkpoint".into()));
        }
        Ok(())
    }
}
