use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Published size classes plus a tiny class for tests and synthetic runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SizeClass {
    Tiny,
    Small,
    Medium,
    Large,
}

impl SizeClass {
    pub const ALL: [SizeClass; 4] = [SizeClass::Tiny, SizeClass::Small, SizeClass::Medium, SizeClass::Large];

    pub fn as_str(self) -> &'static str {
        match self {
            SizeClass::Tiny => "tiny",
            SizeClass::Small => "s",
            SizeClass::Medium => "m",
            SizeClass::Large => "l",
        }
    }

    /// `(layers, width, feedforward width)`.
    pub fn dims(self) -> (usize, usize, usize) {
        match self {
            SizeClass::Tiny => (2, 16, 64),
            SizeClass::Small => (3, 240, 960),
            SizeClass::Medium => (4, 400, 1600),
            SizeClass::Large => (5, 512, 2048),
        }
    }

    /// Published parameter total, if any.
    pub fn nominal_params(self) -> Option<usize> {
        match self {
            SizeClass::Tiny => None,
            SizeClass::Small => Some(2_100_000),
            SizeClass::Medium => Some(7_500_000),
            SizeClass::Large => Some(15_000_000),
        }
    }
}

impl fmt::Display for SizeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SizeClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().trim_start_matches("aai-") {
            "tiny" => Ok(SizeClass::Tiny),
            "s" | "small" => Ok(SizeClass::Small),
            "m" | "medium" => Ok(SizeClass::Medium),
            "l" | "large" => Ok(SizeClass::Large),
            other => Err(Error::Config(format!("unknown size class {other:?} (tiny, s, m, l)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub size_class: SizeClass,
    pub input_dim: usize,
    pub width: usize,
    pub layers: usize,
    pub ff_width: usize,
    pub heads: usize,
    pub dropout: f64,
    /// Longest sequence accepted by `forward`.
    pub max_len: usize,
}

pub const DEFAULT_DROPOUT: f64 = 0.1;
pub const DEFAULT_MAX_LEN: usize = 6000;
pub(crate) const LAYER_NORM_EPS: f64 = 1e-5;

impl ModelConfig {
    pub fn preset(size_class: SizeClass, input_dim: usize) -> Self {
        let (layers, width, ff_width) = size_class.dims();
        Self {
            size_class,
            input_dim,
            width,
            layers,
            ff_width,
            heads: 1,
            dropout: DEFAULT_DROPOUT,
            max_len: DEFAULT_MAX_LEN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads != 1 {
            return Err(Error::Config(format!("exactly one attention head is supported, got {}", self.heads)));
        }
        if self.input_dim == 0 || self.width == 0 || self.ff_width == 0 {
            return Err(Error::Config(format!(
                "dims must be positive (input {}, width {}, feedforward {})",
                self.input_dim, self.width, self.ff_width
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.max_len == 0 {
            return Err(Error::Config("max_len must be positive".into()));
        }
        Ok(())
    }
}
