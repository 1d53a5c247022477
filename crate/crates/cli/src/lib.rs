//! Pipeline stages behind the `aai` binary: preprocessing, MFCC extraction,
//! synthetic corpora, training, evaluation and report grids.

pub mod config;
pub mod data;
pub mod exit;
pub mod experiment;
pub mod report;

pub use config::{parse_config, parse_config_str, ExperimentConfig};
pub use exit::{exit_code, UsageError};
