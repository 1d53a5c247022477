//! Single-head, post-norm, non-autoregressive transformer encoder that maps a
//! feature sequence to the twelve articulatory channels frame by frame.

mod checkpoint;
mod config;
mod forward;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{ModelConfig, SizeClass, DEFAULT_DROPOUT, DEFAULT_MAX_LEN};
pub use forward::{forward, forward_on_tape, forward_tensors_on_tape, positional_encoding, Mode};
pub use params::{build_model, param_count, ModelParams};
