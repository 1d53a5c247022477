//! Corpus layout, binary feature/target files, the feature registry, splits
//! and padded batch assembly.

mod batch;
mod format;
mod layout;
mod registry;
mod split;

pub use batch::{make_batches, pool_subjects, Batch, BatchOptions, Utterance, DEFAULT_BATCH_SIZE};
pub use format::{
    decode, encode, read_feature_file, read_header, read_target_file, write_feature_file, write_target_file,
    FileHeader, FEATURE_MAGIC, FORMAT_VERSION, TARGET_MAGIC,
};
pub use layout::CorpusLayout;
pub use registry::{registry_dim, resolve_dim, FeatureDescriptor, REGISTRY};
pub use split::{make_splits, read_split, write_split, Split, DEFAULT_RATIOS};
