//! Optimization: masked MSE, Adam, plateau learning-rate schedule, early
//! stopping, and the subject-specific / pooled / fine-tuned regimes.

mod adam;
mod config;
mod loop_;
mod loss;
mod regime;
mod schedule;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use config::{Regime, TrainConfig};
pub use loop_::{dataset_loss, train, train_with, write_history_csv, HistoryRow, TrainOutcome};
pub use loss::masked_mse;
pub use regime::{run_fine_tuned, run_pooled, run_subject_specific, SubjectData};
pub use schedule::{EarlyStopping, EpochOutcome, PlateauScheduler, TrainState};
