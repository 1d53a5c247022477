use crate::error::{Error, Result};
use crate::numerics::Scalar;

use super::{AdamState, HistoryRow, TrainConfig};

/// Multiplies the learning rate by `factor` after `patience` consecutive
/// epochs without a strict validation improvement, never going below `min_lr`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateauScheduler {
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    pub lr: f64,
    best: f64,
    bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, factor: f64, patience: usize, min_lr: f64) -> Self {
        Self {
            factor,
            patience,
            min_lr,
            lr,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    /// Feeds one epoch's validation loss and returns the learning rate to use next.
    pub fn step(&mut self, val_loss: f64) -> Result<f64> {
        if !val_loss.is_finite() {
            return Err(Error::Numeric(format!("validation loss {val_loss}")));
        }
        if val_loss < self.best {
            self.best = val_loss;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                self.lr = (self.lr * self.factor).max(self.min_lr);
                self.bad_epochs = 0;
            }
        }
        Ok(self.lr)
    }
}

/// Tracks the best validation loss; signals a stop once `patience` epochs
/// pass without improvement.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: usize,
    pub since_improvement: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            since_improvement: 0,
        }
    }

    /// Returns whether `val_loss` improved on the best so far.
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> bool {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.since_improvement = 0;
            true
        } else {
            self.since_improvement += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.since_improvement >= self.patience
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpochOutcome {
    pub improved: bool,
    pub stop: bool,
}

/// Per-epoch bookkeeping shared by the training loop and its tests.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState<T> {
    pub epoch: usize,
    pub adam: AdamState<T>,
    pub scheduler: PlateauScheduler,
    pub stopping: EarlyStopping,
    pub max_epochs: usize,
    pub history: Vec<HistoryRow>,
}

impl<T: Scalar> TrainState<T> {
    pub fn new(cfg: &TrainConfig) -> Self {
        Self {
            epoch: 0,
            adam: AdamState::default(),
            scheduler: PlateauScheduler::new(cfg.learning_rate, cfg.scheduler_factor, cfg.scheduler_patience, cfg.min_lr),
            stopping: EarlyStopping::new(cfg.early_stop_patience),
            max_epochs: cfg.max_epochs,
            history: Vec::new(),
        }
    }

    pub fn lr(&self) -> f64 {
        self.scheduler.lr
    }

    /// Records epoch `self.epoch` (0 = before any update) and advances.
    pub fn end_epoch(&mut self, train_loss: f64, val_loss: f64) -> Result<EpochOutcome> {
        let lr_used = self.scheduler.lr;
        let improved = self.stopping.observe(self.epoch, val_loss);
        self.scheduler.step(val_loss)?;
        self.history.push(HistoryRow {
            epoch: self.epoch,
            train_loss,
            val_loss,
            lr: lr_used,
        });
        let stop = self.stopping.should_stop() || self.epoch >= self.max_epochs;
        self.epoch += 1;
        Ok(EpochOutcome { improved, stop })
    }
}
