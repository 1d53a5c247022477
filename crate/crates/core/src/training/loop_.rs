use std::io::Write;
use std::path::Path;

use crate::corpus::{make_batches, Batch, BatchOptions, Utterance};
use crate::error::{Error, Result};
use crate::model::{forward, forward_on_tape, Mode, ModelParams};
use crate::numerics::{mix_seed, Scalar, Tape};
use crate::training::loss::masked_mse;

use super::{adam_step, TrainConfig, TrainState};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    /// Parameters at the epoch with the lowest validation loss.
    pub params: ModelParams<T>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// Validation loss of the initial parameters, before any update.
    pub initial_val_loss: f64,
    /// Row 0 evaluates the initial parameters; row `e` follows epoch `e`.
    pub history: Vec<HistoryRow>,
}

fn batches_loss<T: Scalar>(params: &ModelParams<T>, batches: &[Batch<T>]) -> Result<f64> {
    let mut total = 0.0;
    let mut frames = 0usize;
    for b in batches {
        let n = b.valid_frames();
        if n == 0 {
            continue;
        }
        let pred = forward(params, &b.features, &b.mask, Mode::Eval)?;
        total += masked_mse(&pred, &b.targets, &b.mask)?.to_f64_lossy() * n as f64;
        frames += n;
    }
    if frames == 0 {
        return Err(Error::DegenerateBatch);
    }
    Ok(total / frames as f64)
}

/// Eval-mode masked MSE over a whole utterance list, weighted by frame count.
pub fn dataset_loss<T: Scalar>(params: &ModelParams<T>, utts: &[Utterance<T>], batch_size: usize) -> Result<f64> {
    let opts = BatchOptions { batch_size, ..Default::default() };
    batches_loss(params, &make_batches(utts, &opts)?)
}

/// Trains from `initial`, evaluating on `val` after every epoch.
pub fn train<T: Scalar>(
    initial: ModelParams<T>,
    train: &[Utterance<T>],
    val: &[Utterance<T>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    train_with(initial, train, val, cfg, |_| {})
}

/// [`train`] with a callback invoked once per history row.
pub fn train_with<T: Scalar>(
    initial: ModelParams<T>,
    train: &[Utterance<T>],
    val: &[Utterance<T>],
    cfg: &TrainConfig,
    mut observe: impl FnMut(&HistoryRow),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Config(format!(
            "training needs non-empty train and validation sets (got {} and {})",
            train.len(),
            val.len()
        )));
    }
    let eval_opts = BatchOptions {
        batch_size: cfg.batch_size,
        ..Default::default()
    };
    let val_batches = make_batches(val, &eval_opts)?;
    let mut params = initial;
    let mut state = TrainState::<T>::new(cfg);

    let initial_val_loss = batches_loss(&params, &val_batches)?;
    let train0 = dataset_loss(&params, train, cfg.batch_size)?;
    let mut outcome = state.end_epoch(train0, initial_val_loss)?;
    observe(state.history.last().expect("row recorded"));
    let mut best = params.clone();

    while !outcome.stop {
        let epoch_seed = mix_seed(cfg.seed, state.epoch as u64);
        let lr = T::lit(state.lr());
        let opts = BatchOptions {
            batch_size: cfg.batch_size,
            shuffle: true,
            seed: epoch_seed,
            sort_by_length: cfg.sort_by_length,
        };
        let mut total = 0.0;
        let mut frames = 0usize;
        for (i, batch) in make_batches(train, &opts)?.iter().enumerate() {
            let n = batch.valid_frames();
            if n == 0 {
                continue;
            }
            let (loss, grads) = {
                let mut tape = Tape::new();
                let x = tape.constant(batch.features.clone());
                let mode = Mode::Train { seed: mix_seed(epoch_seed, i as u64) };
                let y = forward_on_tape(&mut tape, &params, x, &batch.mask, mode)?;
                let l = tape.masked_mse(y, &batch.targets, &batch.mask)?;
                (tape.value(l).item()?.to_f64_lossy(), tape.backward(l)?)
            };
            adam_step(&mut params, &grads, &mut state.adam, lr)?;
            total += loss * n as f64;
            frames += n;
        }
        let train_loss = if frames == 0 { f64::NAN } else { total / frames as f64 };
        let val_loss = batches_loss(&params, &val_batches)?;
        outcome = state.end_epoch(train_loss, val_loss)?;
        if outcome.improved {
            best = params.clone();
        }
        observe(state.history.last().expect("row recorded"));
    }

    Ok(TrainOutcome {
        params: best,
        best_epoch: state.stopping.best_epoch,
        best_val_loss: state.stopping.best,
        initial_val_loss,
        history: state.history,
    })
}

/// Writes `epoch,train_loss,val_loss,lr` rows.
pub fn write_history_csv(path: &Path, history: &[HistoryRow]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(f, "epoch,train_loss,val_loss,lr").map_err(io)?;
    for r in history {
        writeln!(f, "{},{},{},{}", r.epoch, r.train_loss, r.val_loss, r.lr).map_err(io)?;
    }
    f.flush().map_err(io)
}
