mod common;

use aai_core::corpus::Batch;
use aai_core::model::{build_model, forward_on_tape, save_checkpoint, Mode, ModelConfig, ModelParams, SizeClass};
use aai_core::numerics::Tape;
use aai_core::synth::SynthSpec;
use aai_core::training::{
    adam_step, masked_mse, run_fine_tuned, run_subject_specific, train, write_history_csv, AdamState, Regime,
    TrainConfig,
};
use aai_core::Error;

use common::{split_subjects, synth_subjects};

fn small_spec() -> SynthSpec {
    SynthSpec { subjects: 1, utterances_per_subject: 10, min_duration: 0.4, max_duration: 0.8, dim: 16, ..Default::default() }
}

fn tiny(dim: usize, seed: u64) -> ModelParams<f64> {
    build_model(&ModelConfig::preset(SizeClass::Tiny, dim), seed).unwrap()
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig { learning_rate: 3e-3, batch_size: 4, max_epochs: epochs, seed: 11, ..TrainConfig::new(Regime::SubjectSpecific) }
}

#[test]
fn identical_seeds_give_identical_histories() {
    let spec = small_spec();
    let data = split_subjects(&spec, synth_subjects(&spec)).remove(0);
    let a = train(tiny(16, 1), &data.train, &data.val, &quick(4)).unwrap();
    let b = train(tiny(16, 1), &data.train, &data.val, &quick(4)).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.params, b.params);
    let c = train(tiny(16, 1), &data.train, &data.val, &TrainConfig { seed: 12, ..quick(4) }).unwrap();
    assert_ne!(a.history, c.history);
}

#[test]
fn fixed_batch_loss_falls_over_ten_steps() {
    let spec = small_spec();
    let utts = synth_subjects(&spec).remove(0);
    let refs: Vec<_> = utts.iter().take(4).collect();
    let batch = Batch::from_utterances(&refs, (0..4).collect()).unwrap();
    let mut params = tiny(16, 2);
    let mut state = AdamState::default();
    let mut losses = Vec::new();
    for step in 0..11 {
        let mut tape = Tape::new();
        let x = tape.constant(batch.features.clone());
        let y = forward_on_tape(&mut tape, &params, x, &batch.mask, Mode::Train { seed: step }).unwrap();
        let l = tape.masked_mse(y, &batch.targets, &batch.mask).unwrap();
        losses.push(tape.value(l).item().unwrap());
        let grads = tape.backward(l).unwrap();
        drop(tape);
        adam_step(&mut params, &grads, &mut state, 1e-4).unwrap();
    }
    assert!(losses[10] < losses[0], "{losses:?}");
}

#[test]
fn zero_learning_rate_step_is_a_no_op() {
    let spec = small_spec();
    let utts = synth_subjects(&spec).remove(0);
    let batch = Batch::from_utterances(&[&utts[0], &utts[1]], vec![0, 1]).unwrap();
    let mut params = tiny(16, 3);
    let before = params.clone();
    let mut tape = Tape::new();
    let x = tape.constant(batch.features.clone());
    let y = forward_on_tape(&mut tape, &params, x, &batch.mask, Mode::Eval).unwrap();
    let l = tape.masked_mse(y, &batch.targets, &batch.mask).unwrap();
    let grads = tape.backward(l).unwrap();
    drop(tape);
    adam_step(&mut params, &grads, &mut AdamState::default(), 0.0).unwrap();
    assert_eq!(params, before);
}

#[test]
fn stagnant_validation_stops_after_patience() {
    // An update far below one ulp of every weight leaves validation loss frozen.
    let spec = small_spec();
    let data = split_subjects(&spec, synth_subjects(&spec)).remove(0);
    let cfg = TrainConfig { learning_rate: 1e-300, min_lr: 0.0, ..quick(300) };
    let out = train(tiny(16, 4), &data.train, &data.val, &cfg).unwrap();
    assert_eq!(out.best_epoch, 0);
    assert_eq!(out.history.len(), 1 + cfg.early_stop_patience);
    assert!(out.history.iter().all(|r| r.val_loss == out.initial_val_loss));
    // plateau halving every 5 epochs
    assert_eq!(out.history[6].lr, 0.5e-300);
}

#[test]
fn best_validation_loss_never_increases() {
    let spec = small_spec();
    let data = split_subjects(&spec, synth_subjects(&spec)).remove(0);
    let out = run_subject_specific(&ModelConfig::preset(SizeClass::Tiny, 16), &data, &quick(8)).unwrap();
    let mut best = f64::INFINITY;
    for row in &out.history {
        best = best.min(row.val_loss);
    }
    assert_eq!(best, out.best_val_loss);
    assert!(out.best_val_loss < out.initial_val_loss);
}

#[test]
fn fine_tuning_needs_a_matching_checkpoint() {
    let spec = small_spec();
    let data = split_subjects(&spec, synth_subjects(&spec)).remove(0);
    let mut cfg = TrainConfig { max_epochs: 1, ..TrainConfig::new(Regime::FineTuned) };
    assert!(matches!(run_fine_tuned(&data, &cfg), Err(Error::Config(_))));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pooled.aaim");
    save_checkpoint(&path, &tiny(13, 0)).unwrap();
    cfg.warm_start = Some(path.clone());
    assert!(matches!(run_fine_tuned(&data, &cfg), Err(Error::Conflict(_))));

    save_checkpoint(&path, &tiny(16, 0)).unwrap();
    let out = run_fine_tuned(&data, &cfg).unwrap();
    assert_eq!(out.history.len(), 2);
}

#[test]
fn history_csv_columns() {
    let spec = small_spec();
    let data = split_subjects(&spec, synth_subjects(&spec)).remove(0);
    let out = train(tiny(16, 5), &data.train, &data.val, &quick(2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("history.csv");
    write_history_csv(&path, &out.history).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("epoch,train_loss,val_loss,lr"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "0");
    assert_eq!(first[2].parse::<f64>().unwrap(), out.initial_val_loss);
    assert_eq!(text.lines().count(), 1 + out.history.len());
}

#[test]
fn masked_mse_hand_value() {
    let pred = aai_core::numerics::Tensor::from_fn(&[1, 2, 12], |i| if i == 0 { 1.0 } else { 0.0 });
    let target = aai_core::numerics::Tensor::zeros(&[1, 2, 12]);
    assert_eq!(masked_mse(&pred, &target, &[true, false]).unwrap(), 1.0 / 12.0);
    assert!(matches!(masked_mse(&pred, &target, &[false, false]), Err(Error::DegenerateBatch)));
}
