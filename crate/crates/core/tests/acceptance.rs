//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use aai_core::corpus::{Batch, Utterance};
use aai_core::evaluation::{aggregate_table, evaluate, pearson_cc, CcReport};
use aai_core::model::{
    build_model, forward, forward_tensors_on_tape, load_checkpoint, param_count, save_checkpoint, Mode, ModelConfig,
    ModelParams, SizeClass,
};
use aai_core::numerics::{finite_diff_check, Tensor};
use aai_core::signal::{lowpass_ema, mfcc, ArticulatoryTrajectory, FeatureMatrix, Waveform, EMA_CUTOFF_HZ, EMA_RATE};
use aai_core::synth::SynthSpec;
use aai_core::training::{
    dataset_loss, masked_mse, run_fine_tuned, run_pooled, run_subject_specific, Regime, SubjectData, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{split_subjects, synth_subjects};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let params: ModelParams<f64> = build_model(&ModelConfig::preset(SizeClass::Tiny, 5), 3).map_err(|e| e.to_string())?;
    let cfg = params.config().clone();
    let (b, t) = (2, 7);
    let x = Tensor::from_fn(&[b, t, 5], |i| (0.37 * i as f64).sin());
    let target = Tensor::from_fn(&[b, t, 12], |i| (0.23 * i as f64 + 1.0).sin());
    let mask: Vec<bool> = (0..b * t).map(|i| i < t + 5).collect();
    let mut worst = 0.0f64;
    for mode in [Mode::Eval, Mode::Train { seed: 17 }] {
        let err = finite_diff_check(params.tensors(), 1e-5, |tape, p| {
            let xv = tape.constant(x.clone());
            let y = forward_tensors_on_tape(tape, &cfg, p, xv, &mask, mode)?;
            tape.masked_mse(y, &target, &mask)
        })
        .map_err(|e| e.to_string())?;
        worst = worst.max(err);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst < 1e-4 && secs < 60.0, format!("max relative error {worst:.2e}, {secs:.1} s"))
}

fn random_utterance(rng: &mut ChaCha8Rng, dim: usize, len: usize) -> Utterance<f64> {
    let f = Tensor::from_fn(&[len, dim], |_| rng.gen_range(-2.0..2.0));
    let t = Tensor::from_fn(&[len, 12], |_| rng.gen_range(-1.0..1.0));
    Utterance::new("S", 0, FeatureMatrix::new(f, 100.0, "x").unwrap(), ArticulatoryTrajectory::new(t, 100.0).unwrap()).unwrap()
}

fn padding_invariance() -> Outcome {
    let dim = 8;
    let params: ModelParams<f64> = build_model(&ModelConfig::preset(SizeClass::Tiny, dim), 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let (mut pred_gap, mut loss_gap) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let own = rng.gen_range(1..40);
        let a = random_utterance(&mut rng, dim, own);
        let longer = own + rng.gen_range(1..40);
        let b = random_utterance(&mut rng, dim, longer);
        let alone = Batch::from_utterances(&[&a], vec![0]).unwrap();
        let paired = Batch::from_utterances(&[&b, &a], vec![1, 0]).unwrap();
        let ya = forward(&params, &alone.features, &alone.mask, Mode::Eval).unwrap();
        let yp = forward(&params, &paired.features, &paired.mask, Mode::Eval).unwrap();
        let (ra, rp) = (alone.valid_region(&ya, 0), paired.valid_region(&yp, 1));
        pred_gap = ra.iter().zip(rp).map(|(x, y)| (x - y).abs()).fold(pred_gap, f64::max);

        // the same prediction/target pair, zero-padded to the partner's length
        let tmax = paired.max_len();
        let pad = |src: &[f64]| Tensor::from_fn(&[1, tmax, 12], |i| src.get(i).copied().unwrap_or(0.0));
        let mask: Vec<bool> = (0..tmax).map(|t| t < own).collect();
        let padded = masked_mse(&pad(ra), &pad(alone.targets.data()), &mask).unwrap();
        let unpadded = masked_mse(&ya, &alone.targets, &alone.mask).unwrap();
        loss_gap = loss_gap.max((padded - unpadded).abs());
    }
    ensure(
        pred_gap <= 1e-9 && loss_gap <= 1e-12,
        format!("100 batches, prediction gap {pred_gap:.1e}, loss gap {loss_gap:.1e}"),
    )
}

fn oracle_config(seed: u64) -> TrainConfig {
    TrainConfig { learning_rate: 3e-3, batch_size: 4, max_epochs: 100, seed, ..TrainConfig::new(Regime::SubjectSpecific) }
}

struct SubjectRuns {
    spec: SynthSpec,
    data: Vec<SubjectData<f64>>,
    ss: Vec<CcReport>,
}

fn synthetic_oracle(runs: &mut Option<SubjectRuns>) -> Outcome {
    let start = Instant::now();
    let spec = SynthSpec::default();
    let data = split_subjects(&spec, synth_subjects(&spec));
    let model = ModelConfig::preset(SizeClass::Tiny, spec.dim);
    let mut ss = Vec::new();
    for d in &data {
        let out = run_subject_specific(&model, d, &oracle_config(1)).map_err(|e| e.to_string())?;
        ss.push(evaluate(&out.params, &d.test).map_err(|e| e.to_string())?);
    }
    let overall = CcReport::merge(&ss).map_err(|e| e.to_string())?.overall;
    let elapsed = start.elapsed();
    let per: Vec<String> = data.iter().zip(&ss).map(|(d, r)| format!("{} {:.4}", d.subject, r.overall)).collect();
    *runs = Some(SubjectRuns { spec, data, ss });
    ensure(
        overall >= 0.95 && elapsed < Duration::from_secs(15 * 60),
        format!("held-out CC {overall:.4} ({}), {:.0} s", per.join(", "), elapsed.as_secs_f64()),
    )
}

fn overfit_oracle() -> Outcome {
    let spec = SynthSpec { subjects: 1, utterances_per_subject: 8, min_duration: 1.0, max_duration: 2.0, seed: 3, ..Default::default() };
    let utts = synth_subjects(&spec).remove(0);
    let cfg = TrainConfig { max_epochs: 500, early_stop_patience: 500, ..oracle_config(2) };
    let model = build_model(&ModelConfig::preset(SizeClass::Tiny, spec.dim), 2).map_err(|e| e.to_string())?;
    let out = aai_core::training::train(model, &utts, &utts, &cfg).map_err(|e| e.to_string())?;
    let cc = evaluate(&out.params, &utts).map_err(|e| e.to_string())?.overall;
    ensure(cc >= 0.99, format!("train-set CC {cc:.4} after {} epochs", out.history.len() - 1))
}

fn regime_contracts(runs: &Option<SubjectRuns>) -> Outcome {
    let runs = runs.as_ref().ok_or("subject-specific runs unavailable")?;
    let model = ModelConfig::preset(SizeClass::Tiny, runs.spec.dim);
    let pooled_cfg = TrainConfig { regime: Regime::Pooled, ..oracle_config(1) };
    let pooled = run_pooled(&model, &runs.data, &pooled_cfg).map_err(|e| e.to_string())?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ckpt = dir.path().join("pooled.aaim");
    save_checkpoint(&ckpt, &pooled.params).map_err(|e| e.to_string())?;
    let stored: ModelParams<f64> = load_checkpoint(&ckpt).map_err(|e| e.to_string())?;

    let mut notes = Vec::new();
    let mut ok = true;
    for (d, ss) in runs.data.iter().zip(&runs.ss) {
        let ft_cfg = TrainConfig { regime: Regime::FineTuned, warm_start: Some(ckpt.clone()), max_epochs: 2, ..oracle_config(1) };
        let ft = run_fine_tuned(d, &ft_cfg).map_err(|e| e.to_string())?;
        let reference = dataset_loss(&stored, &d.val, ft_cfg.batch_size).map_err(|e| e.to_string())?;
        let epoch0 = ft.history[0].val_loss;
        let pooled_cc = evaluate(&pooled.params, &d.test).map_err(|e| e.to_string())?.overall;
        ok &= epoch0 == reference && pooled_cc >= ss.overall - 0.05;
        notes.push(format!(
            "{}: FT epoch-0 val {epoch0:.6e} vs pooled {reference:.6e}, pooled CC {pooled_cc:.4} vs SS {:.4}",
            d.subject, ss.overall
        ));
    }
    ensure(ok, notes.join("; "))
}

const SS_MFCC: [f64; 12] = [0.7345, 0.6873, 0.7746, 0.8223, 0.8289, 0.8184, 0.8636, 0.8652, 0.8739, 0.8694, 0.8734, 0.8654];
const SS_TERA: [f64; 12] = [0.7751, 0.7554, 0.8155, 0.8794, 0.868, 0.8622, 0.8954, 0.9074, 0.9067, 0.9034, 0.9049, 0.9007];

fn table_aggregation() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (label, row, mean, std) in [("SS MFCC", SS_MFCC, 0.8231, 0.061), ("SS TERA", SS_TERA, 0.8645, 0.054)] {
        let (m, s) = aggregate_table(&row).map_err(|e| e.to_string())?;
        ok &= (m - mean).abs() <= 0.0005 && (s - std).abs() <= 0.001;
        notes.push(format!("{label} {m:.4} ({s:.3})"));
    }
    ensure(ok, notes.join(", "))
}

fn parameter_counts() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (class, target) in [(SizeClass::Small, 2.1e6), (SizeClass::Medium, 7.5e6), (SizeClass::Large, 15e6)] {
        let cfg = ModelConfig::preset(class, 13);
        let closed = param_count(&cfg);
        let built: ModelParams<f32> = build_model(&cfg, 0).map_err(|e| e.to_string())?;
        let enumerated: usize = built.tensors().values().map(|t| t.len()).sum();
        let rel = closed as f64 / target - 1.0;
        ok &= closed == enumerated && rel.abs() <= 0.07;
        notes.push(format!("{class} {closed} ({:+.1}%)", 100.0 * rel));
    }
    ensure(ok, notes.join(", "))
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(2..300);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let b: Vec<f64> = a.iter().map(|x| x * rng.gen_range(-1.0..1.0) + rng.gen_range(-5.0..5.0)).collect();
        let (ma, mb) = (a.iter().sum::<f64>() / n as f64, b.iter().sum::<f64>() / n as f64);
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n as f64;
        let sa = (a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / n as f64).sqrt();
        let sb = (b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / n as f64).sqrt();
        let cc = pearson_cc(&a, &b).map_err(|e| e.to_string())?.value;
        worst = worst.max((cc - cov / (sa * sb)).abs());
    }
    let mut frame_errors = 0;
    let lengths: Vec<usize> = (400..1200).step_by(7).chain([16_000, 16_159, 16_160, 48_000]).collect();
    for &n in &lengths {
        let w = Waveform::new((0..n).map(|i| (i as f64 * 0.01).sin()).collect(), 16_000).map_err(|e| e.to_string())?;
        if mfcc(&w).map_err(|e| e.to_string())?.len() != 1 + (n - 400) / 160 {
            frame_errors += 1;
        }
    }
    ensure(
        worst <= 1e-12 && frame_errors == 0,
        format!("max Pearson gap {worst:.1e} over 1000 pairs, {frame_errors} MFCC frame-count mismatches over {} lengths", lengths.len()),
    )
}

fn dsp_checks() -> Outcome {
    let n = 2500;
    let gain = |freq: f64| {
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * freq * i as f64 / EMA_RATE).sin()).collect();
        let t = ArticulatoryTrajectory::from_channels(&vec![x.clone(); 12], EMA_RATE).unwrap();
        let y = lowpass_ema(&t, EMA_CUTOFF_HZ).unwrap().channel(0);
        let rms = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64).sqrt();
        20.0 * (rms(&y[500..2000]) / rms(&x[500..2000])).log10()
    };
    let (pass, stop) = (gain(5.0), gain(80.0));
    let mut impulse = vec![0.0f64; 1251];
    impulse[625] = 1.0;
    let t = ArticulatoryTrajectory::from_channels(&vec![impulse; 12], EMA_RATE).map_err(|e| e.to_string())?;
    let y = lowpass_ema(&t, EMA_CUTOFF_HZ).map_err(|e| e.to_string())?.channel(0);
    let asym = (0..y.len()).map(|i| (y[i] - y[y.len() - 1 - i]).abs()).fold(0.0, f64::max);
    ensure(
        pass.abs() <= 1.0 && stop <= -30.0 && asym < 1e-8,
        format!("5 Hz {pass:+.3} dB, 80 Hz {stop:.1} dB, symmetry error {asym:.1e}"),
    )
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |name: &str, f: &mut dyn FnMut() -> Outcome| {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    };
    let mut runs = None;
    report("gradient correctness", &mut gradient_correctness);
    report("padding invariance", &mut padding_invariance);
    report("table aggregation", &mut table_aggregation);
    report("parameter counts", &mut parameter_counts);
    report("metric oracle", &mut metric_oracle);
    report("dsp checks", &mut dsp_checks);
    report("overfit oracle", &mut overfit_oracle);
    report("synthetic oracle", &mut || synthetic_oracle(&mut runs));
    report("regime contracts", &mut || regime_contracts(&runs));
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
