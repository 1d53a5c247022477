use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aai_cli::config::{key_help, CORPUS_ENV};
use aai_cli::{data, exit, experiment, parse_config, report, ExperimentConfig};
use aai_core::synth::SynthSpec;
use aai_core::training::Regime;
use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aai", version, about = "Acoustic-to-articulatory inversion: corpus preparation, training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn synth_help() -> String {
    let defaults: String = SynthSpec::default().to_manifest().lines().map(|l| format!("  {l}\n")).collect();
    format!("Spec keys (KEY=VALUE arguments or a --spec file), with defaults:\n{defaults}  map is linear or linear+tanh")
}

#[derive(Subcommand)]
enum Command {
    /// Filter, decimate and normalize EMA, resample audio to 16 kHz, extract MFCCs and write splits.
    Preprocess {
        /// Directory of <subject>/<id>.wav + <id>.csv pairs.
        #[arg(long)]
        raw: PathBuf,
        #[arg(long, env = CORPUS_ENV)]
        corpus: PathBuf,
        /// Sampling rate of the EMA CSV files.
        #[arg(long, default_value_t = 250.0)]
        ema_rate: f64,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
    },
    /// Write <id>.aaif-MFCC for every <id>.wav in the corpus.
    Mfcc {
        #[arg(long, env = CORPUS_ENV)]
        corpus: PathBuf,
        /// Comma-separated subjects (default: all).
        #[arg(long, value_delimiter = ',')]
        subjects: Vec<String>,
    },
    /// Generate a synthetic paired corpus with a known forward map.
    #[command(after_help = synth_help())]
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Spec file in key = value form; KEY=VALUE arguments override it.
        #[arg(long)]
        spec: Option<PathBuf>,
        overrides: Vec<String>,
    },
    /// Train under the configured regime; writes checkpoints, histories and a manifest.
    #[command(after_help = key_help())]
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's regime (ss, pooled, ft).
        #[arg(long)]
        regime: Option<Regime>,
        /// Parallel per-subject jobs for ss and ft.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Correlation report over each subject's test split.
    #[command(after_help = key_help())]
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        regime: Option<Regime>,
        /// Evaluate this checkpoint for every subject instead of the run's own.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Collect eval outputs into a feature x regime grid.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

fn load(config: &Path, regime: Option<Regime>, jobs: Option<usize>) -> Result<ExperimentConfig> {
    let mut cfg = parse_config(config)?;
    if let Some(r) = regime {
        cfg.regime = r;
        cfg.train.regime = r;
    }
    if let Some(j) = jobs {
        if j == 0 {
            return Err(aai_cli::UsageError("--jobs must be at least 1".into()).into());
        }
        cfg.jobs = j;
    }
    Ok(cfg)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Preprocess { raw, corpus, ema_rate, split_seed } => {
            let s = data::preprocess(&raw, &corpus, ema_rate, split_seed)?;
            println!("preprocessed {} utterances from {} subjects into {}", s.utterances, s.subjects, corpus.display());
        }
        Command::Mfcc { corpus, subjects } => {
            let s = data::extract_mfcc(&corpus, &subjects)?;
            println!("wrote MFCC features for {} utterances from {} subjects", s.utterances, s.subjects);
        }
        Command::Synth { out, spec, overrides } => {
            let mut base = match spec {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| aai_core::Error::io(&path, e))?;
                    SynthSpec::from_manifest(&text)?
                }
                None => SynthSpec::default(),
            };
            data::apply_overrides(&mut base, &overrides)?;
            let s = data::synth(&base, &out)?;
            println!("synthesized {} utterances for {} subjects in {}", s.utterances, s.subjects, out.display());
        }
        Command::Train { config, regime, jobs } => {
            let cfg = load(&config, regime, jobs)?;
            for m in experiment::train(&cfg)? {
                println!(
                    "{}: best epoch {} (val loss {:.4e}) -> {}",
                    m.subject.as_deref().unwrap_or("pooled"),
                    m.best_epoch,
                    m.best_val_loss,
                    m.checkpoint.display()
                );
            }
        }
        Command::Eval { config, regime, checkpoint } => {
            let cfg = load(&config, regime, None)?;
            let ev = experiment::eval(&cfg, checkpoint.as_deref())?;
            for (subject, r) in &ev.per_subject {
                println!("{subject}: {}", r.summary_line());
            }
            println!("all: {}", ev.merged.summary_line());
            println!("wrote {}", ev.run_dir.join(experiment::CC_CSV).display());
        }
        Command::Report { out, runs } => {
            let grid = report::report(&runs, &out)?;
            print!("{}", grid.markdown());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::exit_code(&e))
        }
    }
}
