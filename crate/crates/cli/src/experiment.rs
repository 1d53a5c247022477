//! `train` and `eval` over a corpus on disk.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use aai_core::corpus::{CorpusLayout, Split};
use aai_core::evaluation::{evaluate, CcReport};
use aai_core::model::{load_checkpoint, save_checkpoint, ModelConfig};
use aai_core::training::{
    run_fine_tuned, run_pooled, run_subject_specific, write_history_csv, Regime, SubjectData, TrainOutcome,
};
use aai_core::{Error, ModelParams};
use anyhow::{Context, Result};

use crate::config::ExperimentConfig;

pub const CHECKPOINT_FILE: &str = "model.aaim";
pub const HISTORY_FILE: &str = "history.csv";
pub const CONFIG_FILE: &str = "config.txt";
pub const TRAIN_MANIFEST: &str = "train.manifest";
pub const EVAL_MANIFEST: &str = "eval.manifest";
pub const EVAL_SUMMARY: &str = "eval.summary";
pub const CC_CSV: &str = "cc.csv";
pub const CC_MARKDOWN: &str = "cc.md";

fn subjects_of(cfg: &ExperimentConfig, layout: &CorpusLayout) -> Result<Vec<String>> {
    if !cfg.corpus.is_dir() {
        return Err(Error::io(&cfg.corpus, std::io::Error::new(std::io::ErrorKind::NotFound, "corpus root not found")).into());
    }
    let subjects = if cfg.subjects.is_empty() { layout.subjects()? } else { cfg.subjects.clone() };
    if subjects.is_empty() {
        return Err(Error::Format { path: cfg.corpus.clone(), detail: "no subject directories".into() }.into());
    }
    Ok(subjects)
}

fn load_part(layout: &CorpusLayout, cfg: &ExperimentConfig, subject: &str, ids: &[u32]) -> Result<Vec<aai_core::Utterance>> {
    let utts = layout
        .load_utterances::<f64>(subject, &cfg.feature, ids)
        .with_context(|| format!("loading {} features of {subject}", cfg.feature))?;
    if let Some(u) = utts.iter().find(|u| u.features.dim() != cfg.feature_dim) {
        return Err(Error::Conflict(format!("{} has {}-dim features, config expects {}", u.id(), u.features.dim(), cfg.feature_dim)).into());
    }
    Ok(utts)
}

fn read_split(layout: &CorpusLayout, seed: u64) -> Result<Split> {
    layout
        .read_split(seed)
        .with_context(|| format!("reading split {seed}; `aai synth` and `aai preprocess` write it"))
}

/// Per-subject train/val/test utterances; `with_training` false loads only test sets.
pub fn load_subjects(cfg: &ExperimentConfig, with_training: bool) -> Result<Vec<SubjectData<f64>>> {
    let layout = CorpusLayout::new(&cfg.corpus);
    let split = read_split(&layout, cfg.split_seed)?;
    subjects_of(cfg, &layout)?
        .into_iter()
        .map(|subject| {
            let (train, val) = if with_training {
                (load_part(&layout, cfg, &subject, &split.train)?, load_part(&layout, cfg, &subject, &split.val)?)
            } else {
                (Vec::new(), Vec::new())
            };
            let test = load_part(&layout, cfg, &subject, &split.test)?;
            Ok(SubjectData { subject, train, val, test })
        })
        .collect()
}

fn model_config(cfg: &ExperimentConfig) -> ModelConfig {
    ModelConfig { dropout: cfg.dropout, ..ModelConfig::preset(cfg.size, cfg.feature_dim) }
}

/// Runs `job` for every index on up to `jobs` threads, keeping results in index order.
fn parallel<R: Send>(count: usize, jobs: usize, job: impl Fn(usize) -> Result<R> + Sync) -> Result<Vec<R>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<R>>>> = Mutex::new((0..count).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, count.max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= count {
                    break;
                }
                let r = job(i);
                slots.lock().expect("no job panicked while holding the lock")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("threads joined").into_iter().map(|r| r.expect("every index ran")).collect()
}

/// What one training run left on disk.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    /// Subject name, or `None` for the pooled model.
    pub subject: Option<String>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub checkpoint: PathBuf,
}

fn save_outcome(dir: &Path, outcome: &TrainOutcome<f64>, artifacts: &mut Vec<PathBuf>) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ckpt = dir.join(CHECKPOINT_FILE);
    save_checkpoint(&ckpt, &outcome.params)?;
    let history = dir.join(HISTORY_FILE);
    write_history_csv(&history, &outcome.history)?;
    artifacts.push(ckpt.clone());
    artifacts.push(history);
    Ok(ckpt)
}

fn write_manifest(run_dir: &Path, name: &str, command: &str, artifacts: &[PathBuf]) -> Result<PathBuf> {
    let path = run_dir.join(name);
    let mut lines: Vec<String> = artifacts
        .iter()
        .map(|p| p.strip_prefix(run_dir).unwrap_or(p).display().to_string())
        .collect();
    lines.sort();
    let text = format!("# artifacts written by `aai {command}`\n{}\n", lines.join("\n"));
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Trains every model the regime calls for and writes checkpoints, histories,
/// the resolved config and a manifest under [`ExperimentConfig::run_dir`].
pub fn train(cfg: &ExperimentConfig) -> Result<Vec<TrainedModel>> {
    cfg.train.validate()?;
    let data = load_subjects(cfg, true)?;
    let model = model_config(cfg);
    let run_dir = cfg.run_dir();
    fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    let config_path = run_dir.join(CONFIG_FILE);
    fs::write(&config_path, cfg.to_text()).map_err(|e| Error::io(&config_path, e))?;
    let mut artifacts = vec![config_path];

    let trained = match cfg.regime {
        Regime::Pooled => {
            let out = run_pooled(&model, &data, &cfg.train).context("pooled training")?;
            let checkpoint = save_outcome(&run_dir, &out, &mut artifacts)?;
            vec![TrainedModel { subject: None, best_epoch: out.best_epoch, best_val_loss: out.best_val_loss, checkpoint }]
        }
        Regime::SubjectSpecific | Regime::FineTuned => {
            let outcomes = parallel(data.len(), cfg.jobs, |i| {
                let d = &data[i];
                let out = match cfg.regime {
                    Regime::FineTuned => run_fine_tuned(d, &cfg.train),
                    _ => run_subject_specific(&model, d, &cfg.train),
                };
                out.with_context(|| format!("training {}", d.subject))
            })?;
            let mut trained = Vec::new();
            for (d, out) in data.iter().zip(&outcomes) {
                let checkpoint = save_outcome(&run_dir.join(&d.subject), out, &mut artifacts)?;
                trained.push(TrainedModel {
                    subject: Some(d.subject.clone()),
                    best_epoch: out.best_epoch,
                    best_val_loss: out.best_val_loss,
                    checkpoint,
                });
            }
            trained
        }
    };
    write_manifest(&run_dir, TRAIN_MANIFEST, "train", &artifacts)?;
    Ok(trained)
}

/// Evaluation results for a run: one report per subject and their union.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub per_subject: Vec<(String, CcReport)>,
    pub merged: CcReport,
    pub run_dir: PathBuf,
}

/// Key-value summary read back by `report`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub feature: String,
    pub size: String,
    pub regime: String,
    pub overall: f64,
    pub channel_std: f64,
    pub utterance_std: f64,
    pub utterances: usize,
}

impl EvalSummary {
    pub fn to_text(&self) -> String {
        format!(
            "feature = {}\nsize = {}\nregime = {}\noverall = {}\nchannel_std = {}\nutterance_std = {}\nutterances = {}\n",
            self.feature, self.size, self.regime, self.overall, self.channel_std, self.utterance_std, self.utterances
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |detail: String| Error::Format { path: path.to_path_buf(), detail };
        let field = |key: &str| -> Result<String> {
            text.lines()
                .filter_map(|l| l.split_once('='))
                .find(|(k, _)| k.trim() == key)
                .map(|(_, v)| v.trim().to_string())
                .ok_or_else(|| bad(format!("missing {key}")).into())
        };
        let number = |key: &str| -> Result<f64> { field(key)?.parse().map_err(|_| bad(format!("bad {key}")).into()) };
        Ok(Self {
            feature: field("feature")?,
            size: field("size")?,
            regime: field("regime")?,
            overall: number("overall")?,
            channel_std: number("channel_std")?,
            utterance_std: number("utterance_std")?,
            utterances: field("utterances")?.parse().map_err(|_| bad("bad utterances".into()))?,
        })
    }
}

/// Evaluates the run's checkpoints on every subject's test split (or a single
/// `checkpoint` for all subjects) and writes CSV, markdown and summary files.
pub fn eval(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<Evaluation> {
    let data = load_subjects(cfg, false)?;
    let run_dir = cfg.run_dir();
    let shared: Option<ModelParams> = match (checkpoint, cfg.regime) {
        (Some(p), _) => Some(load_checkpoint(p)?),
        (None, Regime::Pooled) => Some(load_checkpoint(&run_dir.join(CHECKPOINT_FILE)).context("loading the pooled checkpoint; run `aai train` first")?),
        (None, _) => None,
    };
    let mut per_subject = Vec::new();
    for d in &data {
        let own;
        let params = match &shared {
            Some(p) => p,
            None => {
                let path = run_dir.join(&d.subject).join(CHECKPOINT_FILE);
                own = load_checkpoint::<f64>(&path).with_context(|| format!("loading {}; run `aai train` first", path.display()))?;
                &own
            }
        };
        let report = evaluate(params, &d.test).with_context(|| format!("evaluating {}", d.subject))?;
        per_subject.push((d.subject.clone(), report));
    }
    let reports: Vec<CcReport> = per_subject.iter().map(|(_, r)| r.clone()).collect();
    let merged = CcReport::merge(&reports)?;

    fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    let csv = run_dir.join(CC_CSV);
    merged.write_csv(&csv)?;
    let mut rows: Vec<(&str, &CcReport)> = per_subject.iter().map(|(s, r)| (s.as_str(), r)).collect();
    rows.push(("all", &merged));
    let md = run_dir.join(CC_MARKDOWN);
    let text = format!("{}\nmean (std): {}\n", CcReport::markdown_table(&rows), merged.summary_line());
    fs::write(&md, text).map_err(|e| Error::io(&md, e))?;
    let summary = EvalSummary {
        feature: cfg.feature.clone(),
        size: cfg.size.to_string(),
        regime: cfg.regime.to_string(),
        overall: merged.overall,
        channel_std: merged.channel_std,
        utterance_std: merged.utterance_std,
        utterances: merged.len(),
    };
    let summary_path = run_dir.join(EVAL_SUMMARY);
    fs::write(&summary_path, summary.to_text()).map_err(|e| Error::io(&summary_path, e))?;
    write_manifest(&run_dir, EVAL_MANIFEST, "eval", &[csv, md, summary_path])?;
    Ok(Evaluation { per_subject, merged, run_dir })
}
