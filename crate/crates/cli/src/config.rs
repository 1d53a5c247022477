//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use aai_core::corpus::resolve_dim;
use aai_core::model::SizeClass;
use aai_core::training::{Regime, TrainConfig};

/// Environment variable consulted when `corpus` is absent from the file.
pub const CORPUS_ENV: &str = "AAI_CORPUS_ROOT";

/// Every accepted key with its default (`None` marks a required key) and a short description.
pub const KEYS: &[(&str, Option<&str>, &str)] = &[
    ("corpus", None, "corpus root directory (falls back to $AAI_CORPUS_ROOT)"),
    ("feature", None, "feature name, e.g. MFCC or TERA"),
    ("size", None, "model size class: tiny, s, m, l"),
    ("regime", None, "ss, pooled or ft"),
    ("feature_dim", Some(""), "input dim; required only for names missing from the registry"),
    ("subjects", Some(""), "comma-separated subjects; empty means every subject in the corpus"),
    ("split_seed", Some("0"), "which splits/<seed>/ partition to use"),
    ("lr", Some("1e-4"), "initial Adam learning rate"),
    ("batch_size", Some("16"), "utterances per batch"),
    ("scheduler_factor", Some("0.5"), "learning-rate factor on plateau"),
    ("scheduler_patience", Some("5"), "epochs without improvement before lowering the rate"),
    ("min_lr", Some("1e-6"), "learning-rate floor"),
    ("early_stop_patience", Some("15"), "epochs without improvement before stopping"),
    ("max_epochs", Some("300"), "hard epoch limit"),
    ("seed", Some("0"), "initialization, shuffling and dropout seed"),
    ("dropout", Some("0.1"), "dropout rate on attention weights and feedforward output"),
    ("warm_start", Some(""), "pooled checkpoint to fine-tune from (required for ft)"),
    ("output", Some("runs"), "directory that receives run directories"),
    ("jobs", Some("1"), "parallel per-subject jobs for ss/ft"),
];

/// Human-readable key table for `--help`.
pub fn key_help() -> String {
    let mut out = String::from("Config keys (key = value, one per line, # starts a comment):\n");
    for (key, default, about) in KEYS {
        let default = match default {
            None => "required".to_string(),
            Some("") => "unset".to_string(),
            Some(d) => format!("default {d}"),
        };
        out.push_str(&format!("  {key:<20} {about} [{default}]\n"));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub corpus: PathBuf,
    pub feature: String,
    pub feature_dim: usize,
    pub size: SizeClass,
    pub regime: Regime,
    pub subjects: Vec<String>,
    pub split_seed: u64,
    pub train: TrainConfig,
    pub dropout: f64,
    pub output: PathBuf,
    pub jobs: usize,
}

impl ExperimentConfig {
    /// Directory holding this experiment's checkpoints, histories and reports.
    pub fn run_dir(&self) -> PathBuf {
        self.output.join(format!("{}-{}-{}", self.feature, self.size, self.regime))
    }

    /// The config in the same text format it was parsed from, with every key present.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let opt_path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        [
            format!("corpus = {}", self.corpus.display()),
            format!("feature = {}", self.feature),
            format!("size = {}", self.size),
            format!("regime = {}", self.regime),
            format!("feature_dim = {}", self.feature_dim),
            format!("subjects = {}", self.subjects.join(",")),
            format!("split_seed = {}", self.split_seed),
            format!("lr = {:e}", t.learning_rate),
            format!("batch_size = {}", t.batch_size),
            format!("scheduler_factor = {}", t.scheduler_factor),
            format!("scheduler_patience = {}", t.scheduler_patience),
            format!("min_lr = {:e}", t.min_lr),
            format!("early_stop_patience = {}", t.early_stop_patience),
            format!("max_epochs = {}", t.max_epochs),
            format!("seed = {}", t.seed),
            format!("dropout = {}", self.dropout),
            format!("warm_start = {}", opt_path(&t.warm_start)),
            format!("output = {}", self.output.display()),
            format!("jobs = {}", self.jobs),
        ]
        .join("\n")
            + "\n"
    }
}

fn parse_value<V: FromStr>(key: &str, value: &str, line: usize) -> Result<V, ConfigError> {
    value.parse().map_err(|_| ConfigError {
        line,
        message: format!("invalid value {value:?} for {key}"),
    })
}

/// Parses config text. `env_corpus` stands in for `$AAI_CORPUS_ROOT`.
pub fn parse_config_str(text: &str, env_corpus: Option<&str>) -> Result<ExperimentConfig, ConfigError> {
    let mut entries: Vec<(&str, &str, usize)> = Vec::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError { line, message: format!("expected key = value, found {content:?}") });
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.iter().any(|(k, _, _)| *k == key) {
            return Err(ConfigError { line, message: format!("unknown key {key:?}") });
        }
        if let Some((_, _, first)) = entries.iter().find(|(k, _, _)| *k == key) {
            return Err(ConfigError { line, message: format!("duplicate key {key:?} (first set on line {first})") });
        }
        entries.push((key, value, line));
    }
    let get = |key: &str| entries.iter().find(|(k, _, _)| *k == key).map(|&(_, v, l)| (v, l));
    let eof = last_line + 1;
    let required = |key: &str| {
        get(key).filter(|(v, _)| !v.is_empty()).ok_or_else(|| ConfigError {
            line: eof,
            message: format!("missing required key {key:?}"),
        })
    };
    // optional keys resolve to (value, line); defaults report the end of file
    let optional = |key: &str| -> (&str, usize) {
        get(key).unwrap_or_else(|| {
            let default = KEYS.iter().find(|(k, _, _)| *k == key).and_then(|(_, d, _)| *d).unwrap_or("");
            (default, eof)
        })
    };
    let num = |key: &str| -> Result<Option<(f64, usize)>, ConfigError> {
        let (v, l) = optional(key);
        if v.is_empty() {
            return Ok(None);
        }
        parse_value(key, v, l).map(|x| Some((x, l)))
    };
    let int = |key: &str| -> Result<usize, ConfigError> {
        let (v, l) = optional(key);
        parse_value(key, v, l)
    };

    let corpus = match get("corpus").filter(|(v, _)| !v.is_empty()) {
        Some((v, _)) => PathBuf::from(v),
        None => match env_corpus.filter(|v| !v.is_empty()) {
            Some(v) => PathBuf::from(v),
            None => {
                return Err(ConfigError {
                    line: eof,
                    message: format!("missing required key \"corpus\" (and ${CORPUS_ENV} is unset)"),
                })
            }
        },
    };
    let (feature, feature_line) = required("feature")?;
    let (size, size_line) = required("size")?;
    let size: SizeClass = size.parse().map_err(|e: aai_core::Error| ConfigError { line: size_line, message: e.to_string() })?;
    let (regime, regime_line) = required("regime")?;
    let regime: Regime = regime
        .parse()
        .map_err(|e: aai_core::Error| ConfigError { line: regime_line, message: e.to_string() })?;

    let explicit_dim = match optional("feature_dim") {
        ("", _) => None,
        (v, l) => Some(parse_value::<usize>("feature_dim", v, l)?),
    };
    let feature_dim = resolve_dim(feature, explicit_dim)
        .map_err(|e| ConfigError { line: get("feature_dim").map_or(feature_line, |(_, l)| l), message: e.to_string() })?
        .dim;

    let mut train = TrainConfig::new(regime);
    let positive = |key: &str| -> Result<Option<f64>, ConfigError> {
        match num(key)? {
            Some((x, l)) if !(x > 0.0 && x.is_finite()) => Err(ConfigError { line: l, message: format!("{key} must be positive, got {x}") }),
            other => Ok(other.map(|(x, _)| x)),
        }
    };
    train.learning_rate = positive("lr")?.unwrap_or(train.learning_rate);
    train.min_lr = match num("min_lr")? {
        Some((x, l)) if !(x >= 0.0) => return Err(ConfigError { line: l, message: format!("min_lr must be non-negative, got {x}") }),
        Some((x, _)) => x,
        None => train.min_lr,
    };
    train.scheduler_factor = match num("scheduler_factor")? {
        Some((x, l)) if !(x > 0.0 && x < 1.0) => {
            return Err(ConfigError { line: l, message: format!("scheduler_factor must be in (0, 1), got {x}") })
        }
        Some((x, _)) => x,
        None => train.scheduler_factor,
    };
    train.batch_size = int("batch_size")?;
    if train.batch_size == 0 {
        return Err(ConfigError { line: optional("batch_size").1, message: "batch_size must be at least 1".into() });
    }
    train.scheduler_patience = int("scheduler_patience")?;
    train.early_stop_patience = int("early_stop_patience")?;
    train.max_epochs = int("max_epochs")?;
    train.seed = {
        let (v, l) = optional("seed");
        parse_value("seed", v, l)?
    };
    train.warm_start = match optional("warm_start") {
        ("", _) => None,
        (v, _) => Some(PathBuf::from(v)),
    };
    let dropout = match num("dropout")? {
        Some((x, l)) if !(0.0..1.0).contains(&x) => {
            return Err(ConfigError { line: l, message: format!("dropout must be in [0, 1), got {x}") })
        }
        Some((x, _)) => x,
        None => aai_core::model::DEFAULT_DROPOUT,
    };
    let jobs = int("jobs")?;
    if jobs == 0 {
        return Err(ConfigError { line: optional("jobs").1, message: "jobs must be at least 1".into() });
    }
    let split_seed = {
        let (v, l) = optional("split_seed");
        parse_value("split_seed", v, l)?
    };
    let subjects = optional("subjects").0.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();

    Ok(ExperimentConfig {
        corpus,
        feature: feature.to_string(),
        feature_dim,
        size,
        regime,
        subjects,
        split_seed,
        train,
        dropout,
        output: PathBuf::from(optional("output").0),
        jobs,
    })
}

/// Reads and parses a config file, consulting `$AAI_CORPUS_ROOT` for a missing corpus.
pub fn parse_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| aai_core::Error::Io { path: path.to_path_buf(), source: e })?;
    let env = std::env::var(CORPUS_ENV).ok();
    parse_config_str(&text, env.as_deref()).map_err(|e| anyhow::Error::new(e).context(format!("in {}", path.display())))
}
