use crate::corpus::{pool_subjects, Utterance};
use crate::error::{Error, Result};
use crate::model::{build_model, load_checkpoint, ModelConfig, ModelParams};
use crate::numerics::Scalar;

use super::{train, TrainConfig, TrainOutcome};

/// One subject's utterances, already split.
#[derive(Clone, Debug)]
pub struct SubjectData<T> {
    pub subject: String,
    pub train: Vec<Utterance<T>>,
    pub val: Vec<Utterance<T>>,
    pub test: Vec<Utterance<T>>,
}

impl<T: Scalar> SubjectData<T> {
    /// Feature dimension shared by all utterances, if any exist.
    pub fn feature_dim(&self) -> Option<usize> {
        self.train.iter().chain(&self.val).chain(&self.test).map(|u| u.features.dim()).next()
    }
}

fn check_dim(model: &ModelConfig, dim: Option<usize>, what: &str) -> Result<()> {
    match dim {
        Some(d) if d != model.input_dim => Err(Error::Conflict(format!(
            "{what} has feature dim {d}, model expects {}",
            model.input_dim
        ))),
        _ => Ok(()),
    }
}

/// Fresh model trained on one subject.
pub fn run_subject_specific<T: Scalar>(
    model: &ModelConfig,
    data: &SubjectData<T>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    check_dim(model, data.feature_dim(), &data.subject)?;
    train(build_model(model, cfg.seed)?, &data.train, &data.val, cfg)
}

/// Fresh model trained on the union of all subjects' train sets, validated
/// on the union of their validation sets.
pub fn run_pooled<T: Scalar>(model: &ModelConfig, subjects: &[SubjectData<T>], cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    for s in subjects {
        check_dim(model, s.feature_dim(), &s.subject)?;
    }
    let train_set = pool_subjects(subjects.iter().map(|s| s.train.clone()).collect())?;
    let val_set = pool_subjects(subjects.iter().map(|s| s.val.clone()).collect())?;
    train(build_model(model, cfg.seed)?, &train_set, &val_set, cfg)
}

/// Continues training from the checkpoint named by `cfg.warm_start` on one subject.
pub fn run_fine_tuned<T: Scalar>(data: &SubjectData<T>, cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    let path = cfg
        .warm_start
        .as_ref()
        .ok_or_else(|| Error::Config("fine-tuning requires a warm-start checkpoint".into()))?;
    let pooled: ModelParams<T> = load_checkpoint(path)?;
    check_dim(pooled.config(), data.feature_dim(), &data.subject)?;
    train(pooled, &data.train, &data.val, cfg)
}
