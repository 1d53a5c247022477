//! Pearson correlation between predicted and measured trajectories, and the
//! aggregation conventions used when reporting them.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::corpus::{make_batches, BatchOptions, Utterance};
use crate::error::{Error, Result};
use crate::model::{forward, Mode, ModelParams};
use crate::numerics::{Scalar, Tensor};
use crate::signal::{CHANNELS, NUM_CHANNELS};

/// Correlation coefficient; `degenerate` marks a constant input, for which
/// the value is defined as 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correlation {
    pub value: f64,
    pub degenerate: bool,
}

/// Covariance over the product of population standard deviations.
pub fn pearson_cc<T: Scalar>(a: &[T], b: &[T]) -> Result<Correlation> {
    if a.len() != b.len() {
        return Err(Error::dim("pearson_cc", format!("lengths {} and {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::InputTooShort(format!("correlation needs 2 samples, got {}", a.len())));
    }
    let x: Vec<f64> = a.iter().map(|v| v.to_f64_lossy()).collect();
    let y: Vec<f64> = b.iter().map(|v| v.to_f64_lossy()).collect();
    if x.iter().chain(&y).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value in correlation input".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&u, &v) in x.iter().zip(&y) {
        let (du, dv) = (u - mx, v - my);
        sxy += du * dv;
        sxx += du * du;
        syy += dv * dv;
    }
    // Rounding leaves tiny nonzero deviations for constant input.
    let flat = |s: f64, vals: &[f64]| {
        let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        s <= n * (1e-12 * scale).powi(2)
    };
    if flat(sxx, &x) || flat(syy, &y) {
        return Ok(Correlation { value: 0.0, degenerate: true });
    }
    Ok(Correlation {
        value: (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

/// Arithmetic mean and sample (n−1) standard deviation. A single value has std 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Mean and sample std across the 12 per-channel means of a table row.
pub fn aggregate_table(channel_means: &[f64]) -> Result<(f64, f64)> {
    if channel_means.len() != NUM_CHANNELS {
        return Err(Error::dim(
            "aggregate_table",
            format!("expected {NUM_CHANNELS} channel values, got {}", channel_means.len()),
        ));
    }
    Ok(mean_std(channel_means))
}

/// Per-(utterance, channel) correlations with their aggregates.
#[derive(Clone, Debug, PartialEq)]
pub struct CcReport {
    /// Utterance ids, in evaluation order.
    pub utterances: Vec<String>,
    /// `values[u][c]`: correlation of utterance `u` on channel `CHANNELS[c]`.
    pub values: Vec<[f64; NUM_CHANNELS]>,
    pub degenerate: Vec<[bool; NUM_CHANNELS]>,
    pub channel_means: [f64; NUM_CHANNELS],
    /// Mean of the channel means.
    pub overall: f64,
    /// Sample std across the 12 channel means.
    pub channel_std: f64,
    /// Sample std across per-utterance means (each averaged over channels).
    pub utterance_std: f64,
}

impl CcReport {
    /// Builds the report from per-utterance correlations.
    pub fn from_entries(
        utterances: Vec<String>,
        values: Vec<[f64; NUM_CHANNELS]>,
        degenerate: Vec<[bool; NUM_CHANNELS]>,
    ) -> Result<Self> {
        if utterances.is_empty() {
            return Err(Error::EmptyReport);
        }
        if values.len() != utterances.len() || degenerate.len() != utterances.len() {
            return Err(Error::dim(
                "CcReport",
                format!("{} ids, {} rows, {} flags", utterances.len(), values.len(), degenerate.len()),
            ));
        }
        let n = values.len() as f64;
        let mut channel_means = [0.0; NUM_CHANNELS];
        for (c, m) in channel_means.iter_mut().enumerate() {
            *m = values.iter().map(|row| row[c]).sum::<f64>() / n;
        }
        let (overall, channel_std) = mean_std(&channel_means);
        let per_utt: Vec<f64> = values.iter().map(|r| r.iter().sum::<f64>() / NUM_CHANNELS as f64).collect();
        let (_, utterance_std) = mean_std(&per_utt);
        Ok(Self {
            utterances,
            values,
            degenerate,
            channel_means,
            overall,
            channel_std,
            utterance_std,
        })
    }

    /// Correlates each prediction (`T × 12`) with its target over all frames.
    pub fn from_predictions<T: Scalar>(ids: Vec<String>, preds: &[Tensor<T>], targets: &[Tensor<T>]) -> Result<Self> {
        if preds.len() != ids.len() || targets.len() != ids.len() {
            return Err(Error::dim(
                "CcReport",
                format!("{} ids, {} predictions, {} targets", ids.len(), preds.len(), targets.len()),
            ));
        }
        let mut values = Vec::with_capacity(ids.len());
        let mut flags = Vec::with_capacity(ids.len());
        for ((id, p), t) in ids.iter().zip(preds).zip(targets) {
            p.expect_same_shape(t, "CcReport")?;
            if p.rank() != 2 || p.last_dim() != NUM_CHANNELS {
                return Err(Error::dim("CcReport", format!("{id}: expected T x 12, got {:?}", p.shape())));
            }
            let mut row = [0.0; NUM_CHANNELS];
            let mut flag = [false; NUM_CHANNELS];
            for c in 0..NUM_CHANNELS {
                let pc: Vec<T> = p.data().iter().skip(c).step_by(NUM_CHANNELS).copied().collect();
                let tc: Vec<T> = t.data().iter().skip(c).step_by(NUM_CHANNELS).copied().collect();
                let r = pearson_cc(&pc, &tc).map_err(|e| match e {
                    Error::InputTooShort(_) => Error::InputTooShort(format!("utterance {id} has {} frames", pc.len())),
                    other => other,
                })?;
                row[c] = r.value;
                flag[c] = r.degenerate;
            }
            values.push(row);
            flags.push(flag);
        }
        Self::from_entries(ids, values, flags)
    }

    /// Concatenates reports (e.g. one per subject-specific model).
    pub fn merge(reports: &[CcReport]) -> Result<Self> {
        let mut ids = Vec::new();
        let mut values = Vec::new();
        let mut flags = Vec::new();
        for r in reports {
            ids.extend(r.utterances.iter().cloned());
            values.extend(r.values.iter().copied());
            flags.extend(r.degenerate.iter().copied());
        }
        Self::from_entries(ids, values, flags)
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().flatten().filter(|&&d| d).count()
    }

    /// `"0.8231 (0.061)"`, using the channel-mean std.
    pub fn summary_line(&self) -> String {
        format!("{:.4} ({:.3})", self.overall, self.channel_std)
    }

    /// `utterance,channel,cc,degenerate` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("utterance,channel,cc,degenerate\n");
        for ((id, row), flags) in self.utterances.iter().zip(&self.values).zip(&self.degenerate) {
            for c in 0..NUM_CHANNELS {
                let _ = writeln!(s, "{id},{},{},{}", CHANNELS[c], row[c], flags[c]);
            }
        }
        s
    }

    /// One markdown table row per label, channel columns then `mean (std)`.
    pub fn markdown_table(rows: &[(&str, &CcReport)]) -> String {
        let mut s = String::from("| setup |");
        for c in CHANNELS {
            let _ = write!(s, " {c} |");
        }
        s.push_str(" mean (std) |\n|---|");
        s.push_str(&"---|".repeat(NUM_CHANNELS + 1));
        s.push('\n');
        for (label, r) in rows {
            let _ = write!(s, "| {label} |");
            for m in r.channel_means {
                let _ = write!(s, " {m:.4} |");
            }
            let _ = writeln!(s, " {} |", r.summary_line());
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_csv())
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Eval-mode predictions `T × 12` for each utterance, in input order.
pub fn predict<T: Scalar>(params: &ModelParams<T>, utts: &[Utterance<T>], batch_size: usize) -> Result<Vec<Tensor<T>>> {
    let opts = BatchOptions { batch_size, ..Default::default() };
    let mut out: Vec<Option<Tensor<T>>> = vec![None; utts.len()];
    for b in make_batches(utts, &opts)? {
        let pred = forward(params, &b.features, &b.mask, Mode::Eval)?;
        for (row, &i) in b.indices.iter().enumerate() {
            let valid = b.valid_region(&pred, row).to_vec();
            out[i] = Some(Tensor::new(vec![b.lengths[row], NUM_CHANNELS], valid)?);
        }
    }
    Ok(out.into_iter().map(|t| t.expect("every utterance batched")).collect())
}

/// Correlation report of a model on a set of utterances.
pub fn evaluate<T: Scalar>(params: &ModelParams<T>, utts: &[Utterance<T>]) -> Result<CcReport> {
    if utts.is_empty() {
        return Err(Error::EmptyReport);
    }
    let dim = params.config().input_dim;
    if let Some(u) = utts.iter().find(|u| u.features.dim() != dim) {
        return Err(Error::Conflict(format!(
            "utterance {} has feature dim {}, model expects {dim}",
            u.id(),
            u.features.dim()
        )));
    }
    let preds = predict(params, utts, crate::corpus::DEFAULT_BATCH_SIZE)?;
    let targets: Vec<Tensor<T>> = utts.iter().map(|u| u.targets.frames().clone()).collect();
    CcReport::from_predictions(utts.iter().map(Utterance::id).collect(), &preds, &targets)
}
