//! Feature × (size, regime) grid over many `eval` outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use aai_core::corpus::REGISTRY;
use aai_core::model::SizeClass;
use aai_core::training::Regime;
use aai_core::Error;
use anyhow::Result;

use crate::experiment::{EvalSummary, EVAL_SUMMARY};
use crate::UsageError;

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_MARKDOWN: &str = "report.md";

fn size_rank(s: &str) -> usize {
    SizeClass::ALL.iter().position(|c| c.as_str() == s).unwrap_or(usize::MAX)
}

fn regime_rank(s: &str) -> usize {
    Regime::ALL.iter().position(|r| r.as_str() == s).unwrap_or(usize::MAX)
}

/// Registry order first, then anything else alphabetically.
fn feature_rank(name: &str) -> (usize, String) {
    let base = name.split('@').next().unwrap_or(name);
    let pos = REGISTRY.iter().position(|(n, _)| n.eq_ignore_ascii_case(base)).unwrap_or(REGISTRY.len());
    (pos, name.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// `(size, regime)` column keys in display order.
    pub columns: Vec<(String, String)>,
    /// Feature name and one optional cell per column.
    pub rows: Vec<(String, Vec<Option<EvalSummary>>)>,
}

impl Grid {
    pub fn build(summaries: Vec<EvalSummary>) -> Result<Self> {
        let mut cells: BTreeMap<((usize, String), (usize, usize, String, String)), EvalSummary> = BTreeMap::new();
        for s in summaries {
            let col = (size_rank(&s.size), regime_rank(&s.regime), s.size.clone(), s.regime.clone());
            let key = (feature_rank(&s.feature), col);
            if cells.contains_key(&key) {
                return Err(UsageError(format!("two eval outputs for {} {} {}", s.feature, s.size, s.regime)).into());
            }
            cells.insert(key, s);
        }
        let mut columns: Vec<(usize, usize, String, String)> = cells.keys().map(|(_, c)| c.clone()).collect();
        columns.sort();
        columns.dedup();
        let mut features: Vec<(usize, String)> = cells.keys().map(|(f, _)| f.clone()).collect();
        features.dedup();
        let rows = features
            .into_iter()
            .map(|f| {
                let row = columns.iter().map(|c| cells.get(&(f.clone(), c.clone())).cloned()).collect();
                (f.1, row)
            })
            .collect();
        Ok(Grid { columns: columns.into_iter().map(|(_, _, s, r)| (s, r)).collect(), rows })
    }

    fn header(&self, size: &str, regime: &str) -> String {
        let sizes: std::collections::BTreeSet<&str> = self.columns.iter().map(|(s, _)| s.as_str()).collect();
        if sizes.len() == 1 {
            regime.to_string()
        } else {
            format!("{size} {regime}")
        }
    }

    /// Cells read `mean (std)`, the std taken across utterance-level means.
    pub fn markdown(&self) -> String {
        let heads: Vec<String> = self.columns.iter().map(|(s, r)| self.header(s, r)).collect();
        let mut out = format!("| feature | {} |\n|---|{}\n", heads.join(" | "), "---|".repeat(heads.len()));
        for (feature, cells) in &self.rows {
            let cells: Vec<String> = cells
                .iter()
                .map(|c| c.as_ref().map_or("-".to_string(), |s| format!("{:.4} ({:.3})", s.overall, s.utterance_std)))
                .collect();
            out.push_str(&format!("| {feature} | {} |\n", cells.join(" | ")));
        }
        out
    }

    /// Long-form rows: `feature,size,regime,cc,std,utterances`.
    pub fn csv(&self) -> String {
        let mut out = String::from("feature,size,regime,cc,std,utterances\n");
        for (_, cells) in &self.rows {
            for s in cells.iter().flatten() {
                out.push_str(&format!("{},{},{},{},{},{}\n", s.feature, s.size, s.regime, s.overall, s.utterance_std, s.utterances));
            }
        }
        out
    }
}

/// Reads `eval.summary` from each run directory and writes the grid to `out`.
pub fn report(run_dirs: &[impl AsRef<Path>], out: &Path) -> Result<Grid> {
    if run_dirs.is_empty() {
        return Err(UsageError("report needs at least one run directory".into()).into());
    }
    let summaries = run_dirs
        .iter()
        .map(|d| EvalSummary::read(&d.as_ref().join(EVAL_SUMMARY)))
        .collect::<Result<Vec<_>>>()?;
    let grid = Grid::build(summaries)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for (name, text) in [(REPORT_CSV, grid.csv()), (REPORT_MARKDOWN, grid.markdown())] {
        let path = out.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(feature: &str, size: &str, regime: &str, overall: f64) -> EvalSummary {
        EvalSummary {
            feature: feature.into(),
            size: size.into(),
            regime: regime.into(),
            overall,
            channel_std: 0.05,
            utterance_std: 0.02,
            utterances: 46,
        }
    }

    #[test]
    fn rows_follow_registry_and_columns_follow_regimes() {
        let g = Grid::build(vec![
            summary("TERA", "m", "ft", 0.8879),
            summary("MFCC", "m", "pooled", 0.8606),
            summary("MFCC", "m", "ss", 0.8231),
        ])
        .unwrap();
        assert_eq!(g.columns, [("m".into(), "ss".into()), ("m".into(), "pooled".into()), ("m".into(), "ft".into())]);
        let md = g.markdown();
        assert!(md.starts_with("| feature | ss | pooled | ft |"));
        assert!(md.contains("| MFCC | 0.8231 (0.020) | 0.8606 (0.020) | - |"));
        assert!(md.contains("| TERA | - | - | 0.8879 (0.020) |"));
    }

    #[test]
    fn mixed_sizes_label_columns_with_both() {
        let g = Grid::build(vec![summary("MFCC", "l", "ss", 0.8), summary("MFCC", "s", "ss", 0.8)]).unwrap();
        assert!(g.markdown().starts_with("| feature | s ss | l ss |"));
        assert!(Grid::build(vec![summary("MFCC", "s", "ss", 0.8), summary("MFCC", "s", "ss", 0.7)]).is_err());
    }
}
