use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Train/validation/test fractions.
pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.8, 0.1, 0.1);

/// Disjoint sentence-id partition shared by every subject.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
    pub seed: u64,
}

impl Split {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

/// Seeded shuffle, then `floor(n · ratio)` ids to validation and test; the
/// remainder goes to training. Each part is returned sorted.
pub fn make_splits(sentence_ids: &[u32], ratios: (f64, f64, f64), seed: u64) -> Result<Split> {
    let (rt, rv, rs) = ratios;
    if [rt, rv, rs].iter().any(|r| !(0.0..=1.0).contains(r)) || (rt + rv + rs - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!("split ratios {ratios:?} must be in [0,1] and sum to 1")));
    }
    let mut ids = sentence_ids.to_vec();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Parameter("duplicate sentence ids".into()));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let n = ids.len() as f64;
    // small slack so 0.1 * 460 floors to 46, not 45
    let n_val = (n * rv + 1e-9).floor() as usize;
    let n_test = (n * rs + 1e-9).floor() as usize;
    let mut val = ids[..n_val].to_vec();
    let mut test = ids[n_val..n_val + n_test].to_vec();
    let mut train = ids[n_val + n_test..].to_vec();
    val.sort_unstable();
    test.sort_unstable();
    train.sort_unstable();
    Ok(Split { train, val, test, seed })
}

fn write_ids(path: &Path, ids: &[u32]) -> Result<()> {
    let text: String = ids.iter().map(|id| format!("{id}\n")).collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_ids(path: &Path) -> Result<Vec<u32>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse().map_err(|_| Error::Format {
                path: path.to_path_buf(),
                detail: format!("bad sentence id {l:?}"),
            })
        })
        .collect()
}

/// Writes `train.txt`, `val.txt`, `test.txt` into `dir`.
pub fn write_split(dir: &Path, split: &Split) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_ids(&dir.join("train.txt"), &split.train)?;
    write_ids(&dir.join("val.txt"), &split.val)?;
    write_ids(&dir.join("test.txt"), &split.test)
}

pub fn read_split(dir: &Path, seed: u64) -> Result<Split> {
    Ok(Split {
        train: read_ids(&dir.join("train.txt"))?,
        val: read_ids(&dir.join("val.txt"))?,
        test: read_ids(&dir.join("test.txt"))?,
        seed,
    })
}
