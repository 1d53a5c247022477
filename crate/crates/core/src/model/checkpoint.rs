//! `AAIM` checkpoint files.
//!
//! `"AAIM" | version u32 | config block | tensor count u32 | tensors`, where
//! the config block is `size-class name (u16 len + UTF-8) | input_dim u32 |
//! width u32 | layers u32 | ff_width u32 | heads u32 | dropout f64 | max_len u32`
//! and each tensor is `name (u16 len + UTF-8) | rank u32 | extents u32… |
//! f32 payload`. Everything little-endian.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};

use super::{ModelConfig, ModelParams};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"AAIM";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_str(out: &mut Vec<u8>, s: &str) -> Result<()> {
    let n = u16::try_from(s.len()).map_err(|_| Error::Parameter(format!("name too long: {s}")))?;
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Parameter(format!("{v} exceeds u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn save_checkpoint<T: Scalar>(path: &Path, params: &ModelParams<T>) -> Result<()> {
    let c = params.config();
    let mut out = CHECKPOINT_MAGIC.to_vec();
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    put_str(&mut out, c.size_class.as_str())?;
    for v in [c.input_dim, c.width, c.layers, c.ff_width, c.heads] {
        put_u32(&mut out, v)?;
    }
    out.extend_from_slice(&c.dropout.to_le_bytes());
    put_u32(&mut out, c.max_len)?;
    put_u32(&mut out, params.tensors().len())?;
    for (name, t) in params.iter() {
        put_str(&mut out, name)?;
        put_u32(&mut out, t.rank())?;
        for &e in t.shape() {
            put_u32(&mut out, e)?;
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_f32().unwrap_or(f32::NAN).to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                detail: format!("need {n} bytes at offset {}", self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = u16::from_le_bytes(self.take(2)?.try_into().unwrap()) as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::Format {
            path: self.path.to_path_buf(),
            detail: "invalid UTF-8 name".into(),
        })
    }
}

/// Loads and validates a checkpoint against its own config block.
pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<ModelParams<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { bytes: &bytes, pos: 0, path };
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: CHECKPOINT_MAGIC,
            found: magic,
        });
    }
    let version = r.u32()? as u32;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            expected: CHECKPOINT_VERSION,
            found: version,
        });
    }
    let size_class = r.string()?.parse()?;
    let config = ModelConfig {
        size_class,
        input_dim: r.u32()?,
        width: r.u32()?,
        layers: r.u32()?,
        ff_width: r.u32()?,
        heads: r.u32()?,
        dropout: r.f64()?,
        max_len: r.u32()?,
    };
    let count = r.u32()?;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let name = r.string()?;
        let rank = r.u32()?;
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let data = r
            .take(n * 4)?
            .chunks_exact(4)
            .map(|c| T::from_f32(f32::from_le_bytes(c.try_into().unwrap())).unwrap())
            .collect();
        tensors.insert(name, Tensor::new(shape, data)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: "trailing bytes".into(),
        });
    }
    ModelParams::from_tensors(config, tensors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, SizeClass};

    #[test]
    fn round_trip_at_single_precision() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.aaim");
        let params: ModelParams<f64> = build_model(&ModelConfig::preset(SizeClass::Tiny, 7), 3).unwrap();
        save_checkpoint(&p, &params).unwrap();
        let back: ModelParams<f64> = load_checkpoint(&p).unwrap();
        assert_eq!(back.config(), params.config());
        assert_eq!(back.tensors().len(), params.tensors().len());
        for (name, t) in params.iter() {
            let expected: Vec<f64> = t.data().iter().map(|&v| v as f32 as f64).collect();
            assert_eq!(back.get(name).unwrap().data(), expected.as_slice());
        }
    }

    #[test]
    fn rejects_other_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.aaim");
        let params: ModelParams<f64> = build_model(&ModelConfig::preset(SizeClass::Tiny, 2), 0).unwrap();
        save_checkpoint(&p, &params).unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(load_checkpoint::<f64>(&p), Err(Error::Truncated { .. })));
        fs::write(&p, b"AAIF\x01\x00\x00\x00").unwrap();
        assert!(matches!(load_checkpoint::<f64>(&p), Err(Error::BadMagic { .. })));
    }
}
