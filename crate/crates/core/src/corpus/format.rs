//! AAIF (features) and AAIT (targets) binary files.
//!
//! Layout, all little-endian:
//!
//! | field       | type          |
//! |-------------|---------------|
//! | magic       | 4 bytes       |
//! | version     | u32           |
//! | dim         | u32           |
//! | frame_count | u32           |
//! | frame_rate  | f32           |
//! | name_len    | u16           |
//! | name        | UTF-8 bytes   |
//! | payload     | f32, frame-major, `frame_count * dim` values |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};
use crate::signal::{ArticulatoryTrajectory, FeatureMatrix, NUM_CHANNELS};

use super::registry::registry_dim;

pub const FEATURE_MAGIC: [u8; 4] = *b"AAIF";
pub const TARGET_MAGIC: [u8; 4] = *b"AAIT";
pub const FORMAT_VERSION: u32 = 1;
const TARGET_NAME: &str = "EMA";

#[derive(Clone, Debug, PartialEq)]
pub struct FileHeader {
    pub magic: [u8; 4],
    pub version: u32,
    pub dim: u32,
    pub frame_count: u32,
    pub frame_rate: f32,
    pub name: String,
}

impl FileHeader {
    pub fn encoded_len(&self) -> usize {
        4 + 4 + 4 + 4 + 4 + 2 + self.name.len()
    }

    pub fn payload_len(&self) -> usize {
        self.dim as usize * self.frame_count as usize
    }
}

/// Serializes a header and payload. The payload length must equal `dim * frame_count`.
pub fn encode(header: &FileHeader, payload: &[f32]) -> Result<Vec<u8>> {
    if payload.len() != header.payload_len() {
        return Err(Error::dim(
            "encode",
            format!("payload of {} values for {} x {}", payload.len(), header.frame_count, header.dim),
        ));
    }
    let name_len = u16::try_from(header.name.len())
        .map_err(|_| Error::Parameter(format!("name too long ({} bytes)", header.name.len())))?;
    let mut out = Vec::with_capacity(header.encoded_len() + 4 * payload.len());
    out.extend_from_slice(&header.magic);
    out.extend_from_slice(&header.version.to_le_bytes());
    out.extend_from_slice(&header.dim.to_le_bytes());
    out.extend_from_slice(&header.frame_count.to_le_bytes());
    out.extend_from_slice(&header.frame_rate.to_le_bytes());
    out.extend_from_slice(&name_len.to_le_bytes());
    out.extend_from_slice(header.name.as_bytes());
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                detail: format!("{what}: need {n} bytes at offset {}, file has {}", self.pos, self.bytes.len()),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

fn decode_header(cur: &mut Cursor<'_>, expected_magic: [u8; 4]) -> Result<FileHeader> {
    let magic: [u8; 4] = cur.take(4, "magic")?.try_into().unwrap();
    if magic != expected_magic {
        return Err(Error::BadMagic {
            path: cur.path.to_path_buf(),
            expected: expected_magic,
            found: magic,
        });
    }
    let version = cur.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            path: cur.path.to_path_buf(),
            expected: FORMAT_VERSION,
            found: version,
        });
    }
    let dim = cur.u32("dim")?;
    let frame_count = cur.u32("frame_count")?;
    let frame_rate = f32::from_le_bytes(cur.take(4, "frame_rate")?.try_into().unwrap());
    let name_len = u16::from_le_bytes(cur.take(2, "name_len")?.try_into().unwrap());
    let name = std::str::from_utf8(cur.take(name_len as usize, "name")?)
        .map_err(|_| Error::Format {
            path: cur.path.to_path_buf(),
            detail: "name is not valid UTF-8".into(),
        })?
        .to_string();
    Ok(FileHeader { magic, version, dim, frame_count, frame_rate, name })
}

/// Parses bytes with the given magic; `path` is used for error context only.
pub fn decode(bytes: &[u8], expected_magic: [u8; 4], path: &Path) -> Result<(FileHeader, Vec<f32>)> {
    let mut cur = Cursor { bytes, pos: 0, path };
    let header = decode_header(&mut cur, expected_magic)?;
    let n = header.payload_len();
    let raw = cur.take(n * 4, "payload")?;
    if cur.pos != bytes.len() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: format!("{} trailing bytes after payload", bytes.len() - cur.pos),
        });
    }
    let payload = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((header, payload))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Header only; accepts either magic.
pub fn read_header(path: &Path) -> Result<FileHeader> {
    let bytes = read_bytes(path)?;
    let magic = if bytes.starts_with(&TARGET_MAGIC) { TARGET_MAGIC } else { FEATURE_MAGIC };
    decode_header(&mut Cursor { bytes: &bytes, pos: 0, path }, magic)
}

fn check_registry(name: &str, dim: usize) -> Result<()> {
    match registry_dim(name) {
        Some(d) if d.dim != dim => Err(Error::RegistryConflict {
            name: d.name,
            expected: d.dim,
            found: dim,
        }),
        _ => Ok(()),
    }
}

fn to_f32<T: Scalar>(t: &Tensor<T>) -> Vec<f32> {
    t.data().iter().map(|v| v.to_f32().unwrap_or(f32::NAN)).collect()
}

fn from_f32<T: Scalar>(v: &[f32]) -> Vec<T> {
    v.iter().map(|&x| T::from_f32(x).unwrap()).collect()
}

fn u32_field(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Parameter(format!("{what} {v} exceeds u32")))
}

pub fn write_feature_file<T: Scalar>(path: &Path, f: &FeatureMatrix<T>) -> Result<()> {
    check_registry(f.name(), f.dim())?;
    let header = FileHeader {
        magic: FEATURE_MAGIC,
        version: FORMAT_VERSION,
        dim: u32_field(f.dim(), "dim")?,
        frame_count: u32_field(f.len(), "frame count")?,
        frame_rate: f.rate() as f32,
        name: f.name().to_string(),
    };
    write_bytes(path, &encode(&header, &to_f32(f.frames()))?)
}

/// Reads an AAIF file. Registered feature names must carry their registry dim.
pub fn read_feature_file<T: Scalar>(path: &Path) -> Result<FeatureMatrix<T>> {
    let (h, payload) = decode(&read_bytes(path)?, FEATURE_MAGIC, path)?;
    if h.dim == 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: "dim must be positive".into(),
        });
    }
    check_registry(&h.name, h.dim as usize)?;
    let frames = Tensor::new(vec![h.frame_count as usize, h.dim as usize], from_f32(&payload))?;
    FeatureMatrix::new(frames, h.frame_rate as f64, h.name)
}

pub fn write_target_file<T: Scalar>(path: &Path, t: &ArticulatoryTrajectory<T>) -> Result<()> {
    let header = FileHeader {
        magic: TARGET_MAGIC,
        version: FORMAT_VERSION,
        dim: NUM_CHANNELS as u32,
        frame_count: u32_field(t.len(), "frame count")?,
        frame_rate: t.rate() as f32,
        name: TARGET_NAME.to_string(),
    };
    write_bytes(path, &encode(&header, &to_f32(t.frames()))?)
}

pub fn read_target_file<T: Scalar>(path: &Path) -> Result<ArticulatoryTrajectory<T>> {
    let (h, payload) = decode(&read_bytes(path)?, TARGET_MAGIC, path)?;
    if h.dim as usize != NUM_CHANNELS {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: format!("target dim must be {NUM_CHANNELS}, found {}", h.dim),
        });
    }
    let frames = Tensor::new(vec![h.frame_count as usize, NUM_CHANNELS], from_f32(&payload))?;
    ArticulatoryTrajectory::new(frames, h.frame_rate as f64)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn matrix(frames: usize, dim: usize, name: &str) -> FeatureMatrix<f32> {
        let t = Tensor::from_fn(&[frames, dim], |i| ((i * 2654435761) % 1000) as f32 / 37.0 - 13.0);
        FeatureMatrix::new(t, 100.0, name).unwrap()
    }

    #[test]
    fn tera_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("1.aaif-TERA");
        let f = matrix(37, 768, "TERA");
        write_feature_file(&p, &f).unwrap();
        let g: FeatureMatrix<f32> = read_feature_file(&p).unwrap();
        assert_eq!(g, f);
        let bits = |m: &FeatureMatrix<f32>| m.frames().data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&g), bits(&f));
    }

    #[test]
    fn registry_conflict_on_read_and_write() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad");
        assert!(matches!(write_feature_file(&p, &matrix(2, 512, "TERA")), Err(Error::RegistryConflict { .. })));
        let h = FileHeader {
            magic: FEATURE_MAGIC,
            version: 1,
            dim: 512,
            frame_count: 1,
            frame_rate: 100.0,
            name: "TERA".into(),
        };
        fs::write(&p, encode(&h, &[0.0; 512]).unwrap()).unwrap();
        assert!(matches!(read_feature_file::<f32>(&p), Err(Error::RegistryConflict { .. })));
    }

    #[test]
    fn zero_frames_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty");
        write_feature_file(&p, &matrix(0, 13, "MFCC")).unwrap();
        let g: FeatureMatrix<f64> = read_feature_file(&p).unwrap();
        assert_eq!((g.len(), g.dim()), (0, 13));
    }

    #[test]
    fn distinct_errors_for_each_defect() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f");
        write_feature_file(&p, &matrix(3, 13, "MFCC")).unwrap();
        let good = fs::read(&p).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        fs::write(&p, &bad).unwrap();
        assert!(matches!(read_feature_file::<f32>(&p), Err(Error::BadMagic { .. })));

        let mut bad = good.clone();
        bad[4] = 2;
        fs::write(&p, &bad).unwrap();
        assert!(matches!(read_feature_file::<f32>(&p), Err(Error::Version { found: 2, .. })));

        fs::write(&p, &good[..good.len() - 3]).unwrap();
        assert!(matches!(read_feature_file::<f32>(&p), Err(Error::Truncated { .. })));

        fs::write(&p, &good[..10]).unwrap();
        assert!(matches!(read_feature_file::<f32>(&p), Err(Error::Truncated { .. })));
    }

    #[test]
    fn header_layout_is_bit_exact() {
        let h = FileHeader {
            magic: FEATURE_MAGIC,
            version: 1,
            dim: 2,
            frame_count: 1,
            frame_rate: 100.0,
            name: "ab".into(),
        };
        let bytes = encode(&h, &[1.0, -2.0]).unwrap();
        let mut expected = b"AAIF".to_vec();
        expected.extend_from_slice(&[1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0]);
        expected.extend_from_slice(&100f32.to_le_bytes());
        expected.extend_from_slice(&[2, 0, b'a', b'b']);
        expected.extend_from_slice(&1f32.to_le_bytes());
        expected.extend_from_slice(&(-2f32).to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn target_round_trip_and_magic_separation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.aait");
        let t = ArticulatoryTrajectory::new(Tensor::from_fn(&[5, 12], |i| i as f64 * 0.25), 100.0).unwrap();
        write_target_file(&p, &t).unwrap();
        assert_eq!(read_target_file::<f64>(&p).unwrap(), t);
        assert!(matches!(read_feature_file::<f64>(&p), Err(Error::BadMagic { .. })));
        assert_eq!(read_header(&p).unwrap().name, "EMA");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn encode_decode_round_trip(dim in 1usize..4096, frames in 0usize..1000, seed in any::<u32>()) {
            prop_assume!(dim * frames <= 400_000);
            let payload: Vec<f32> = (0..dim * frames)
                .map(|i| f32::from_bits((i as u32).wrapping_mul(seed | 1) & 0x3fff_ffff))
                .collect();
            let h = FileHeader {
                magic: FEATURE_MAGIC,
                version: FORMAT_VERSION,
                dim: dim as u32,
                frame_count: frames as u32,
                frame_rate: 100.0,
                name: "synth".into(),
            };
            let bytes = encode(&h, &payload).unwrap();
            let (h2, p2) = decode(&bytes, FEATURE_MAGIC, Path::new("mem")).unwrap();
            prop_assert_eq!(h2, h);
            prop_assert_eq!(
                p2.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                payload.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
