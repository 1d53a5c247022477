use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};

use super::{ArticulatoryTrajectory, Waveform, CHANNELS, NUM_CHANNELS};

fn format_err(path: &Path, detail: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

/// Reads a mono 16-bit PCM RIFF WAVE file, scaling samples to [-1, 1).
pub fn read_wav<T: Scalar>(path: &Path) -> Result<Waveform<T>> {
    let mut reader = hound::WavReader::open(path).map_err(|e| format_err(path, e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(format_err(path, format!("expected mono audio, found {} channels", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(format_err(
            path,
            format!("expected 16-bit integer PCM, found {:?} {}-bit", spec.sample_format, spec.bits_per_sample),
        ));
    }
    let scale = T::lit(1.0 / 32768.0);
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| T::from_i16(v).unwrap() * scale))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| format_err(path, e.to_string()))?;
    Waveform::new(samples, spec.sample_rate)
}

/// Writes a mono 16-bit PCM file, clipping to the representable range.
pub fn write_wav<T: Scalar>(path: &Path, w: &Waveform<T>) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| format_err(path, e.to_string()))?;
    for &s in &w.samples {
        let v = (s.to_f64_lossy() * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(|e| format_err(path, e.to_string()))?;
    }
    writer.finalize().map_err(|e| format_err(path, e.to_string()))
}

/// Reads EMA from CSV: a header naming the twelve channels (any order),
/// then one row per frame at `rate` Hz.
pub fn read_ema_csv<T: Scalar>(path: &Path, rate: f64) -> Result<ArticulatoryTrajectory<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format_err(path, e.to_string()))?;
    let headers = reader.headers().map_err(|e| format_err(path, e.to_string()))?.clone();
    let columns = CHANNELS
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| format_err(path, format!("missing channel column {name}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut data = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format_err(path, e.to_string()))?;
        for &col in &columns {
            let field = record.get(col).unwrap_or("");
            let v: f64 = field
                .parse()
                .map_err(|_| format_err(path, format!("row {}: bad number {field:?}", line + 2)))?;
            if !v.is_finite() {
                return Err(format_err(path, format!("row {}: non-finite value", line + 2)));
            }
            data.push(T::lit(v));
        }
    }
    let frames = data.len() / NUM_CHANNELS;
    ArticulatoryTrajectory::new(Tensor::new(vec![frames, NUM_CHANNELS], data)?, rate)
}

pub fn write_ema_csv<T: Scalar>(path: &Path, t: &ArticulatoryTrajectory<T>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| format_err(path, e.to_string()))?;
    writer.write_record(CHANNELS).map_err(|e| format_err(path, e.to_string()))?;
    for f in 0..t.len() {
        let row: Vec<String> = t.frames().row(f).iter().map(|v| v.to_string()).collect();
        writer.write_record(&row).map_err(|e| format_err(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
