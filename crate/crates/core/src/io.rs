//! File formats: mono WAV, FVT1 tensors and FVW1 weight containers.
//!
//! FVT1 layout (little-endian): magic `FVT1`, `u32` dtype code (1 = f32),
//! `u32` ndim, `ndim × u64` dims, row-major f32 payload.
//!
//! FVW1 layout: magic `FVW1`, `u32` manifest byte length, UTF-8
//! `key=value` manifest, then for each tensor in manifest order a `u32` name
//! length, the UTF-8 name and an FVT1 blob.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use crate::dsp::Waveform;
use crate::net::{ArchManifest, GeneratorWeights};
use crate::{Error, Result};

pub const FVT1_MAGIC: &[u8; 4] = b"FVT1";
pub const FVW1_MAGIC: &[u8; 4] = b"FVW1";
pub const DTYPE_F32: u32 = 1;

/// Upper bound on tensor rank and name length accepted when reading.
const MAX_NDIM: u32 = 16;
const MAX_NAME: u32 = 4096;

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated file: {e}")))?;
    Ok(b)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

/// Writes `t` as FVT1; values are narrowed to f32.
pub fn write_fvt1(w: &mut impl Write, t: &ArrayD<f64>) -> Result<()> {
    w.write_all(FVT1_MAGIC)?;
    w.write_all(&DTYPE_F32.to_le_bytes())?;
    w.write_all(&(t.ndim() as u32).to_le_bytes())?;
    for &d in t.shape() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(t.len() * 4);
    for &v in t.iter() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_fvt1(r: &mut impl Read) -> Result<ArrayD<f64>> {
    if &read_array::<4>(r)? != FVT1_MAGIC {
        return Err(Error::Format("bad FVT1 magic".into()));
    }
    let dtype = read_u32(r)?;
    if dtype != DTYPE_F32 {
        return Err(Error::Format(format!("unsupported FVT1 dtype code {dtype}")));
    }
    let ndim = read_u32(r)?;
    if ndim > MAX_NDIM {
        return Err(Error::Format(format!("FVT1 rank {ndim} is too large")));
    }
    let mut dims = Vec::with_capacity(ndim as usize);
    let mut count: usize = 1;
    for _ in 0..ndim {
        let d = usize::try_from(read_u64(r)?).map_err(|_| Error::Format("FVT1 dimension overflow".into()))?;
        count = count
            .checked_mul(d)
            .ok_or_else(|| Error::Format("FVT1 dimension overflow".into()))?;
        dims.push(d);
    }
    let bytes = count
        .checked_mul(4)
        .ok_or_else(|| Error::Format("FVT1 payload overflow".into()))?;
    let mut payload = Vec::new();
    r.take(bytes as u64).read_to_end(&mut payload)?;
    if payload.len() != bytes {
        return Err(Error::Format(format!(
            "FVT1 payload has {} bytes, expected {bytes}",
            payload.len()
        )));
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    ArrayD::from_shape_vec(IxDyn(&dims), data).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_tensor(path: impl AsRef<Path>, t: &ArrayD<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_fvt1(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<ArrayD<f64>> {
    let mut r = BufReader::new(File::open(path)?);
    let t = read_fvt1(&mut r)?;
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Format("trailing bytes after FVT1 payload".into()));
    }
    Ok(t)
}

pub fn write_weights(w: &mut impl Write, weights: &GeneratorWeights) -> Result<()> {
    let manifest = weights.manifest.to_text();
    w.write_all(FVW1_MAGIC)?;
    w.write_all(&(manifest.len() as u32).to_le_bytes())?;
    w.write_all(manifest.as_bytes())?;
    for (name, t) in weights.named_tensors() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        write_fvt1(w, &t)?;
    }
    Ok(())
}

pub fn read_weights(r: &mut impl Read) -> Result<GeneratorWeights> {
    if &read_array::<4>(r)? != FVW1_MAGIC {
        return Err(Error::Format("bad FVW1 magic".into()));
    }
    let len = read_u32(r)? as usize;
    let mut text = Vec::new();
    r.take(len as u64).read_to_end(&mut text)?;
    if text.len() != len {
        return Err(Error::Format("truncated FVW1 manifest".into()));
    }
    let text = String::from_utf8(text).map_err(|_| Error::Format("FVW1 manifest is not UTF-8".into()))?;
    let manifest = ArchManifest::parse(&text)?;
    let count = manifest.tensor_specs().len();
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let n = read_u32(r)?;
        if n > MAX_NAME {
            return Err(Error::Format(format!("tensor name length {n} is too large")));
        }
        let mut name = Vec::new();
        r.take(n as u64).read_to_end(&mut name)?;
        if name.len() != n as usize {
            return Err(Error::Format("truncated tensor name".into()));
        }
        let name = String::from_utf8(name).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        tensors.push((name, read_fvt1(r)?));
    }
    GeneratorWeights::from_named_tensors(manifest, tensors)
}

pub fn save_weights(path: impl AsRef<Path>, weights: &GeneratorWeights) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_weights(&mut w, weights)?;
    w.flush()?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<GeneratorWeights> {
    read_weights(&mut BufReader::new(File::open(path)?))
}

/// Reads a mono WAV file (integer PCM or 32-bit float).
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Unsupported(format!("{} channels, only mono is supported", spec.channels)));
    }
    let samples: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        hound::SampleFormat::Int => {
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    Waveform::new(samples, spec.sample_rate)
}

/// Writes 32-bit float mono WAV.
pub fn write_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &w.samples {
        writer.write_sample(s as f32)?;
    }
    writer.finalize()?;
    Ok(())
}

/// Writes 16-bit PCM mono WAV, clipping to [-1, 1].
pub fn write_wav_pcm16(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &w.samples {
        writer.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::gen_weights;
    use ndarray::array;

    #[test]
    fn fvt1_layout() {
        let t = array![[1.0, -2.0, 0.5]].into_dyn();
        let mut buf = Vec::new();
        write_fvt1(&mut buf, &t).unwrap();
        assert_eq!(&buf[..4], b"FVT1");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[8..12], &2u32.to_le_bytes());
        assert_eq!(&buf[12..20], &1u64.to_le_bytes());
        assert_eq!(&buf[20..28], &3u64.to_le_bytes());
        assert_eq!(&buf[28..32], &1.0f32.to_le_bytes());
        assert_eq!(buf.len(), 28 + 12);
        assert_eq!(read_fvt1(&mut buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn fvt1_rejects_corruption() {
        let t = array![1.0, 2.0].into_dyn();
        let mut buf = Vec::new();
        write_fvt1(&mut buf, &t).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_fvt1(&mut bad.as_slice()).is_err());
        let mut bad = buf.clone();
        bad[4] = 2;
        assert!(read_fvt1(&mut bad.as_slice()).is_err());
        assert!(read_fvt1(&mut &buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn fvt1_bytes_round_trip() {
        let t = array![[0.1f32 as f64, 3.25], [-7.0, 1e-5f32 as f64]].into_dyn();
        let mut a = Vec::new();
        write_fvt1(&mut a, &t).unwrap();
        let back = read_fvt1(&mut a.as_slice()).unwrap();
        let mut b = Vec::new();
        write_fvt1(&mut b, &back).unwrap();
        assert_eq!(a, b);
        assert_eq!(back, t);
    }

    #[test]
    fn weights_round_trip_and_version_check() {
        let m = ArchManifest {
            n_mels: 4,
            n_freq: 9,
            psp_dim: 3,
            psp_blocks: 2,
            hidden: 5,
            asp_dim: 9,
            ..ArchManifest::freev()
        };
        let w = gen_weights(11, &m).unwrap();
        let mut buf = Vec::new();
        write_weights(&mut buf, &w).unwrap();
        assert_eq!(read_weights(&mut buf.as_slice()).unwrap(), w);

        let text = m.to_text();
        let pos = buf.windows(16).position(|s| s == b"format_version=1").unwrap();
        let mut bad = buf.clone();
        bad[pos + 15] = b'9';
        assert!(matches!(read_weights(&mut bad.as_slice()), Err(Error::Format(_))));
        assert!(text.starts_with("format_version=1"));
    }

    #[test]
    fn wav_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let w = Waveform::new(vec![0.0, 0.5, -0.25, 0.125], 22050).unwrap();
        let p = dir.path().join("a.wav");
        write_wav(&p, &w).unwrap();
        assert_eq!(read_wav(&p).unwrap(), w);
        let q = dir.path().join("b.wav");
        write_wav_pcm16(&q, &w).unwrap();
        let back = read_wav(&q).unwrap();
        for (a, b) in back.samples.iter().zip(&w.samples) {
            assert!((a - b).abs() < 1e-4);
        }
    }
}
