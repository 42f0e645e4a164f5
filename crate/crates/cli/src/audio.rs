//! WAV reading and writing.

use std::path::Path;

use anyhow::{bail, Context, Result};
use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use ovaug::Waveform64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Float32,
    Int16,
}

fn to_f64<R: std::io::Read>(reader: WavReader<R>, path: &Path) -> Result<(Vec<f64>, WavSpec)> {
    let spec = reader.spec();
    let samples = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<Vec<_>, _>>(),
        (SampleFormat::Int, bits @ 8..=32) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect()
        }
        (fmt, bits) => bail!(
            "{}: unsupported sample format {fmt:?}/{bits}",
            path.display()
        ),
    }
    .with_context(|| format!("reading {}", path.display()))?;
    Ok((samples, spec))
}

/// All channels of a WAV file, deinterleaved, and its sample rate.
pub fn read_channels(path: &Path) -> Result<(Vec<Vec<f64>>, u32)> {
    let reader = WavReader::open(path).with_context(|| format!("opening {}", path.display()))?;
    let (interleaved, spec) = to_f64(reader, path)?;
    let ch = spec.channels as usize;
    let mut out = vec![Vec::with_capacity(interleaved.len() / ch); ch];
    for frame in interleaved.chunks_exact(ch) {
        for (c, &v) in frame.iter().enumerate() {
            out[c].push(v);
        }
    }
    Ok((out, spec.sample_rate))
}

pub fn read_mono(path: &Path) -> Result<Waveform64> {
    let (mut ch, rate) = read_channels(path)?;
    if ch.len() != 1 {
        bail!(
            "{}: expected mono audio, found {} channels",
            path.display(),
            ch.len()
        );
    }
    Waveform64::new(ch.remove(0), rate).with_context(|| path.display().to_string())
}

/// `len` samples of a mono file starting at `offset`, read without loading
/// the rest of the file.
pub fn read_mono_segment(path: &Path, offset: usize, len: usize) -> Result<Waveform64> {
    let mut reader =
        WavReader::open(path).with_context(|| format!("opening {}", path.display()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        bail!(
            "{}: expected mono audio, found {} channels",
            path.display(),
            spec.channels
        );
    }
    reader
        .seek(offset as u32)
        .with_context(|| format!("seeking in {}", path.display()))?;
    let (samples, _) = to_f64(reader, path)?;
    if samples.len() < len {
        bail!("{}: segment past the end of the file", path.display());
    }
    Waveform64::new(samples[..len].to_vec(), spec.sample_rate)
        .with_context(|| path.display().to_string())
}

/// Sample count and rate from the header only.
pub fn probe(path: &Path) -> Result<(usize, u32, u16)> {
    let reader = WavReader::open(path).with_context(|| format!("opening {}", path.display()))?;
    let spec = reader.spec();
    Ok((reader.duration() as usize, spec.sample_rate, spec.channels))
}

pub fn write(path: &Path, channels: &[&Waveform64], format: OutputFormat) -> Result<()> {
    let Some(first) = channels.first() else {
        bail!("no channels to write to {}", path.display());
    };
    if channels
        .iter()
        .any(|c| c.len() != first.len() || c.sample_rate() != first.sample_rate())
    {
        bail!(
            "channels written to {} differ in length or rate",
            path.display()
        );
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let spec = WavSpec {
        channels: channels.len() as u16,
        sample_rate: first.sample_rate(),
        bits_per_sample: match format {
            OutputFormat::Float32 => 32,
            OutputFormat::Int16 => 16,
        },
        sample_format: match format {
            OutputFormat::Float32 => SampleFormat::Float,
            OutputFormat::Int16 => SampleFormat::Int,
        },
    };
    let mut w =
        WavWriter::create(path, spec).with_context(|| format!("creating {}", path.display()))?;
    for n in 0..first.len() {
        for c in channels {
            let v = c.samples()[n];
            match format {
                OutputFormat::Float32 => w.write_sample(v as f32)?,
                OutputFormat::Int16 => {
                    w.write_sample((v * 32768.0).round().clamp(-32768.0, 32767.0) as i16)?
                }
            }
        }
    }
    w.finalize()
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip_and_segments() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let x = Waveform64::new((0..100).map(|n| n as f64 / 128.0).collect(), 16000).unwrap();
        write(&p, &[&x], OutputFormat::Float32).unwrap();
        assert_eq!(read_mono(&p).unwrap(), x);
        assert_eq!(probe(&p).unwrap(), (100, 16000, 1));
        let seg = read_mono_segment(&p, 10, 5).unwrap();
        assert_eq!(seg.samples(), &x.samples()[10..15]);
        assert!(read_mono_segment(&p, 98, 5).is_err());
    }

    #[test]
    fn stereo_and_int16() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        let a = Waveform64::new(vec![0.5, -0.25, 0.0], 8000).unwrap();
        let b = Waveform64::new(vec![-1.0, 0.125, 0.75], 8000).unwrap();
        write(&p, &[&a, &b], OutputFormat::Int16).unwrap();
        let (ch, rate) = read_channels(&p).unwrap();
        assert_eq!(rate, 8000);
        assert_eq!(ch, vec![a.samples().to_vec(), b.samples().to_vec()]);
        assert!(read_mono(&p).is_err());
    }
}
