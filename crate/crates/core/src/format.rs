//! Versioned little-endian binary containers for models and masks.
//!
//! Model file (`OVRTF`):
//!
//! ```text
//! magic      5 bytes  "OVRTF"
//! version    u16      1
//! mode       u8       0 = speech-independent, 1 = speech-dependent
//! scope      u8       0 = individual, 1 = talker-averaged
//! slots      u32      P (1 for speech-independent)
//! bins       u32
//! frame_len  u32
//! hop        u32
//! rate       u32
//! rtfs       slots x bins x (f64 re, f64 im), slot-major
//! fallback   bins x (f64 re, f64 im)
//! available  ceil(slots / 8) bytes, bit p % 8 of byte p / 8, LSB first
//! meta_len   u32
//! meta       meta_len bytes of UTF-8 JSON
//! ```
//!
//! Mask file (`OVMSK`):
//!
//! ```text
//! magic      5 bytes  "OVMSK"
//! version    u16      1
//! frame_len  u32
//! hop        u32
//! rate       u32
//! bins       u32
//! frames     u32
//! signal_len u64
//! outer      frames x bins x (f64 re, f64 im), frame-major
//! inear      frames x bins x (f64 re, f64 im), frame-major
//! meta_len   u32
//! meta       meta_len bytes of UTF-8 JSON
//! ```
//!
//! Trailing bytes after the metadata block are rejected.

use std::io::{self, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::rtf::{ModelMetadata, ModelMode, ModelScope, RtfModel};
use crate::scalar::Scalar;
use crate::wola::FrameSpec;

pub const MODEL_MAGIC: &[u8; 5] = b"OVRTF";
pub const MASK_MAGIC: &[u8; 5] = b"OVMSK";
pub const FORMAT_VERSION: u16 = 1;

/// Caps on header-declared sizes so a corrupt header cannot trigger huge allocations.
const MAX_SLOTS: u32 = 1 << 16;
const MAX_BINS: u32 = 1 << 16;
const MAX_FRAMES: u32 = 1 << 24;
const MAX_META: u32 = 1 << 26;

fn corrupt(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Corrupt("unexpected end of file".into())
    } else {
        Error::Io(e)
    }
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn magic(&mut self, expected: &[u8; 5]) -> Result<()> {
        let mut buf = [0u8; 5];
        self.inner.read_exact(&mut buf).map_err(corrupt)?;
        if &buf != expected {
            return Err(Error::Corrupt(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&buf),
                String::from_utf8_lossy(expected)
            )));
        }
        Ok(())
    }

    fn version(&mut self) -> Result<()> {
        let v = self.u16()?;
        if v != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: v,
                supported: FORMAT_VERSION,
            });
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        self.inner.read_u8().map_err(corrupt)
    }

    fn u16(&mut self) -> Result<u16> {
        self.inner.read_u16::<LittleEndian>().map_err(corrupt)
    }

    fn u32(&mut self) -> Result<u32> {
        self.inner.read_u32::<LittleEndian>().map_err(corrupt)
    }

    fn bounded_u32(&mut self, what: &str, max: u32) -> Result<u32> {
        let v = self.u32()?;
        if v > max {
            return Err(Error::Corrupt(format!("{what} {v} exceeds limit {max}")));
        }
        Ok(v)
    }

    fn u64(&mut self) -> Result<u64> {
        self.inner.read_u64::<LittleEndian>().map_err(corrupt)
    }

    fn complex<T: Scalar>(&mut self) -> Result<Complex<T>> {
        let re = self.inner.read_f64::<LittleEndian>().map_err(corrupt)?;
        let im = self.inner.read_f64::<LittleEndian>().map_err(corrupt)?;
        Ok(Complex::new(T::from_f64_lossy(re), T::from_f64_lossy(im)))
    }

    fn spec(&mut self) -> Result<FrameSpec> {
        let frame_len = self.bounded_u32("frame length", 1 << 20)? as usize;
        let hop = self.u32()? as usize;
        let rate = self.u32()?;
        FrameSpec::from_parts(frame_len, hop, rate)
            .map_err(|e| Error::Corrupt(format!("frame spec: {e}")))
    }

    fn bytes(&mut self, len: usize) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        (&mut self.inner)
            .take(len as u64)
            .read_to_end(&mut buf)
            .map_err(corrupt)?;
        if buf.len() != len {
            return Err(Error::Corrupt("unexpected end of file".into()));
        }
        Ok(buf)
    }

    fn meta_json(&mut self) -> Result<String> {
        let len = self.bounded_u32("metadata length", MAX_META)? as usize;
        String::from_utf8(self.bytes(len)?)
            .map_err(|_| Error::Corrupt("metadata is not valid UTF-8".into()))
    }

    fn end(&mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe) {
            Ok(0) => Ok(()),
            Ok(_) => Err(Error::Corrupt("trailing bytes after metadata".into())),
            Err(e) => Err(Error::Io(e)),
        }
    }
}

fn write_complex<W: Write, T: Scalar>(w: &mut W, c: Complex<T>) -> io::Result<()> {
    w.write_f64::<LittleEndian>(c.re.to_f64_lossy())?;
    w.write_f64::<LittleEndian>(c.im.to_f64_lossy())
}

fn write_spec<W: Write>(w: &mut W, spec: &FrameSpec) -> io::Result<()> {
    w.write_u32::<LittleEndian>(spec.frame_len() as u32)?;
    w.write_u32::<LittleEndian>(spec.hop() as u32)?;
    w.write_u32::<LittleEndian>(spec.sample_rate())
}

fn write_meta<W: Write>(w: &mut W, json: &str) -> io::Result<()> {
    w.write_u32::<LittleEndian>(json.len() as u32)?;
    w.write_all(json.as_bytes())
}

pub fn write_model<W: Write, T: Scalar>(w: &mut W, model: &RtfModel<T>) -> Result<()> {
    w.write_all(MODEL_MAGIC)?;
    w.write_u16::<LittleEndian>(FORMAT_VERSION)?;
    w.write_u8(match model.mode() {
        ModelMode::SpeechIndependent => 0,
        ModelMode::SpeechDependent => 1,
    })?;
    w.write_u8(match model.scope() {
        ModelScope::Individual => 0,
        ModelScope::TalkerAveraged => 1,
    })?;
    w.write_u32::<LittleEndian>(model.num_slots() as u32)?;
    w.write_u32::<LittleEndian>(model.num_bins() as u32)?;
    write_spec(w, model.spec())?;
    for slot in 0..model.num_slots() {
        for &c in model.rtfs().column(slot) {
            write_complex(w, c)?;
        }
    }
    for &c in model.fallback() {
        write_complex(w, c)?;
    }
    let mut bitmap = vec![0u8; model.num_slots().div_ceil(8)];
    for (p, _) in model.availability().iter().enumerate().filter(|(_, &a)| a) {
        bitmap[p / 8] |= 1 << (p % 8);
    }
    w.write_all(&bitmap)?;
    let json = serde_json::to_string(model.metadata()).expect("metadata serializes");
    write_meta(w, &json)?;
    Ok(())
}

/// Raw decoded model fields, before model-level validation.
#[derive(Debug, Clone)]
pub struct ModelRecord<T> {
    pub mode: ModelMode,
    pub scope: ModelScope,
    pub spec: FrameSpec,
    pub rtfs: Array2<Complex<T>>,
    pub fallback: Array1<Complex<T>>,
    pub available: Vec<bool>,
    /// Bits set in the bitmap's padding beyond the last slot.
    pub padding_bits: u8,
    pub meta: ModelMetadata,
}

/// Decodes the container without checking model invariants.
pub fn read_model_record<R: Read, T: Scalar>(r: &mut R) -> Result<ModelRecord<T>> {
    let mut rd = Reader { inner: r };
    rd.magic(MODEL_MAGIC)?;
    rd.version()?;
    let mode = match rd.u8()? {
        0 => ModelMode::SpeechIndependent,
        1 => ModelMode::SpeechDependent,
        b => return Err(Error::Corrupt(format!("unknown mode byte {b}"))),
    };
    let scope = match rd.u8()? {
        0 => ModelScope::Individual,
        1 => ModelScope::TalkerAveraged,
        b => return Err(Error::Corrupt(format!("unknown scope byte {b}"))),
    };
    let slots = rd.bounded_u32("slot count", MAX_SLOTS)? as usize;
    let bins = rd.bounded_u32("bin count", MAX_BINS)? as usize;
    let spec = rd.spec()?;
    if spec.num_bins() != bins {
        return Err(Error::Corrupt(format!(
            "{bins} bins inconsistent with frame length {}",
            spec.frame_len()
        )));
    }
    let mut rtfs = Array2::from_elem((bins, slots), Complex::new(T::zero(), T::zero()));
    for slot in 0..slots {
        for k in 0..bins {
            rtfs[[k, slot]] = rd.complex()?;
        }
    }
    let mut fallback = Array1::from_elem(bins, Complex::new(T::zero(), T::zero()));
    for k in 0..bins {
        fallback[k] = rd.complex()?;
    }
    let bitmap = rd.bytes(slots.div_ceil(8))?;
    let available = (0..slots)
        .map(|p| bitmap[p / 8] >> (p % 8) & 1 == 1)
        .collect();
    let padding_bits = if slots.is_multiple_of(8) {
        0
    } else {
        bitmap[slots / 8] >> (slots % 8)
    };
    let meta: ModelMetadata = serde_json::from_str(&rd.meta_json()?)
        .map_err(|e| Error::Corrupt(format!("metadata: {e}")))?;
    rd.end()?;
    Ok(ModelRecord {
        mode,
        scope,
        spec,
        rtfs,
        fallback,
        available,
        padding_bits,
        meta,
    })
}

pub fn read_model<R: Read, T: Scalar>(r: &mut R) -> Result<RtfModel<T>> {
    let rec = read_model_record(r)?;
    if rec.padding_bits != 0 {
        return Err(Error::Corrupt(
            "availability bitmap has padding bits set".into(),
        ));
    }
    if rec.meta.frame_counts.len() != rec.available.len() {
        return Err(Error::Corrupt(
            "frame count list does not match slot count".into(),
        ));
    }
    let min_frames = rec.meta.min_frames.max(1);
    for (p, (&avail, &count)) in rec.available.iter().zip(&rec.meta.frame_counts).enumerate() {
        if avail != (count >= min_frames) {
            return Err(Error::Corrupt(format!(
                "availability bit of slot {p} disagrees with its frame count {count}"
            )));
        }
    }
    RtfModel::from_parts(
        rec.mode,
        rec.scope,
        rec.spec,
        rec.rtfs,
        rec.fallback,
        rec.available,
        rec.meta,
    )
    .map_err(|e| match e {
        Error::Io(e) => Error::Io(e),
        other => Error::Corrupt(other.to_string()),
    })
}

pub fn save_model<T: Scalar>(model: &RtfModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_model(&mut buf, model)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<RtfModel<T>> {
    let bytes = std::fs::read(path)?;
    read_model(&mut bytes.as_slice())
}

/// Decoded mask container fields.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskRecord<T> {
    pub spec: FrameSpec,
    pub signal_len: usize,
    pub outer: Array2<Complex<T>>,
    pub inear: Array2<Complex<T>>,
    pub meta: serde_json::Value,
}

pub fn write_mask<W: Write, T: Scalar>(w: &mut W, rec: &MaskRecord<T>) -> Result<()> {
    if rec.outer.dim() != rec.inear.dim() {
        return Err(Error::ShapeMismatch(
            "outer and in-ear masks differ in shape".into(),
        ));
    }
    w.write_all(MASK_MAGIC)?;
    w.write_u16::<LittleEndian>(FORMAT_VERSION)?;
    write_spec(w, &rec.spec)?;
    let (bins, frames) = rec.outer.dim();
    w.write_u32::<LittleEndian>(bins as u32)?;
    w.write_u32::<LittleEndian>(frames as u32)?;
    w.write_u64::<LittleEndian>(rec.signal_len as u64)?;
    for m in [&rec.outer, &rec.inear] {
        for l in 0..frames {
            for &c in m.column(l) {
                write_complex(w, c)?;
            }
        }
    }
    write_meta(
        w,
        &serde_json::to_string(&rec.meta).expect("json value serializes"),
    )?;
    Ok(())
}

pub fn read_mask<R: Read, T: Scalar>(r: &mut R) -> Result<MaskRecord<T>> {
    let mut rd = Reader { inner: r };
    rd.magic(MASK_MAGIC)?;
    rd.version()?;
    let spec = rd.spec()?;
    let bins = rd.bounded_u32("bin count", MAX_BINS)? as usize;
    let frames = rd.bounded_u32("frame count", MAX_FRAMES)? as usize;
    if spec.num_bins() != bins {
        return Err(Error::Corrupt(format!(
            "{bins} bins inconsistent with frame length {}",
            spec.frame_len()
        )));
    }
    let signal_len = rd.u64()? as usize;
    if signal_len > 0 && spec.frame_count(signal_len) != frames {
        return Err(Error::Corrupt(format!(
            "{frames} frames inconsistent with signal length {signal_len}"
        )));
    }
    let mut read_matrix = || -> Result<Array2<Complex<T>>> {
        let mut m = Array2::from_elem((bins, frames), Complex::new(T::zero(), T::zero()));
        for l in 0..frames {
            for k in 0..bins {
                m[[k, l]] = rd.complex()?;
            }
        }
        Ok(m)
    };
    let outer = read_matrix()?;
    let inear = read_matrix()?;
    let meta = serde_json::from_str(&rd.meta_json()?)
        .map_err(|e| Error::Corrupt(format!("metadata: {e}")))?;
    rd.end()?;
    Ok(MaskRecord {
        spec,
        signal_len,
        outer,
        inear,
        meta,
    })
}

pub fn save_mask<T: Scalar>(rec: &MaskRecord<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_mask(&mut buf, rec)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_mask<T: Scalar>(path: impl AsRef<Path>) -> Result<MaskRecord<T>> {
    let bytes = std::fs::read(path)?;
    read_mask(&mut bytes.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phoneme::PhonemeInventory;

    fn sample_model() -> RtfModel<f64> {
        let bins = FrameSpec::model().num_bins();
        let rtfs = Array2::from_shape_fn((bins, 3), |(k, p)| {
            Complex::new(k as f64 * 0.1 + p as f64, -(k as f64) / 7.0)
        });
        let available = vec![true, false, true];
        let mut fallback = Array1::zeros(bins);
        for k in 0..bins {
            fallback[k] = (rtfs[[k, 0]] + rtfs[[k, 2]]) / 2.0;
        }
        let mut rtfs = rtfs;
        rtfs.column_mut(1).fill(Complex::new(0.0, 0.0));
        let meta = ModelMetadata {
            talkers: vec!["t01".into()],
            utterances: 3,
            frame_counts: vec![10, 0, 4],
            min_frames: 1,
            eps: 1e-12,
            low_confidence: vec![],
            inventory: Some(PhonemeInventory::numbered(3).unwrap().labels().to_vec()),
        };
        RtfModel::from_parts(
            ModelMode::SpeechDependent,
            ModelScope::Individual,
            FrameSpec::model(),
            rtfs,
            fallback,
            available,
            meta,
        )
        .unwrap()
    }

    fn bytes(m: &RtfModel<f64>) -> Vec<u8> {
        let mut buf = Vec::new();
        write_model(&mut buf, m).unwrap();
        buf
    }

    #[test]
    fn model_header_layout() {
        let b = bytes(&sample_model());
        assert_eq!(&b[..5], b"OVRTF");
        assert_eq!(u16::from_le_bytes([b[5], b[6]]), 1);
        assert_eq!(b[7], 1);
        assert_eq!(b[8], 0);
        assert_eq!(u32::from_le_bytes(b[9..13].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(b[13..17].try_into().unwrap()), 65);
        // Bitmap follows header (29 bytes) + 4 * 65 complex values.
        let bitmap_at = 29 + 4 * 65 * 16;
        assert_eq!(b[bitmap_at], 0b101);
    }

    #[test]
    fn model_round_trip_is_bitwise() {
        let m = sample_model();
        let back: RtfModel<f64> = read_model(&mut bytes(&m).as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(bytes(&back), bytes(&m));
    }

    #[test]
    fn truncated_model_is_corrupt() {
        let b = bytes(&sample_model());
        for cut in [0, 3, 10, 40, b.len() / 2, b.len() - 1] {
            assert!(
                matches!(read_model::<_, f64>(&mut &b[..cut]), Err(Error::Corrupt(_))),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn bumped_version_is_rejected() {
        let mut b = bytes(&sample_model());
        b[5] = 2;
        assert!(matches!(
            read_model::<_, f64>(&mut b.as_slice()),
            Err(Error::VersionMismatch {
                found: 2,
                supported: 1
            })
        ));
    }

    #[test]
    fn other_corruptions() {
        let mut b = bytes(&sample_model());
        b[0] = b'X';
        assert!(matches!(
            read_model::<_, f64>(&mut b.as_slice()),
            Err(Error::Corrupt(_))
        ));

        let mut b = bytes(&sample_model());
        b.push(0);
        assert!(matches!(
            read_model::<_, f64>(&mut b.as_slice()),
            Err(Error::Corrupt(_))
        ));

        let mut b = bytes(&sample_model());
        let bitmap_at = 29 + 4 * 65 * 16;
        b[bitmap_at] |= 0b1000;
        assert!(matches!(
            read_model::<_, f64>(&mut b.as_slice()),
            Err(Error::Corrupt(_))
        ));

        // Slot 1 has no frames; claiming it is available is a corruption.
        let mut b = bytes(&sample_model());
        b[bitmap_at] |= 0b010;
        assert!(matches!(
            read_model::<_, f64>(&mut b.as_slice()),
            Err(Error::Corrupt(_))
        ));
    }

    #[test]
    fn mask_round_trip() {
        let spec = FrameSpec::pipeline();
        let frames = spec.frame_count(1000);
        let rec = MaskRecord {
            spec,
            signal_len: 1000,
            outer: Array2::from_shape_fn((257, frames), |(k, l)| Complex::new(k as f64, l as f64)),
            inear: Array2::from_shape_fn((257, frames), |(k, l)| {
                Complex::new(-(l as f64), 0.5 * k as f64)
            }),
            meta: serde_json::json!({"source": "test"}),
        };
        let mut buf = Vec::new();
        write_mask(&mut buf, &rec).unwrap();
        assert_eq!(&buf[..5], b"OVMSK");
        let back: MaskRecord<f64> = read_mask(&mut buf.as_slice()).unwrap();
        assert_eq!(back, rec);
        assert!(matches!(
            read_mask::<_, f64>(&mut &buf[..buf.len() - 3]),
            Err(Error::Corrupt(_))
        ));
        buf[5] = 9;
        assert!(matches!(
            read_mask::<_, f64>(&mut buf.as_slice()),
            Err(Error::VersionMismatch { .. })
        ));
    }

    #[test]
    fn single_precision_round_trip() {
        let m64 = sample_model();
        let b = bytes(&m64);
        let m32: RtfModel<f32> = read_model(&mut b.as_slice()).unwrap();
        let mut again = Vec::new();
        write_model(&mut again, &m32).unwrap();
        let m32b: RtfModel<f32> = read_model(&mut again.as_slice()).unwrap();
        assert_eq!(m32, m32b);
    }
}
