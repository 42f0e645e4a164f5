//! STFT analysis and weighted overlap-add synthesis.
//!
//! Frames use a periodic square-root Hann window at 50 % overlap for both
//! analysis and synthesis, so the squared window sums to one and
//! `synthesize(analyze(x))` reproduces `x` exactly up to rounding.
//!
//! The forward DFT is unnormalized and one-sided (`frame_len / 2 + 1` bins);
//! the inverse carries the `1 / frame_len` factor.
//!
//! Before framing, `frame_len - hop` zeros are prepended and enough zeros are
//! appended that the last input sample is covered by two frames. For a signal
//! of `n >= 1` samples this gives `(n - 1) / hop + 2` frames.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::waveform::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    #[default]
    SqrtHann,
}

/// Frame geometry of an STFT grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameSpec {
    frame_len: usize,
    hop: usize,
    sample_rate: u32,
    window: WindowKind,
}

impl FrameSpec {
    /// 50 % overlap square-root Hann grid with the given power-of-two frame length.
    pub fn new(frame_len: usize, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidRate(sample_rate));
        }
        if frame_len < 2 || !frame_len.is_power_of_two() {
            return Err(Error::InvalidFrameSpec(format!(
                "frame length {frame_len} is not a power of two >= 2"
            )));
        }
        Ok(Self {
            frame_len,
            hop: frame_len / 2,
            sample_rate,
            window: WindowKind::SqrtHann,
        })
    }

    /// Rebuilds a spec from stored fields, checking the hop invariant.
    pub fn from_parts(frame_len: usize, hop: usize, sample_rate: u32) -> Result<Self> {
        let spec = Self::new(frame_len, sample_rate)?;
        if hop != spec.hop {
            return Err(Error::InvalidFrameSpec(format!(
                "hop {hop} must be half the frame length {frame_len}"
            )));
        }
        Ok(spec)
    }

    /// 32 ms frames at 16 kHz (512 samples), the enhancement grid.
    pub fn pipeline() -> Self {
        Self::new(512, 16_000).expect("valid constant spec")
    }

    /// 25.6 ms frames at 5 kHz (128 samples), the transfer-model grid.
    pub fn model() -> Self {
        Self::new(128, 5_000).expect("valid constant spec")
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn window_kind(&self) -> WindowKind {
        self.window
    }

    pub fn num_bins(&self) -> usize {
        self.frame_len / 2 + 1
    }

    /// Zeros prepended before the first frame.
    pub fn pad(&self) -> usize {
        self.frame_len - self.hop
    }

    /// Number of frames `analyze` produces for a signal of `signal_len` samples.
    pub fn frame_count(&self, signal_len: usize) -> usize {
        if signal_len == 0 {
            0
        } else {
            (signal_len - 1) / self.hop + 2
        }
    }

    /// Time of the center of frame `l`, in seconds of the unpadded signal.
    ///
    /// May be negative for the first frame when the pad exceeds half a frame;
    /// with 50 % overlap frame `l` is centered on sample `l * hop`.
    pub fn frame_center_secs(&self, l: usize) -> f64 {
        let center = (l * self.hop + self.frame_len / 2) as f64 - self.pad() as f64;
        center / self.sample_rate as f64
    }

    pub fn window<T: Scalar>(&self) -> Vec<T> {
        sqrt_hann(self.frame_len)
    }

    /// Largest deviation of `w[n]^2 + w[n + hop]^2` from one.
    pub fn cola_error(&self) -> f64 {
        let w: Vec<f64> = self.window();
        (0..self.hop)
            .map(|n| (w[n] * w[n] + w[n + self.hop] * w[n + self.hop] - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Periodic square-root Hann window, `sin(pi n / N)`.
pub fn sqrt_hann<T: Scalar>(len: usize) -> Vec<T> {
    (0..len)
        .map(|n| T::from_f64_lossy((std::f64::consts::PI * n as f64 / len as f64).sin()))
        .collect()
}

/// One-sided complex STFT, `num_bins x num_frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T> {
    data: Array2<Complex<T>>,
    spec: FrameSpec,
    signal_len: usize,
}

impl<T: Scalar> Spectrogram<T> {
    /// Wraps raw STFT data. The represented signal length defaults to
    /// `(num_frames - 1) * hop`, the longest signal mapping to that many frames.
    pub fn new(data: Array2<Complex<T>>, spec: FrameSpec) -> Result<Self> {
        let frames = data.ncols();
        let signal_len = frames.saturating_sub(1) * spec.hop();
        Self::with_signal_len(data, spec, signal_len)
    }

    pub fn with_signal_len(
        data: Array2<Complex<T>>,
        spec: FrameSpec,
        signal_len: usize,
    ) -> Result<Self> {
        if data.nrows() != spec.num_bins() {
            return Err(Error::ShapeMismatch(format!(
                "spectrogram has {} bins, frame spec needs {}",
                data.nrows(),
                spec.num_bins()
            )));
        }
        if signal_len > 0 && spec.frame_count(signal_len) != data.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "{} frames cannot represent a signal of {} samples",
                data.ncols(),
                signal_len
            )));
        }
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("spectrogram"));
        }
        Ok(Self {
            data,
            spec,
            signal_len,
        })
    }

    pub fn zeros(spec: FrameSpec, signal_len: usize) -> Self {
        let frames = spec.frame_count(signal_len);
        Self {
            data: Array2::zeros((spec.num_bins(), frames)),
            spec,
            signal_len,
        }
    }

    pub fn data(&self) -> &Array2<Complex<T>> {
        &self.data
    }

    pub fn into_data(self) -> Array2<Complex<T>> {
        self.data
    }

    pub fn spec(&self) -> &FrameSpec {
        &self.spec
    }

    pub fn num_bins(&self) -> usize {
        self.data.nrows()
    }

    pub fn num_frames(&self) -> usize {
        self.data.ncols()
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_bins(), self.num_frames())
    }

    /// Same geometry, new data. Used by per-bin operations such as masking.
    pub fn with_data(&self, data: Array2<Complex<T>>) -> Result<Self> {
        if data.dim() != self.data.dim() {
            return Err(Error::ShapeMismatch(format!(
                "replacement data {:?} does not match {:?}",
                data.dim(),
                self.data.dim()
            )));
        }
        Self::with_signal_len(data, self.spec, self.signal_len)
    }
}

/// Planned FFTs and window for one `FrameSpec`.
///
/// Construction is the only expensive step; the engine is immutable and can be
/// shared across threads.
pub struct WolaEngine<T: Scalar> {
    spec: FrameSpec,
    window: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Scalar> std::fmt::Debug for WolaEngine<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WolaEngine")
            .field("spec", &self.spec)
            .finish()
    }
}

impl<T: Scalar> WolaEngine<T> {
    pub fn new(spec: FrameSpec) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            spec,
            window: spec.window(),
            forward: planner.plan_fft_forward(spec.frame_len()),
            inverse: planner.plan_fft_inverse(spec.frame_len()),
        }
    }

    pub fn spec(&self) -> &FrameSpec {
        &self.spec
    }

    pub fn analyze(&self, x: &Waveform<T>) -> Result<Spectrogram<T>> {
        if x.sample_rate() != self.spec.sample_rate() {
            return Err(Error::SampleRateMismatch {
                expected: self.spec.sample_rate(),
                found: x.sample_rate(),
            });
        }
        if x.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = self.spec.frame_len();
        let hop = self.spec.hop();
        let bins = self.spec.num_bins();
        let frames = self.spec.frame_count(x.len());
        let pad = self.spec.pad();

        let mut padded = vec![T::zero(); (frames - 1) * hop + n];
        padded[pad..pad + x.len()].copy_from_slice(x.samples());

        let mut data = Array2::zeros((bins, frames));
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        let mut scratch =
            vec![Complex::new(T::zero(), T::zero()); self.forward.get_inplace_scratch_len()];
        for l in 0..frames {
            let frame = &padded[l * hop..l * hop + n];
            for ((b, &s), &w) in buf.iter_mut().zip(frame).zip(&self.window) {
                *b = Complex::new(s * w, T::zero());
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            let mut col = data.column_mut(l);
            for k in 0..bins {
                col[k] = buf[k];
            }
            // Real input: DC and Nyquist are real.
            col[0].im = T::zero();
            col[bins - 1].im = T::zero();
        }
        Spectrogram::with_signal_len(data, self.spec, x.len())
    }

    /// Overlap-add of all frames in padded coordinates, length
    /// `(num_frames - 1) * hop + frame_len`.
    pub fn synthesize_padded(&self, s: &Spectrogram<T>) -> Result<Vec<T>> {
        if *s.spec() != self.spec {
            return Err(Error::ShapeMismatch(
                "spectrogram frame spec differs from engine".into(),
            ));
        }
        if s.num_bins() != self.spec.num_bins() {
            return Err(Error::ShapeMismatch(format!(
                "spectrogram has {} bins, expected {}",
                s.num_bins(),
                self.spec.num_bins()
            )));
        }
        let n = self.spec.frame_len();
        let hop = self.spec.hop();
        let bins = self.spec.num_bins();
        let frames = s.num_frames();
        if frames == 0 {
            return Ok(Vec::new());
        }
        let scale = T::one() / T::from_usize(n).expect("frame length fits in T");

        let mut out = vec![T::zero(); (frames - 1) * hop + n];
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        let mut scratch =
            vec![Complex::new(T::zero(), T::zero()); self.inverse.get_inplace_scratch_len()];
        for l in 0..frames {
            let col = s.data().column(l);
            buf[0] = Complex::new(col[0].re, T::zero());
            buf[n / 2] = Complex::new(col[bins - 1].re, T::zero());
            for k in 1..bins - 1 {
                buf[k] = col[k];
                buf[n - k] = col[k].conj();
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let seg = &mut out[l * hop..l * hop + n];
            for ((o, b), &w) in seg.iter_mut().zip(&buf).zip(&self.window) {
                *o = *o + b.re * scale * w;
            }
        }
        Ok(out)
    }

    /// Inverse of [`analyze`](Self::analyze): strips the analysis padding and
    /// returns `signal_len` samples.
    pub fn synthesize(&self, s: &Spectrogram<T>) -> Result<Waveform<T>> {
        let padded = self.synthesize_padded(s)?;
        let pad = self.spec.pad();
        let len = s.signal_len();
        let mut samples = vec![T::zero(); len];
        if padded.len() > pad {
            let avail = (padded.len() - pad).min(len);
            samples[..avail].copy_from_slice(&padded[pad..pad + avail]);
        }
        Waveform::new(samples, self.spec.sample_rate())
    }
}

pub fn analyze<T: Scalar>(x: &Waveform<T>, spec: FrameSpec) -> Result<Spectrogram<T>> {
    WolaEngine::new(spec).analyze(x)
}

pub fn synthesize<T: Scalar>(s: &Spectrogram<T>) -> Result<Waveform<T>> {
    WolaEngine::new(*s.spec()).synthesize(s)
}
