use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};

/// Sampled mono audio with its sample rate.
///
/// Samples are always finite; construction rejects NaN and infinities.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<T> {
    samples: Vec<T>,
    sample_rate: u32,
}

impl<T: Scalar> Waveform<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidRate(sample_rate));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("waveform samples"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![T::zero(); len], sample_rate)
    }

    /// Builds a waveform from `f64` samples, converting to `T`.
    pub fn from_f64(samples: &[f64], sample_rate: u32) -> Result<Self> {
        Self::new(
            samples.iter().map(|&v| T::from_f64_lossy(v)).collect(),
            sample_rate,
        )
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        scalar::rms(&self.samples)
    }

    pub fn mean_power(&self) -> f64 {
        scalar::mean_power(&self.samples)
    }

    pub fn scaled(&self, gain: T) -> Self {
        Self {
            samples: self.samples.iter().map(|&s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Returns exactly `len` samples: truncated, or zero-padded at the end.
    pub fn fit_to_len(mut self, len: usize) -> Self {
        self.samples.resize(len, T::zero());
        self
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.to_f64_lossy()).collect()
    }
}
