//! Own-voice transfer-characteristic estimation and data augmentation for
//! hearables with an outer and an in-ear microphone.
//!
//! The signal chain: [`wola`] analysis/synthesis, [`resample`] between the
//! 16 kHz pipeline rate and the 5 kHz model rate, [`rtf`] least-squares
//! relative transfer functions (optionally per phoneme, see [`phoneme`]),
//! [`augment`] to simulate in-ear speech from outer-microphone speech,
//! [`spatial`] noise rendering through measured impulse responses, [`mixer`]
//! for SNR control and normalization, and [`reconstruct`] for applying
//! complex masks. [`format`] holds the binary model and mask containers.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision for the common cases.

pub mod augment;
pub mod error;
pub mod format;
pub mod mixer;
pub mod phoneme;
pub mod reconstruct;
pub mod resample;
pub mod rtf;
pub mod scalar;
pub mod spatial;
pub mod waveform;
pub mod wola;

pub use augment::{augment, AugmentConfig, Augmentor, Technique};
pub use error::{Error, Result};
pub use format::{load_mask, load_model, save_mask, save_model, MaskRecord};
pub use mixer::{mix_at_snr, normalize, MixResult, SnrDistribution};
pub use phoneme::{PhonemeId, PhonemeInventory, PhonemeSequence};
pub use reconstruct::apply_masks;
pub use resample::{resample, Resampler};
pub use rtf::{ModelMode, ModelScope, RtfAccumulator, RtfModel};
pub use scalar::Scalar;
pub use spatial::{spatialize, HrirSet, SpatializeConfig, SpatializedNoise};
pub use waveform::Waveform;
pub use wola::{analyze, synthesize, FrameSpec, Spectrogram, WolaEngine};

pub type Waveform64 = Waveform<f64>;
pub type Waveform32 = Waveform<f32>;
pub type Spectrogram64 = Spectrogram<f64>;
pub type Spectrogram32 = Spectrogram<f32>;
pub type RtfModel64 = RtfModel<f64>;
pub type RtfModel32 = RtfModel<f32>;
pub type RtfAccumulator64 = RtfAccumulator<f64>;
pub type RtfAccumulator32 = RtfAccumulator<f32>;
pub type HrirSet64 = HrirSet<f64>;
pub type HrirSet32 = HrirSet<f32>;
pub type MixResult64 = MixResult<f64>;
pub type MixResult32 = MixResult<f32>;
pub type MaskRecord64 = MaskRecord<f64>;
