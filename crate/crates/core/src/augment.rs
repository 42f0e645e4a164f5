//! Simulation of in-ear own voice from single-channel speech.
//!
//! The speech is taken as the outer-microphone own voice. It is resampled to
//! the model rate, analyzed on the model grid, multiplied frame by frame with
//! an RTF sequence, synthesized, and resampled back to its original rate.
//!
//! The RTF sequence depends on the technique:
//! - speech-independent: the model's single RTF in every frame;
//! - speech-dependent: the RTF of each frame's phoneme (fallback for unknown or
//!   unestimated phonemes), recursively smoothed over frames;
//! - random-phoneme: as speech-dependent, with a seeded uniform random
//!   phoneme in every frame instead of the aligned one.

use ndarray::Array2;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phoneme::{random_sequence, PhonemeSequence};
use crate::resample::Resampler;
use crate::rtf::{ModelMode, RtfModel};
use crate::scalar::Scalar;
use crate::waveform::Waveform;
use crate::wola::WolaEngine;

pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Technique {
    SpeechIndependent,
    SpeechDependent,
    RandomPhoneme,
}

impl Technique {
    pub fn needs_alignment(self) -> bool {
        self == Technique::SpeechDependent
    }

    pub fn required_model_mode(self) -> ModelMode {
        match self {
            Technique::SpeechIndependent => ModelMode::SpeechIndependent,
            Technique::SpeechDependent | Technique::RandomPhoneme => ModelMode::SpeechDependent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub technique: Technique,
    /// Recursive smoothing constant in `[0, 1)`.
    pub alpha: f64,
    /// Seed of the random phoneme sequence (random-phoneme technique only).
    pub seed: u64,
}

impl AugmentConfig {
    pub fn new(technique: Technique) -> Self {
        Self {
            technique,
            alpha: DEFAULT_ALPHA,
            seed: 0,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "smoothing constant {alpha} outside [0, 1)"
        )));
    }
    Ok(())
}

/// Per-frame RTF lookup, `num_bins x num_frames`.
pub fn select_rtf_sequence<T: Scalar>(
    model: &RtfModel<T>,
    phonemes: &PhonemeSequence,
) -> Result<Array2<Complex<T>>> {
    if model.mode() != ModelMode::SpeechDependent {
        return Err(Error::IncompatibleModel(
            "phoneme-driven RTF selection needs a speech-dependent model".into(),
        ));
    }
    if phonemes.inventory().size() != model.num_slots() {
        return Err(Error::IncompatibleModel(format!(
            "phoneme inventory has {} classes, model {}",
            phonemes.inventory().size(),
            model.num_slots()
        )));
    }
    let mut out = Array2::from_elem(
        (model.num_bins(), phonemes.len()),
        Complex::new(T::zero(), T::zero()),
    );
    for (l, &id) in phonemes.ids().iter().enumerate() {
        out.column_mut(l).assign(&model.rtf_for(id));
    }
    Ok(out)
}

/// First-order recursive smoothing along frames:
/// `out[:, 0] = h[:, 0]`, `out[:, l] = alpha * out[:, l - 1] + (1 - alpha) * h[:, l]`.
///
/// Evaluated as `h + alpha * (out[l - 1] - h)` so that a constant sequence is
/// reproduced bit for bit.
pub fn smooth_rtf_sequence<T: Scalar>(
    h: &Array2<Complex<T>>,
    alpha: f64,
) -> Result<Array2<Complex<T>>> {
    check_alpha(alpha)?;
    let mut out = h.clone();
    if alpha == 0.0 {
        return Ok(out);
    }
    let a = T::from_f64_lossy(alpha);
    for l in 1..out.ncols() {
        for k in 0..out.nrows() {
            let cur = h[[k, l]];
            out[[k, l]] = cur + (out[[k, l - 1]] - cur) * a;
        }
    }
    Ok(out)
}

/// Reusable augmentation pipeline for one model and one input rate.
#[derive(Debug)]
pub struct Augmentor<'m, T: Scalar> {
    model: &'m RtfModel<T>,
    cfg: AugmentConfig,
    input_rate: u32,
    down: Resampler<T>,
    up: Resampler<T>,
    wola: WolaEngine<T>,
}

impl<'m, T: Scalar> Augmentor<'m, T> {
    pub fn new(model: &'m RtfModel<T>, cfg: AugmentConfig, input_rate: u32) -> Result<Self> {
        cfg.validate()?;
        if model.mode() != cfg.technique.required_model_mode() {
            return Err(Error::IncompatibleModel(format!(
                "{:?} augmentation needs a {:?} model, got {:?}",
                cfg.technique,
                cfg.technique.required_model_mode(),
                model.mode()
            )));
        }
        let model_rate = model.spec().sample_rate();
        Ok(Self {
            model,
            cfg,
            input_rate,
            down: Resampler::new(input_rate, model_rate)?,
            up: Resampler::new(model_rate, input_rate)?,
            wola: WolaEngine::new(*model.spec()),
        })
    }

    pub fn config(&self) -> &AugmentConfig {
        &self.cfg
    }

    pub fn model(&self) -> &'m RtfModel<T> {
        self.model
    }

    /// Length of the input after resampling to the model rate.
    pub fn model_signal_len(&self, input_len: usize) -> usize {
        self.down.output_len(input_len)
    }

    /// Frames on the model grid for an input of `input_len` samples; an
    /// alignment for [`augment`](Self::augment) must have this many frames.
    pub fn model_frame_count(&self, input_len: usize) -> usize {
        self.model
            .spec()
            .frame_count(self.model_signal_len(input_len))
    }

    fn rtf_sequence(
        &self,
        frames: usize,
        phonemes: Option<&PhonemeSequence>,
        seed: u64,
    ) -> Result<Array2<Complex<T>>> {
        match self.cfg.technique {
            Technique::SpeechIndependent => {
                if phonemes.is_some() {
                    return Err(Error::InvalidParameter(
                        "speech-independent augmentation takes no phoneme sequence".into(),
                    ));
                }
                let col = self.model.rtfs().column(0);
                let mut seq =
                    Array2::from_elem((col.len(), frames), Complex::new(T::zero(), T::zero()));
                for mut c in seq.columns_mut() {
                    c.assign(&col);
                }
                Ok(seq)
            }
            Technique::SpeechDependent => {
                let seq = phonemes.ok_or_else(|| {
                    Error::InvalidParameter("speech-dependent augmentation needs phonemes".into())
                })?;
                seq.expect_frames(frames)?;
                smooth_rtf_sequence(&select_rtf_sequence(self.model, seq)?, self.cfg.alpha)
            }
            Technique::RandomPhoneme => {
                if phonemes.is_some() {
                    return Err(Error::InvalidParameter(
                        "random-phoneme augmentation draws its own phonemes".into(),
                    ));
                }
                let inventory = self
                    .model
                    .inventory()
                    .ok_or_else(|| {
                        Error::IncompatibleModel("model has no phoneme inventory".into())
                    })?
                    .clone();
                let seq = random_sequence(frames, inventory, *self.model.spec(), seed);
                smooth_rtf_sequence(&select_rtf_sequence(self.model, &seq)?, self.cfg.alpha)
            }
        }
    }

    /// Simulated in-ear own voice, same rate and length as `speech`.
    pub fn augment(
        &self,
        speech: &Waveform<T>,
        phonemes: Option<&PhonemeSequence>,
    ) -> Result<Waveform<T>> {
        self.augment_seeded(speech, phonemes, self.cfg.seed)
    }

    /// As [`augment`](Self::augment) with a per-call random-phoneme seed, so
    /// one augmentor can serve many utterances.
    pub fn augment_seeded(
        &self,
        speech: &Waveform<T>,
        phonemes: Option<&PhonemeSequence>,
        seed: u64,
    ) -> Result<Waveform<T>> {
        if speech.sample_rate() != self.input_rate {
            return Err(Error::SampleRateMismatch {
                expected: self.input_rate,
                found: speech.sample_rate(),
            });
        }
        if speech.is_empty() {
            return Err(Error::EmptyInput);
        }
        let low = self.down.process(speech)?;
        let outer = self.wola.analyze(&low)?;
        let rtfs = self.rtf_sequence(outer.num_frames(), phonemes, seed)?;
        let inear = outer.with_data(&rtfs * outer.data())?;
        let simulated = self.wola.synthesize(&inear)?;
        Ok(self.up.process(&simulated)?.fit_to_len(speech.len()))
    }
}

/// One-shot augmentation at the speech's own sample rate.
pub fn augment<T: Scalar>(
    speech: &Waveform<T>,
    model: &RtfModel<T>,
    cfg: &AugmentConfig,
    phonemes: Option<&PhonemeSequence>,
) -> Result<Waveform<T>> {
    Augmentor::new(model, *cfg, speech.sample_rate())?.augment(speech, phonemes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phoneme::PhonemeInventory;
    use crate::rtf::{ModelMetadata, ModelScope};
    use crate::wola::FrameSpec;
    use ndarray::Array1;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    /// Three-phoneme model with phoneme 2 unestimated.
    fn bank() -> RtfModel<f64> {
        let bins = FrameSpec::model().num_bins();
        let mut rtfs = Array2::from_elem((bins, 3), c(0.0, 0.0));
        for k in 0..bins {
            rtfs[[k, 0]] = c(1.0 + k as f64, 0.5);
            rtfs[[k, 2]] = c(-2.0, k as f64 * 0.1);
        }
        let fallback = Array1::from_shape_fn(bins, |k| (rtfs[[k, 0]] + rtfs[[k, 2]]) / 2.0);
        RtfModel::from_parts(
            ModelMode::SpeechDependent,
            ModelScope::Individual,
            FrameSpec::model(),
            rtfs,
            fallback,
            vec![true, false, true],
            ModelMetadata {
                frame_counts: vec![5, 0, 5],
                min_frames: 1,
                inventory: Some(vec!["a".into(), "b".into(), "c".into()]),
                ..Default::default()
            },
        )
        .unwrap()
    }

    fn seq(model: &RtfModel<f64>, ids: &[Option<u16>]) -> PhonemeSequence {
        let inv = model.inventory().unwrap().clone();
        let ids = ids
            .iter()
            .map(|i| i.and_then(|v| inv.id_from_index(v)))
            .collect();
        PhonemeSequence::new(ids, FrameSpec::model(), inv).unwrap()
    }

    #[test]
    fn selection_constant_phoneme() {
        let m = bank();
        let h = select_rtf_sequence(&m, &seq(&m, &[Some(1); 6])).unwrap();
        for col in h.columns() {
            assert_eq!(col, m.rtfs().column(0));
        }
    }

    #[test]
    fn selection_unknown_uses_fallback() {
        let m = bank();
        let h = select_rtf_sequence(&m, &seq(&m, &[None; 4])).unwrap();
        for col in h.columns() {
            assert_eq!(col, m.fallback().view());
        }
    }

    #[test]
    fn selection_matches_lookup_table() {
        let m = bank();
        let ids = [Some(1), Some(3), Some(2), None, Some(3), Some(1)];
        let h = select_rtf_sequence(&m, &seq(&m, &ids)).unwrap();
        // Hand-built lookup: phoneme 2 is unavailable, so it maps to the fallback.
        let table = |id: Option<u16>, k: usize| match id {
            Some(1) => c(1.0 + k as f64, 0.5),
            Some(3) => c(-2.0, k as f64 * 0.1),
            _ => (c(1.0 + k as f64, 0.5) + c(-2.0, k as f64 * 0.1)) / 2.0,
        };
        for (l, &id) in ids.iter().enumerate() {
            for k in 0..h.nrows() {
                assert_eq!(h[[k, l]], table(id, k));
            }
        }
    }

    #[test]
    fn selection_rejects_speech_independent_model() {
        let m = RtfModel::constant(ModelMode::SpeechIndependent, 1, c(1.0, 0.0)).unwrap();
        let inv = Arc::new(PhonemeInventory::numbered(1).unwrap());
        let s = PhonemeSequence::new(vec![None; 3], FrameSpec::model(), inv).unwrap();
        assert!(matches!(
            select_rtf_sequence(&m, &s),
            Err(Error::IncompatibleModel(_))
        ));
    }

    #[test]
    fn smoothing_alpha_zero_is_identity() {
        let h = Array2::from_shape_fn((4, 7), |(k, l)| c(k as f64, l as f64 * l as f64));
        assert_eq!(smooth_rtf_sequence(&h, 0.0).unwrap(), h);
    }

    #[test]
    fn smoothing_fixed_point() {
        let h = Array2::from_elem((3, 20), c(0.3, -1.2));
        assert_eq!(smooth_rtf_sequence(&h, 0.8).unwrap(), h);
    }

    #[test]
    fn smoothing_step_closed_form() {
        let (ha, hb) = (c(1.0, 2.0), c(-0.5, 0.25));
        let l0 = 5;
        let h = Array2::from_shape_fn((2, 30), |(_, l)| if l < l0 { ha } else { hb });
        let s = smooth_rtf_sequence(&h, 0.5).unwrap();
        for n in 0..25 {
            let expect = hb + (ha - hb) * 0.5f64.powi(n as i32 + 1);
            assert!((s[[0, l0 + n]] - expect).norm() < 1e-12, "n = {n}");
        }
        for l in 0..l0 {
            assert_eq!(s[[1, l]], ha);
        }
    }

    #[test]
    fn smoothing_rejects_bad_alpha() {
        let h = Array2::from_elem((1, 2), c(1.0, 0.0));
        assert!(smooth_rtf_sequence(&h, 1.0).is_err());
        assert!(smooth_rtf_sequence(&h, -0.1).is_err());
    }

    #[test]
    fn technique_model_compatibility() {
        let si = RtfModel::constant(ModelMode::SpeechIndependent, 1, c(1.0, 0.0)).unwrap();
        let sd = bank();
        assert!(
            Augmentor::new(&si, AugmentConfig::new(Technique::SpeechDependent), 16000).is_err()
        );
        assert!(Augmentor::new(&si, AugmentConfig::new(Technique::RandomPhoneme), 16000).is_err());
        assert!(
            Augmentor::new(&sd, AugmentConfig::new(Technique::SpeechIndependent), 16000).is_err()
        );
        assert!(Augmentor::new(
            &sd,
            AugmentConfig::new(Technique::SpeechDependent).with_alpha(1.0),
            16000
        )
        .is_err());
    }

    #[test]
    fn alignment_length_is_checked() {
        let m = bank();
        let aug =
            Augmentor::new(&m, AugmentConfig::new(Technique::SpeechDependent), 16000).unwrap();
        let x = Waveform::new(vec![0.1f64; 3200], 16000).unwrap();
        assert_eq!(aug.model_signal_len(3200), 1000);
        let short = seq(&m, &[Some(1); 3]);
        assert!(matches!(
            aug.augment(&x, Some(&short)),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(aug.augment(&x, None).is_err());
        let ok = seq(&m, &vec![Some(1); aug.model_frame_count(3200)]);
        assert_eq!(aug.augment(&x, Some(&ok)).unwrap().len(), 3200);
    }

    #[test]
    fn random_phoneme_is_seeded() {
        let m = bank();
        let x = Waveform::from_f64(
            &(0..4000)
                .map(|n| (n as f64 * 0.37).sin() * 0.3)
                .collect::<Vec<_>>(),
            16000,
        )
        .unwrap();
        let cfg = AugmentConfig::new(Technique::RandomPhoneme).with_seed(11);
        let a = augment(&x, &m, &cfg, None).unwrap();
        let b = augment(&x, &m, &cfg, None).unwrap();
        let other = augment(&x, &m, &cfg.with_seed(12), None).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, other);
    }
}
