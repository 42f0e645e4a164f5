//! Least-squares relative transfer function (RTF) estimation between the outer
//! and the in-ear microphone.
//!
//! An [`RtfAccumulator`] keeps, per frequency bin and slot, the cross-spectral
//! sum `sum Y_i Y_o*` and the outer power sum `sum |Y_o|^2`. Speech-independent
//! accumulators have a single slot; speech-dependent ones have one slot per
//! phoneme class, and each frame lands in the slot of its phoneme. Finalizing
//! divides the two sums.
//!
//! Talker-averaged models come from [`RtfAccumulator::merge`]: summing the
//! per-talker numerators and denominators before the division is exactly
//! estimation over the pooled frames of all talkers.

use std::collections::BTreeSet;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phoneme::{PhonemeId, PhonemeInventory, PhonemeSequence};
use crate::scalar::Scalar;
use crate::wola::{FrameSpec, Spectrogram};

/// Relative regularization: `eps = EPS_SCALE * mean(den)`.
pub const EPS_SCALE: f64 = 1e-10;
/// Bins with `den < LOW_CONFIDENCE_FACTOR * eps` are flagged low-confidence.
pub const LOW_CONFIDENCE_FACTOR: f64 = 1e3;
pub const DEFAULT_MIN_FRAMES: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelMode {
    SpeechIndependent,
    SpeechDependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelScope {
    Individual,
    TalkerAveraged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RtfAccumulator<T> {
    spec: FrameSpec,
    mode: ModelMode,
    inventory: Option<Arc<PhonemeInventory>>,
    num: Array2<Complex<T>>,
    den: Array2<T>,
    frame_counts: Vec<u64>,
    talkers: BTreeSet<String>,
    utterances: u64,
}

impl<T: Scalar> RtfAccumulator<T> {
    /// Single-slot accumulator on the model grid.
    pub fn speech_independent(spec: FrameSpec) -> Result<Self> {
        Self::with_slots(spec, ModelMode::SpeechIndependent, None, 1)
    }

    /// One slot per phoneme class of `inventory`.
    pub fn speech_dependent(spec: FrameSpec, inventory: Arc<PhonemeInventory>) -> Result<Self> {
        let slots = inventory.size();
        Self::with_slots(spec, ModelMode::SpeechDependent, Some(inventory), slots)
    }

    fn with_slots(
        spec: FrameSpec,
        mode: ModelMode,
        inventory: Option<Arc<PhonemeInventory>>,
        slots: usize,
    ) -> Result<Self> {
        check_model_grid(&spec)?;
        let bins = spec.num_bins();
        Ok(Self {
            spec,
            mode,
            inventory,
            num: Array2::zeros((bins, slots)),
            den: Array2::zeros((bins, slots)),
            frame_counts: vec![0; slots],
            talkers: BTreeSet::new(),
            utterances: 0,
        })
    }

    /// Attributes the accumulated frames to `talker`.
    pub fn for_talker(mut self, talker: impl Into<String>) -> Self {
        self.talkers.insert(talker.into());
        self
    }

    pub fn spec(&self) -> &FrameSpec {
        &self.spec
    }

    pub fn mode(&self) -> ModelMode {
        self.mode
    }

    pub fn num_slots(&self) -> usize {
        self.frame_counts.len()
    }

    pub fn numerator(&self) -> &Array2<Complex<T>> {
        &self.num
    }

    pub fn denominator(&self) -> &Array2<T> {
        &self.den
    }

    pub fn frame_counts(&self) -> &[u64] {
        &self.frame_counts
    }

    pub fn talkers(&self) -> &BTreeSet<String> {
        &self.talkers
    }

    pub fn utterances(&self) -> u64 {
        self.utterances
    }

    pub fn inventory(&self) -> Option<&Arc<PhonemeInventory>> {
        self.inventory.as_ref()
    }

    /// Adds one recorded utterance pair. Frames labeled unknown are skipped.
    pub fn accumulate(
        &mut self,
        outer: &Spectrogram<T>,
        inear: &Spectrogram<T>,
        phonemes: Option<&PhonemeSequence>,
    ) -> Result<()> {
        if *outer.spec() != self.spec || *inear.spec() != self.spec {
            return Err(Error::ShapeMismatch(
                "spectrogram frame spec differs from accumulator".into(),
            ));
        }
        if outer.shape() != inear.shape() {
            return Err(Error::ShapeMismatch(format!(
                "outer {:?} vs in-ear {:?}",
                outer.shape(),
                inear.shape()
            )));
        }
        let frames = outer.num_frames();
        let slot_of: Vec<Option<usize>> = match (self.mode, phonemes) {
            (ModelMode::SpeechIndependent, None) => vec![Some(0); frames],
            (ModelMode::SpeechIndependent, Some(_)) => {
                return Err(Error::IncompatibleModel(
                    "speech-independent accumulation takes no phoneme sequence".into(),
                ))
            }
            (ModelMode::SpeechDependent, None) => {
                return Err(Error::IncompatibleModel(
                    "speech-dependent accumulation needs a phoneme sequence".into(),
                ))
            }
            (ModelMode::SpeechDependent, Some(seq)) => {
                seq.expect_frames(frames)?;
                if seq.inventory().size() != self.num_slots() {
                    return Err(Error::IncompatibleModel(format!(
                        "phoneme inventory has {} classes, accumulator {}",
                        seq.inventory().size(),
                        self.num_slots()
                    )));
                }
                seq.ids().iter().map(|id| id.map(PhonemeId::slot)).collect()
            }
        };

        for (l, slot) in slot_of.into_iter().enumerate() {
            let Some(slot) = slot else { continue };
            let yo = outer.data().column(l);
            let yi = inear.data().column(l);
            let mut num = self.num.column_mut(slot);
            let mut den = self.den.column_mut(slot);
            for k in 0..yo.len() {
                num[k] = num[k] + yi[k] * yo[k].conj();
                den[k] = den[k] + yo[k].norm_sqr();
            }
            self.frame_counts[slot] += 1;
        }
        self.utterances += 1;
        Ok(())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::IncompatibleAccumulators("frame specs differ".into()));
        }
        if self.mode != other.mode {
            return Err(Error::IncompatibleAccumulators("modes differ".into()));
        }
        if self.num_slots() != other.num_slots() {
            return Err(Error::IncompatibleAccumulators(format!(
                "{} vs {} slots",
                self.num_slots(),
                other.num_slots()
            )));
        }
        if let (Some(a), Some(b)) = (&self.inventory, &other.inventory) {
            if a.labels() != b.labels() {
                return Err(Error::IncompatibleAccumulators(
                    "phoneme inventories differ".into(),
                ));
            }
        }
        Ok(())
    }

    /// Elementwise sum of several accumulators, folded left to right.
    pub fn merge<'a>(accs: impl IntoIterator<Item = &'a Self>) -> Result<Self>
    where
        T: 'a,
    {
        let mut iter = accs.into_iter();
        let mut out = iter
            .next()
            .ok_or_else(|| Error::IncompatibleAccumulators("nothing to merge".into()))?
            .clone();
        for acc in iter {
            out.merge_from(acc)?;
        }
        Ok(out)
    }

    pub fn merge_from(&mut self, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        self.num.zip_mut_with(&other.num, |a, &b| *a = *a + b);
        self.den.zip_mut_with(&other.den, |a, &b| *a = *a + b);
        for (a, b) in self.frame_counts.iter_mut().zip(&other.frame_counts) {
            *a += b;
        }
        self.talkers.extend(other.talkers.iter().cloned());
        self.utterances += other.utterances;
        Ok(())
    }

    fn available_slots(&self, min_frames: u64) -> Vec<bool> {
        self.frame_counts
            .iter()
            .map(|&c| c >= min_frames.max(1))
            .collect()
    }

    /// `EPS_SCALE` times the mean power sum over available slots, floored at
    /// the smallest positive normal value so the division is always defined.
    pub fn default_eps(&self, min_frames: u64) -> T {
        let avail = self.available_slots(min_frames);
        let mut sum = 0.0;
        let mut n = 0usize;
        for (slot, &ok) in avail.iter().enumerate() {
            if ok {
                sum += self
                    .den
                    .column(slot)
                    .iter()
                    .map(|v| v.to_f64_lossy())
                    .sum::<f64>();
                n += self.den.nrows();
            }
        }
        let mean = if n == 0 { 0.0 } else { sum / n as f64 };
        T::from_f64_lossy(EPS_SCALE * mean).max(T::min_positive_value())
    }

    /// Finalizes with the default minimum frame count and regularization.
    pub fn finalize_default(&self) -> Result<RtfModel<T>> {
        self.finalize(DEFAULT_MIN_FRAMES, self.default_eps(DEFAULT_MIN_FRAMES))
    }

    /// `rtf[k, p] = num[k, p] / (den[k, p] + eps)` for every slot with at least
    /// `min_frames` frames; the fallback is the mean of the available slots.
    pub fn finalize(&self, min_frames: u64, eps: T) -> Result<RtfModel<T>> {
        if !eps.is_finite() || eps < T::zero() {
            return Err(Error::InvalidParameter(format!(
                "eps {eps} must be finite and >= 0"
            )));
        }
        let available = self.available_slots(min_frames);
        let n_avail = available.iter().filter(|&&a| a).count();
        if n_avail == 0 {
            return Err(Error::NoSlotAvailable);
        }
        let bins = self.spec.num_bins();
        let zero = Complex::new(T::zero(), T::zero());
        let mut rtfs = Array2::from_elem((bins, self.num_slots()), zero);
        let mut low_confidence = Vec::new();
        let threshold = T::from_f64_lossy(LOW_CONFIDENCE_FACTOR) * eps;
        for (slot, _) in available.iter().enumerate().filter(|(_, &a)| a) {
            let num = self.num.column(slot);
            let den = self.den.column(slot);
            let mut out = rtfs.column_mut(slot);
            let mut weak = Vec::new();
            for k in 0..bins {
                out[k] = num[k] / (den[k] + eps);
                if den[k] < threshold {
                    weak.push(k as u32);
                }
            }
            if !weak.is_empty() {
                low_confidence.push(LowConfidence {
                    slot: slot as u32,
                    bins: weak,
                });
            }
        }
        let fallback = mean_of_available(&rtfs, &available);
        let scope = if self.talkers.len() > 1 {
            ModelScope::TalkerAveraged
        } else {
            ModelScope::Individual
        };
        let meta = ModelMetadata {
            talkers: self.talkers.iter().cloned().collect(),
            utterances: self.utterances,
            frame_counts: self.frame_counts.clone(),
            min_frames,
            eps: eps.to_f64_lossy(),
            low_confidence,
            inventory: self.inventory.as_ref().map(|i| i.labels().to_vec()),
        };
        RtfModel::from_parts(self.mode, scope, self.spec, rtfs, fallback, available, meta)
    }
}

fn mean_of_available<T: Scalar>(
    rtfs: &Array2<Complex<T>>,
    available: &[bool],
) -> Array1<Complex<T>> {
    let n = T::from_usize(available.iter().filter(|&&a| a).count()).expect("count fits");
    let mut acc = Array1::from_elem(rtfs.nrows(), Complex::new(T::zero(), T::zero()));
    for (slot, _) in available.iter().enumerate().filter(|(_, &a)| a) {
        acc.zip_mut_with(&rtfs.column(slot), |a, &b| *a = *a + b);
    }
    acc.mapv(|v| v / n)
}

fn check_model_grid(spec: &FrameSpec) -> Result<()> {
    if *spec != FrameSpec::model() {
        return Err(Error::InvalidFrameSpec(format!(
            "transfer models live on the {} Hz / {}-sample grid, got {} Hz / {}",
            FrameSpec::model().sample_rate(),
            FrameSpec::model().frame_len(),
            spec.sample_rate(),
            spec.frame_len()
        )));
    }
    Ok(())
}

/// Bins of one slot whose power sum was below the confidence threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowConfidence {
    pub slot: u32,
    pub bins: Vec<u32>,
}

/// Provenance and bookkeeping carried with a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ModelMetadata {
    pub talkers: Vec<String>,
    pub utterances: u64,
    pub frame_counts: Vec<u64>,
    pub min_frames: u64,
    pub eps: f64,
    #[serde(default)]
    pub low_confidence: Vec<LowConfidence>,
    /// Phoneme labels in id order, speech-dependent models only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inventory: Option<Vec<String>>,
}

/// A finalized own-voice transfer characteristic model.
#[derive(Debug, Clone, PartialEq)]
pub struct RtfModel<T> {
    mode: ModelMode,
    scope: ModelScope,
    spec: FrameSpec,
    rtfs: Array2<Complex<T>>,
    fallback: Array1<Complex<T>>,
    available: Vec<bool>,
    inventory: Option<Arc<PhonemeInventory>>,
    meta: ModelMetadata,
}

impl<T: Scalar> RtfModel<T> {
    pub fn from_parts(
        mode: ModelMode,
        scope: ModelScope,
        spec: FrameSpec,
        rtfs: Array2<Complex<T>>,
        fallback: Array1<Complex<T>>,
        available: Vec<bool>,
        meta: ModelMetadata,
    ) -> Result<Self> {
        check_model_grid(&spec)?;
        let bins = spec.num_bins();
        let slots = available.len();
        if rtfs.dim() != (bins, slots) {
            return Err(Error::ShapeMismatch(format!(
                "rtf table {:?}, expected ({bins}, {slots})",
                rtfs.dim()
            )));
        }
        if fallback.len() != bins {
            return Err(Error::ShapeMismatch(format!(
                "fallback has {} bins, expected {bins}",
                fallback.len()
            )));
        }
        if slots == 0 || (mode == ModelMode::SpeechIndependent && slots != 1) {
            return Err(Error::ShapeMismatch(format!(
                "{slots} slots for {mode:?} model"
            )));
        }
        if !available.iter().any(|&a| a) {
            return Err(Error::NoSlotAvailable);
        }
        let finite = |c: &Complex<T>| c.re.is_finite() && c.im.is_finite();
        for (slot, _) in available.iter().enumerate().filter(|(_, &a)| a) {
            if !rtfs.column(slot).iter().all(finite) {
                return Err(Error::NonFinite("rtf table"));
            }
        }
        if !fallback.iter().all(finite) {
            return Err(Error::NonFinite("fallback rtf"));
        }
        let inventory = match (&meta.inventory, mode) {
            (Some(labels), ModelMode::SpeechDependent) => {
                let inv = PhonemeInventory::new(labels.iter().cloned())?;
                if inv.size() != slots {
                    return Err(Error::ShapeMismatch(format!(
                        "inventory of {} labels for {slots} slots",
                        inv.size()
                    )));
                }
                Some(Arc::new(inv))
            }
            _ => None,
        };
        Ok(Self {
            mode,
            scope,
            spec,
            rtfs,
            fallback,
            available,
            inventory,
            meta,
        })
    }

    /// Model whose every slot and fallback is `value` at all bins.
    pub fn constant(mode: ModelMode, slots: usize, value: Complex<T>) -> Result<Self> {
        let spec = FrameSpec::model();
        let bins = spec.num_bins();
        let inventory = match mode {
            ModelMode::SpeechIndependent => None,
            ModelMode::SpeechDependent => {
                Some(PhonemeInventory::numbered(slots)?.labels().to_vec())
            }
        };
        let meta = ModelMetadata {
            frame_counts: vec![1; slots],
            min_frames: 1,
            inventory,
            ..Default::default()
        };
        Self::from_parts(
            mode,
            ModelScope::Individual,
            spec,
            Array2::from_elem((bins, slots), value),
            Array1::from_elem(bins, value),
            vec![true; slots],
            meta,
        )
    }

    pub fn mode(&self) -> ModelMode {
        self.mode
    }

    pub fn scope(&self) -> ModelScope {
        self.scope
    }

    pub fn spec(&self) -> &FrameSpec {
        &self.spec
    }

    pub fn num_bins(&self) -> usize {
        self.rtfs.nrows()
    }

    pub fn num_slots(&self) -> usize {
        self.rtfs.ncols()
    }

    pub fn rtfs(&self) -> &Array2<Complex<T>> {
        &self.rtfs
    }

    pub fn fallback(&self) -> &Array1<Complex<T>> {
        &self.fallback
    }

    pub fn availability(&self) -> &[bool] {
        &self.available
    }

    pub fn is_available(&self, slot: usize) -> bool {
        self.available.get(slot).copied().unwrap_or(false)
    }

    pub fn inventory(&self) -> Option<&Arc<PhonemeInventory>> {
        self.inventory.as_ref()
    }

    pub fn metadata(&self) -> &ModelMetadata {
        &self.meta
    }

    /// RTF for a frame: the phoneme's slot if estimated, the fallback otherwise.
    /// Speech-independent models ignore the phoneme.
    pub fn rtf_for(&self, phoneme: Option<PhonemeId>) -> ArrayView1<'_, Complex<T>> {
        match self.mode {
            ModelMode::SpeechIndependent => self.rtfs.column(0),
            ModelMode::SpeechDependent => match phoneme {
                Some(id) if self.is_available(id.slot()) => self.rtfs.column(id.slot()),
                _ => self.fallback.view(),
            },
        }
    }

    /// Speech-independent model holding one phoneme slot of this model.
    pub fn slot_model(&self, slot: usize) -> Result<Self> {
        if !self.is_available(slot) {
            return Err(Error::IncompatibleModel(format!(
                "slot {slot} has no estimate"
            )));
        }
        let col = self.rtfs.column(slot).to_owned();
        let meta = ModelMetadata {
            frame_counts: vec![self.meta.frame_counts.get(slot).copied().unwrap_or(0)],
            inventory: None,
            low_confidence: Vec::new(),
            ..self.meta.clone()
        };
        Self::from_parts(
            ModelMode::SpeechIndependent,
            self.scope,
            self.spec,
            col.clone().insert_axis(ndarray::Axis(1)),
            col,
            vec![true],
            meta,
        )
    }
}
