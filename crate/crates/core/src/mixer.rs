//! SNR-controlled mixing of two-channel own voice and noise, followed by
//! per-channel mean-variance normalization.
//!
//! The noise gain is chosen from the outer-microphone powers and applied to
//! both noise channels, so the in-ear SNR moves by exactly the same number of
//! dB as the outer SNR. SNRs are full-utterance power ratios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};
use crate::waveform::Waveform;

/// Training SNR range at the outer microphone, dB.
pub const TRAIN_SNR_RANGE_DB: (f64, f64) = (-10.0, 25.0);
/// SNRs used for test sets, dB.
pub const TEST_SNRS_DB: [f64; 5] = [-10.0, -5.0, 0.0, 5.0, 10.0];

#[derive(Debug, Clone, PartialEq)]
pub struct MixResult<T> {
    pub noisy_outer: Waveform<T>,
    pub noisy_inear: Waveform<T>,
    /// Clean outer own voice, scaled like the own-voice part of `noisy_outer`.
    pub target_outer: Waveform<T>,
    pub own_outer: Waveform<T>,
    pub own_inear: Waveform<T>,
    /// Noise components after gain (and normalization gain, if applied).
    pub noise_outer: Waveform<T>,
    pub noise_inear: Waveform<T>,
    pub requested_snr_db: f64,
    pub achieved_snr_db: f64,
    pub noise_gain: f64,
    /// Per-channel `[outer, inear]` statistics removed by normalization.
    pub means: [f64; 2],
    pub stds: [f64; 2],
    pub target_gain: f64,
    pub normalized: bool,
}

fn snr_db(signal_power: f64, noise_power: f64) -> f64 {
    10.0 * (signal_power / noise_power).log10()
}

fn check_pair<T: Scalar>(a: &Waveform<T>, b: &Waveform<T>) -> Result<()> {
    if a.sample_rate() != b.sample_rate() {
        return Err(Error::SampleRateMismatch {
            expected: a.sample_rate(),
            found: b.sample_rate(),
        });
    }
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

fn add<T: Scalar>(a: &Waveform<T>, b: &Waveform<T>) -> Result<Waveform<T>> {
    Waveform::new(
        a.samples()
            .iter()
            .zip(b.samples())
            .map(|(&x, &y)| x + y)
            .collect(),
        a.sample_rate(),
    )
}

/// Mixes own voice and noise so that the outer-microphone SNR is `snr_db`.
pub fn mix_at_snr<T: Scalar>(
    own: (&Waveform<T>, &Waveform<T>),
    noise: (&Waveform<T>, &Waveform<T>),
    snr_db_target: f64,
) -> Result<MixResult<T>> {
    let (own_outer, own_inear) = own;
    let (noise_outer, noise_inear) = noise;
    check_pair(own_outer, own_inear)?;
    check_pair(own_outer, noise_outer)?;
    check_pair(own_outer, noise_inear)?;
    if !snr_db_target.is_finite() {
        return Err(Error::InvalidParameter(format!("SNR {snr_db_target} dB")));
    }
    let p_own = own_outer.mean_power();
    let p_noise = noise_outer.mean_power();
    if p_own <= 0.0 {
        return Err(Error::SilentSignal("outer own voice"));
    }
    if p_noise <= 0.0 {
        return Err(Error::SilentSignal("outer noise"));
    }
    let gain = (p_own / (p_noise * 10f64.powf(snr_db_target / 10.0))).sqrt();
    let g = T::from_f64_lossy(gain);
    let noise_outer = noise_outer.scaled(g);
    let noise_inear = noise_inear.scaled(g);
    let achieved = snr_db(p_own, noise_outer.mean_power());
    Ok(MixResult {
        noisy_outer: add(own_outer, &noise_outer)?,
        noisy_inear: add(own_inear, &noise_inear)?,
        target_outer: own_outer.clone(),
        own_outer: own_outer.clone(),
        own_inear: own_inear.clone(),
        noise_outer,
        noise_inear,
        requested_snr_db: snr_db_target,
        achieved_snr_db: achieved,
        noise_gain: gain,
        means: [0.0, 0.0],
        stds: [1.0, 1.0],
        target_gain: 1.0,
        normalized: false,
    })
}

fn mean_std<T: Scalar>(x: &[T]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().map(|v| v.to_f64_lossy()).sum::<f64>() / n;
    let var = x
        .iter()
        .map(|v| (v.to_f64_lossy() - mean).powi(2))
        .sum::<f64>()
        / n;
    (mean, var.sqrt())
}

fn affine<T: Scalar>(x: &Waveform<T>, shift: f64, gain: f64) -> Result<Waveform<T>> {
    Waveform::new(
        x.samples()
            .iter()
            .map(|v| T::from_f64_lossy((v.to_f64_lossy() - shift) * gain))
            .collect(),
        x.sample_rate(),
    )
}

/// Mean-variance normalization of each noisy channel with its own statistics.
///
/// The clean target and the stored components are scaled by the same
/// `1 / std` as their noisy channel; only the noisy channels are mean-shifted.
pub fn normalize<T: Scalar>(mix: MixResult<T>) -> Result<MixResult<T>> {
    if mix.noisy_outer.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (mo, so) = mean_std(mix.noisy_outer.samples());
    let (mi, si) = mean_std(mix.noisy_inear.samples());
    if so.is_nan() || so <= 0.0 {
        return Err(Error::ZeroVariance("noisy outer channel"));
    }
    if si.is_nan() || si <= 0.0 {
        return Err(Error::ZeroVariance("noisy in-ear channel"));
    }
    let (go, gi) = (1.0 / so, 1.0 / si);
    Ok(MixResult {
        noisy_outer: affine(&mix.noisy_outer, mo, go)?,
        noisy_inear: affine(&mix.noisy_inear, mi, gi)?,
        target_outer: affine(&mix.target_outer, 0.0, go)?,
        own_outer: affine(&mix.own_outer, 0.0, go)?,
        own_inear: affine(&mix.own_inear, 0.0, gi)?,
        noise_outer: affine(&mix.noise_outer, 0.0, go)?,
        noise_inear: affine(&mix.noise_inear, 0.0, gi)?,
        means: [mo, mi],
        stds: [so, si],
        target_gain: mix.target_gain * go,
        normalized: true,
        ..mix
    })
}

/// Uniform draw from `[low, high]` dB.
pub fn draw_snr(low: f64, high: f64, seed: u64) -> Result<f64> {
    SnrDistribution::Uniform { low, high }.draw(&mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SnrDistribution {
    Uniform {
        low: f64,
        high: f64,
    },
    /// Uniform choice among fixed values.
    Discrete {
        values: Vec<f64>,
    },
}

impl Default for SnrDistribution {
    fn default() -> Self {
        Self::training()
    }
}

impl SnrDistribution {
    pub fn training() -> Self {
        SnrDistribution::Uniform {
            low: TRAIN_SNR_RANGE_DB.0,
            high: TRAIN_SNR_RANGE_DB.1,
        }
    }

    pub fn test() -> Self {
        SnrDistribution::Discrete {
            values: TEST_SNRS_DB.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SnrDistribution::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low <= high) {
                    return Err(Error::InvalidParameter(format!(
                        "SNR range [{low}, {high}] dB"
                    )));
                }
            }
            SnrDistribution::Discrete { values } => {
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "empty or non-finite SNR set".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Result<f64> {
        self.validate()?;
        Ok(match self {
            SnrDistribution::Uniform { low, high } if low == high => *low,
            SnrDistribution::Uniform { low, high } => rng.random_range(*low..=*high),
            SnrDistribution::Discrete { values } => values[rng.random_range(0..values.len())],
        })
    }
}

/// Outer-microphone SNR of a (possibly normalized) mix, from its components.
pub fn component_snr_db<T: Scalar>(mix: &MixResult<T>) -> (f64, f64) {
    (
        snr_db(
            scalar::mean_power(mix.own_outer.samples()),
            scalar::mean_power(mix.noise_outer.samples()),
        ),
        snr_db(
            scalar::mean_power(mix.own_inear.samples()),
            scalar::mean_power(mix.noise_inear.samples()),
        ),
    )
}
