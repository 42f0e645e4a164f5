//! Two-microphone noise spatialization with measured device impulse responses.
//!
//! A point source convolves the noise with the outer and in-ear responses of
//! one direction. A pseudo-diffuse field convolves a circularly shifted copy of
//! the noise with every direction's responses and sums them with a `1/sqrt(D)`
//! gain. Convolution tails are cut to the input length.
//!
//! Afterwards white noise can be added to the in-ear channel at a level drawn
//! uniformly in `[low_db, -60]` dB relative to the in-ear noise RMS, which
//! lowers the inter-microphone coherence.

use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};
use crate::waveform::Waveform;

/// Upper end of the incoherent floor level range, dB re in-ear noise RMS.
pub const FLOOR_HIGH_DB: f64 = -60.0;
pub const DEFAULT_FLOOR_LOW_DB: f64 = -120.0;
pub const DEFAULT_DIFFUSE_PROBABILITY: f64 = 0.5;

/// Impulse responses from one source direction to both microphones.
#[derive(Debug, Clone, PartialEq)]
pub struct Hrir<T> {
    pub azimuth_deg: f64,
    pub outer: Vec<T>,
    pub inear: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HrirSet<T> {
    id: String,
    sample_rate: u32,
    directions: Vec<Hrir<T>>,
}

impl<T: Scalar> HrirSet<T> {
    pub fn new(id: impl Into<String>, sample_rate: u32, directions: Vec<Hrir<T>>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidRate(sample_rate));
        }
        if directions.is_empty() {
            return Err(Error::InvalidParameter("HRIR set has no directions".into()));
        }
        for d in &directions {
            if d.outer.is_empty() || d.inear.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "empty impulse response at {} deg",
                    d.azimuth_deg
                )));
            }
            if d.outer.iter().chain(&d.inear).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("impulse response"));
            }
        }
        Ok(Self {
            id: id.into(),
            sample_rate,
            directions,
        })
    }

    /// Unit impulses on both channels for every azimuth, for testing.
    pub fn identity(sample_rate: u32, azimuths: &[f64]) -> Result<Self> {
        let dirs = azimuths
            .iter()
            .map(|&a| Hrir {
                azimuth_deg: a,
                outer: vec![T::one()],
                inear: vec![T::one()],
            })
            .collect();
        Self::new("identity", sample_rate, dirs)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn directions(&self) -> &[Hrir<T>] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    fn direction(&self, index: usize) -> Result<&Hrir<T>> {
        self.directions.get(index).ok_or(Error::InvalidDirection {
            index,
            count: self.directions.len(),
        })
    }

    fn check_rate(&self, noise: &Waveform<T>) -> Result<()> {
        if noise.sample_rate() != self.sample_rate {
            return Err(Error::SampleRateMismatch {
                expected: self.sample_rate,
                found: noise.sample_rate(),
            });
        }
        Ok(())
    }
}

const DIRECT_CONV_MAX_TAPS: usize = 64;

/// Linear convolution `x * h` truncated to `x.len()` samples.
///
/// Short filters run in direct form; longer ones use FFT overlap-add.
pub fn convolve_truncated<T: Scalar>(x: &[T], h: &[T]) -> Vec<T> {
    if h.len() <= DIRECT_CONV_MAX_TAPS {
        convolve_direct(x, h)
    } else {
        FftConvolver::new(h).apply(x)
    }
}

fn convolve_direct<T: Scalar>(x: &[T], h: &[T]) -> Vec<T> {
    (0..x.len())
        .map(|n| {
            let taps = h.len().min(n + 1);
            (0..taps).fold(T::zero(), |acc, m| acc + h[m] * x[n - m])
        })
        .collect()
}

/// Overlap-add FFT convolution with a fixed filter.
struct FftConvolver<T: Scalar> {
    block: usize,
    size: usize,
    spectrum: Vec<Complex<T>>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    taps: usize,
}

impl<T: Scalar> FftConvolver<T> {
    fn new(h: &[T]) -> Self {
        let size = (4 * h.len()).next_power_of_two().max(1024);
        let block = size - h.len() + 1;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut spectrum = vec![Complex::new(T::zero(), T::zero()); size];
        for (s, &v) in spectrum.iter_mut().zip(h) {
            *s = Complex::new(v, T::zero());
        }
        forward.process(&mut spectrum);
        Self {
            block,
            size,
            spectrum,
            forward,
            inverse,
            taps: h.len(),
        }
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); x.len()];
        let scale = T::one() / T::from_usize(self.size).expect("fft size fits");
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.size];
        for start in (0..x.len()).step_by(self.block) {
            let chunk = &x[start..(start + self.block).min(x.len())];
            buf.iter_mut()
                .for_each(|b| *b = Complex::new(T::zero(), T::zero()));
            for (b, &v) in buf.iter_mut().zip(chunk) {
                *b = Complex::new(v, T::zero());
            }
            self.forward.process(&mut buf);
            for (b, &s) in buf.iter_mut().zip(&self.spectrum) {
                *b = *b * s;
            }
            self.inverse.process(&mut buf);
            let span = (chunk.len() + self.taps - 1).min(x.len() - start);
            for (o, b) in out[start..start + span].iter_mut().zip(&buf) {
                *o = *o + b.re * scale;
            }
        }
        out
    }
}

/// Noise from a single direction.
pub fn spatialize_point<T: Scalar>(
    noise: &Waveform<T>,
    hrirs: &HrirSet<T>,
    direction: usize,
) -> Result<(Waveform<T>, Waveform<T>)> {
    hrirs.check_rate(noise)?;
    let d = hrirs.direction(direction)?;
    let rate = noise.sample_rate();
    Ok((
        Waveform::new(convolve_truncated(noise.samples(), &d.outer), rate)?,
        Waveform::new(convolve_truncated(noise.samples(), &d.inear), rate)?,
    ))
}

/// One circular shift per direction, uniform in `[0, len)`.
pub fn diffuse_shifts(len: usize, directions: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..directions)
        .map(|_| {
            if len == 0 {
                0
            } else {
                rng.random_range(0..len)
            }
        })
        .collect()
}

/// `x` delayed circularly by `shift` samples.
fn circular_shift<T: Scalar>(x: &[T], shift: usize) -> Vec<T> {
    if x.is_empty() {
        return Vec::new();
    }
    let s = shift % x.len();
    let mut out = Vec::with_capacity(x.len());
    out.extend_from_slice(&x[x.len() - s..]);
    out.extend_from_slice(&x[..x.len() - s]);
    out
}

/// Pseudo-diffuse noise with explicit per-direction circular shifts.
pub fn spatialize_diffuse_with_shifts<T: Scalar>(
    noise: &Waveform<T>,
    hrirs: &HrirSet<T>,
    shifts: &[usize],
) -> Result<(Waveform<T>, Waveform<T>)> {
    hrirs.check_rate(noise)?;
    if shifts.len() != hrirs.len() {
        return Err(Error::LengthMismatch {
            expected: hrirs.len(),
            found: shifts.len(),
        });
    }
    let len = noise.len();
    let mut outer = vec![T::zero(); len];
    let mut inear = vec![T::zero(); len];
    for (d, &shift) in hrirs.directions().iter().zip(shifts) {
        let copy = circular_shift(noise.samples(), shift);
        for (acc, v) in outer.iter_mut().zip(convolve_truncated(&copy, &d.outer)) {
            *acc = *acc + v;
        }
        for (acc, v) in inear.iter_mut().zip(convolve_truncated(&copy, &d.inear)) {
            *acc = *acc + v;
        }
    }
    let gain = T::from_f64_lossy(1.0 / (hrirs.len() as f64).sqrt());
    outer.iter_mut().for_each(|v| *v = *v * gain);
    inear.iter_mut().for_each(|v| *v = *v * gain);
    let rate = noise.sample_rate();
    Ok((Waveform::new(outer, rate)?, Waveform::new(inear, rate)?))
}

/// Pseudo-diffuse noise with seeded shifts.
pub fn spatialize_diffuse<T: Scalar>(
    noise: &Waveform<T>,
    hrirs: &HrirSet<T>,
    seed: u64,
) -> Result<(Waveform<T>, Waveform<T>)> {
    let shifts = diffuse_shifts(noise.len(), hrirs.len(), seed);
    spatialize_diffuse_with_shifts(noise, hrirs, &shifts)
}

/// Level range of the incoherent in-ear white noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum NoiseFloor {
    Off,
    /// Uniform in `[low_db, FLOOR_HIGH_DB]`.
    Uniform {
        low_db: f64,
    },
}

impl Default for NoiseFloor {
    fn default() -> Self {
        NoiseFloor::Uniform {
            low_db: DEFAULT_FLOOR_LOW_DB,
        }
    }
}

impl NoiseFloor {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseFloor::Off => Ok(()),
            NoiseFloor::Uniform { low_db } if low_db.is_finite() && low_db <= FLOOR_HIGH_DB => {
                Ok(())
            }
            NoiseFloor::Uniform { low_db } => Err(Error::InvalidParameter(format!(
                "white-noise floor lower bound {low_db} dB must be finite and <= {FLOOR_HIGH_DB} dB"
            ))),
        }
    }

    /// Draws a level in dB, or `None` when off.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> Result<Option<f64>> {
        self.validate()?;
        Ok(match *self {
            NoiseFloor::Off => None,
            NoiseFloor::Uniform { low_db } if low_db == FLOOR_HIGH_DB => Some(FLOOR_HIGH_DB),
            NoiseFloor::Uniform { low_db } => Some(rng.random_range(low_db..=FLOOR_HIGH_DB)),
        })
    }
}

/// Adds Gaussian white noise to the in-ear channel. The realized noise is
/// scaled to RMS exactly `rms(inear) * 10^(level/20)`. Returns the drawn level.
pub fn add_incoherent_floor<T: Scalar>(
    inear: &Waveform<T>,
    floor: NoiseFloor,
    seed: u64,
) -> Result<(Waveform<T>, Option<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Some(level_db) = floor.draw(&mut rng)? else {
        return Ok((inear.clone(), None));
    };
    let target = inear.rms() * 10f64.powf(level_db / 20.0);
    let white: Vec<f64> = (0..inear.len())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let white_rms = scalar::rms(&white);
    let gain = if white_rms > 0.0 {
        target / white_rms
    } else {
        0.0
    };
    let samples = inear
        .samples()
        .iter()
        .zip(&white)
        .map(|(&s, &w)| s + T::from_f64_lossy(w * gain))
        .collect();
    Ok((Waveform::new(samples, inear.sample_rate())?, Some(level_db)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FieldMode {
    Point,
    Diffuse,
    /// Diffuse with probability `p_diffuse`, point otherwise.
    Random {
        p_diffuse: f64,
    },
}

impl Default for FieldMode {
    fn default() -> Self {
        FieldMode::Random {
            p_diffuse: DEFAULT_DIFFUSE_PROBABILITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpatializeConfig {
    pub mode: FieldMode,
    /// Fixed direction index for point sources; random when `None`.
    pub direction: Option<usize>,
    pub floor: NoiseFloor,
    pub seed: u64,
}

/// How a spatialized noise pair was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "field")]
pub enum NoiseField {
    Point { direction: usize, azimuth_deg: f64 },
    Diffuse { shifts: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatializedNoise<T> {
    pub outer: Waveform<T>,
    pub inear: Waveform<T>,
    pub field: NoiseField,
    pub floor_db: Option<f64>,
}

/// Draws the field type, direction or shifts, and floor level from `cfg.seed`,
/// in that order, then renders the noise pair.
pub fn spatialize<T: Scalar>(
    noise: &Waveform<T>,
    hrirs: &HrirSet<T>,
    cfg: &SpatializeConfig,
) -> Result<SpatializedNoise<T>> {
    cfg.floor.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let diffuse = match cfg.mode {
        FieldMode::Point => false,
        FieldMode::Diffuse => true,
        FieldMode::Random { p_diffuse } => {
            if !(0.0..=1.0).contains(&p_diffuse) {
                return Err(Error::InvalidParameter(format!(
                    "diffuse probability {p_diffuse} outside [0, 1]"
                )));
            }
            rng.random_bool(p_diffuse)
        }
    };
    let (outer, inear, field) = if diffuse {
        let shifts = diffuse_shifts(noise.len(), hrirs.len(), rng.random());
        let (o, i) = spatialize_diffuse_with_shifts(noise, hrirs, &shifts)?;
        (o, i, NoiseField::Diffuse { shifts })
    } else {
        let direction = match cfg.direction {
            Some(d) => d,
            None => rng.random_range(0..hrirs.len()),
        };
        let (o, i) = spatialize_point(noise, hrirs, direction)?;
        let azimuth_deg = hrirs.directions()[direction].azimuth_deg;
        (
            o,
            i,
            NoiseField::Point {
                direction,
                azimuth_deg,
            },
        )
    };
    let (inear, floor_db) = add_incoherent_floor(&inear, cfg.floor, rng.random())?;
    Ok(SpatializedNoise {
        outer,
        inear,
        field,
        floor_db,
    })
}
