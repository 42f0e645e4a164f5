//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc filter.
//!
//! A conversion `from -> to` is carried out as upsample by `L`, low-pass,
//! downsample by `M` with `L / M = to / from` in lowest terms. The prototype
//! filter runs at `from * L` Hz, passes up to `0.45 * min(from, to)` and stops
//! from `0.5 * min(from, to)` with at least [`STOPBAND_ATTENUATION_DB`] of
//! attenuation. It is linear-phase with odd length, and its group delay is
//! removed so output sample `j` lines up with input time `j / to`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::waveform::Waveform;

pub const PASSBAND_EDGE: f64 = 0.45;
pub const STOPBAND_EDGE: f64 = 0.5;
pub const STOPBAND_ATTENUATION_DB: f64 = 80.0;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (half / k as f64).powi(2);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn kaiser_beta(atten_db: f64) -> f64 {
    if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    }
}

/// Low-pass prototype at normalized cutoff `cutoff` (cycles per sample) with
/// transition width `width`. Returns an odd number of taps with unit DC gain.
pub(crate) fn design_lowpass(cutoff: f64, width: f64, atten_db: f64) -> Vec<f64> {
    let est = ((atten_db - 7.95) / (14.36 * width)).ceil() as usize + 1;
    let len = est | 1;
    let mid = (len - 1) as f64 / 2.0;
    let beta = kaiser_beta(atten_db);
    let norm = bessel_i0(beta);
    let mut taps: Vec<f64> = (0..len)
        .map(|n| {
            let t = n as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * std::f64::consts::PI * cutoff * t).sin() / (std::f64::consts::PI * t)
            };
            let r = t / mid;
            let win = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / norm;
            sinc * win
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Precomputed polyphase tables for one rate pair.
#[derive(Debug, Clone)]
pub struct Resampler<T> {
    from: u32,
    to: u32,
    up: usize,
    down: usize,
    delay: usize,
    taps_len: usize,
    /// `phases[r][i]` is `h[r + i * up]`, each row scaled to unit sum.
    phases: Vec<Vec<T>>,
}

impl<T: Scalar> Resampler<T> {
    pub fn new(from: u32, to: u32) -> Result<Self> {
        if from == 0 {
            return Err(Error::InvalidRate(from));
        }
        if to == 0 {
            return Err(Error::InvalidRate(to));
        }
        let g = gcd(from as u64, to as u64);
        let up = (to as u64 / g) as usize;
        let down = (from as u64 / g) as usize;
        if up == 1 && down == 1 {
            return Ok(Self {
                from,
                to,
                up,
                down,
                delay: 0,
                taps_len: 1,
                phases: vec![vec![T::one()]],
            });
        }

        let inter_rate = from as f64 * up as f64;
        let narrow = from.min(to) as f64;
        let cutoff = 0.5 * (PASSBAND_EDGE + STOPBAND_EDGE) * narrow / inter_rate;
        let width = (STOPBAND_EDGE - PASSBAND_EDGE) * narrow / inter_rate;
        let h = design_lowpass(cutoff, width, STOPBAND_ATTENUATION_DB);
        let taps_len = h.len();
        let delay = (taps_len - 1) / 2;

        let phases = (0..up)
            .map(|r| {
                let row: Vec<f64> = h.iter().skip(r).step_by(up).copied().collect();
                // Each polyphase branch sees one in `up` taps; its gain must be 1.
                let sum: f64 = row.iter().sum();
                row.iter().map(|&v| T::from_f64_lossy(v / sum)).collect()
            })
            .collect();

        Ok(Self {
            from,
            to,
            up,
            down,
            delay,
            taps_len,
            phases,
        })
    }

    pub fn from_rate(&self) -> u32 {
        self.from
    }

    pub fn to_rate(&self) -> u32 {
        self.to
    }

    /// Upsampling and downsampling factors `(L, M)`.
    pub fn ratio(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    pub fn filter_len(&self) -> usize {
        self.taps_len
    }

    /// Output length for `input_len` samples: `ceil(input_len * L / M)`.
    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len * self.up).div_ceil(self.down)
    }

    pub fn process(&self, x: &Waveform<T>) -> Result<Waveform<T>> {
        if x.sample_rate() != self.from {
            return Err(Error::SampleRateMismatch {
                expected: self.from,
                found: x.sample_rate(),
            });
        }
        if self.up == 1 && self.down == 1 {
            return Ok(x.clone());
        }
        let input = x.samples();
        if input.is_empty() {
            return Waveform::new(Vec::new(), self.to);
        }
        let out_len = self.output_len(input.len());
        let mut out = Vec::with_capacity(out_len);
        for j in 0..out_len {
            let t = j * self.down + self.delay;
            let phase = &self.phases[t % self.up];
            let q = t / self.up;
            // taps phase[i] pair with input[q - i]
            let i_start = q.saturating_sub(input.len() - 1);
            let i_end = phase.len().min(q + 1);
            let mut acc = T::zero();
            for i in i_start..i_end {
                acc = acc + phase[i] * input[q - i];
            }
            out.push(acc);
        }
        Waveform::new(out, self.to)
    }
}

/// One-shot conversion of `x` to `target_rate`.
pub fn resample<T: Scalar>(x: &Waveform<T>, target_rate: u32) -> Result<Waveform<T>> {
    if target_rate == 0 {
        return Err(Error::InvalidRate(target_rate));
    }
    if target_rate == x.sample_rate() {
        return Ok(x.clone());
    }
    Resampler::new(x.sample_rate(), target_rate)?.process(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    fn sine(freq: f64, rate: u32, len: usize, amp: f64) -> Waveform<f64> {
        let s = (0..len)
            .map(|n| amp * (2.0 * std::f64::consts::PI * freq * n as f64 / rate as f64).sin())
            .collect();
        Waveform::new(s, rate).unwrap()
    }

    fn interior<T: Copy>(x: &[T], margin: usize) -> &[T] {
        &x[margin..x.len() - margin]
    }

    fn amplitude(x: &[f64]) -> f64 {
        (2.0 * x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn identity_rate_returns_input() {
        let x = sine(440.0, 16000, 1000, 0.3);
        assert_eq!(resample(&x, 16000).unwrap(), x);
    }

    #[test]
    fn rejects_zero_rate() {
        let x = sine(440.0, 16000, 100, 0.3);
        assert!(matches!(resample(&x, 0), Err(Error::InvalidRate(0))));
        assert!(Resampler::<f64>::new(0, 5).is_err());
    }

    #[test]
    fn ratio_and_length() {
        let r = Resampler::<f64>::new(16000, 5000).unwrap();
        assert_eq!(r.ratio(), (5, 16));
        assert_eq!(r.output_len(16000), 5000);
        assert_eq!(r.output_len(16001), 5001);
        let y = r.process(&sine(100.0, 16000, 4800, 0.1)).unwrap();
        assert_eq!(y.len(), 1500);
        assert_eq!(y.sample_rate(), 5000);
    }

    #[test]
    fn dc_is_preserved() {
        let x = Waveform::new(vec![0.5f64; 16000], 16000).unwrap();
        let y = resample(&x, 5000).unwrap();
        let margin = 400;
        for &v in interior(y.samples(), margin) {
            assert!((v - 0.5).abs() < 1e-4, "{v}");
        }
    }

    #[test]
    fn sine_round_trip_keeps_amplitude_and_shape() {
        let x = sine(1000.0, 16000, 32000, 0.5);
        let down = resample(&x, 5000).unwrap();
        let back = resample(&down, 16000).unwrap();
        assert_eq!(back.len(), x.len());
        let a = interior(x.samples(), 2000);
        let b = interior(back.samples(), 2000);
        let db = 20.0 * (amplitude(b) / amplitude(a)).log10();
        assert!(db.abs() < 0.1, "{db} dB");
        assert!(correlation(a, b) > 0.999);
    }

    #[test]
    fn passband_gain_below_edge() {
        // Up to 0.45 of the lower rate the round trip loses less than 0.1 dB.
        for &f in &[50.0, 500.0, 1500.0, 2000.0, 2200.0] {
            let x = sine(f, 16000, 48000, 0.5);
            let y = resample(&resample(&x, 5000).unwrap(), 16000).unwrap();
            let a = amplitude(interior(x.samples(), 4000));
            let b = amplitude(interior(y.samples(), 4000));
            let db = 20.0 * (b / a).log10();
            assert!(db.abs() < 0.1, "{f} Hz: {db} dB");
        }
    }

    #[test]
    fn stopband_rejection_above_target_nyquist() {
        for &f in &[2600.0, 3000.0, 5000.0, 7000.0] {
            let x = sine(f, 16000, 48000, 0.5);
            let y = resample(&x, 5000).unwrap();
            let a = amplitude(interior(x.samples(), 4000));
            let b = amplitude(interior(y.samples(), 1200));
            let db = 20.0 * (b / a).log10();
            assert!(db < -60.0, "{f} Hz: {db} dB");
        }
    }

    #[test]
    fn prototype_stopband() {
        let narrow = 5000.0;
        let inter = 80000.0;
        let h = design_lowpass(0.475 * narrow / inter, 0.05 * narrow / inter, 80.0);
        let worst = (0..400)
            .map(|i| 2500.0 + i as f64 * (40000.0 - 2500.0) / 400.0)
            .map(|f| {
                let w = 2.0 * std::f64::consts::PI * f / inter;
                let r: Complex<f64> = h
                    .iter()
                    .enumerate()
                    .map(|(n, &c)| Complex::from_polar(c, -w * n as f64))
                    .sum();
                20.0 * r.norm().log10()
            })
            .fold(f64::MIN, f64::max);
        assert!(worst < -60.0, "{worst}");
    }

    #[test]
    fn time_alignment_and_shift() {
        // Shifting the input by 16 samples at 16 kHz shifts the 5 kHz output by 5.
        let mut a = vec![0.0f64; 8000];
        let mut b = vec![0.0f64; 8000];
        let pulse = |n: usize| (-(n as f64 - 40.0).powi(2) / 50.0).exp();
        for n in 0..200 {
            a[3000 + n] = pulse(n);
            b[3016 + n] = pulse(n);
        }
        let ya = resample(&Waveform::new(a, 16000).unwrap(), 5000).unwrap();
        let yb = resample(&Waveform::new(b, 16000).unwrap(), 5000).unwrap();
        for j in 500..2400 {
            assert!((ya.samples()[j] - yb.samples()[j + 5]).abs() < 1e-9);
        }
        // Peak stays at the same time: input peak 3040/16000 s = sample 950 at 5 kHz.
        let peak = ya
            .samples()
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, 950);
    }

    #[test]
    fn linear() {
        let x = sine(700.0, 16000, 4000, 0.2);
        let z = sine(1300.0, 16000, 4000, 0.7);
        let sum = Waveform::new(
            x.samples()
                .iter()
                .zip(z.samples())
                .map(|(a, b)| 2.0 * a - b)
                .collect(),
            16000,
        )
        .unwrap();
        let ys = resample(&sum, 5000).unwrap();
        let yx = resample(&x, 5000).unwrap();
        let yz = resample(&z, 5000).unwrap();
        for i in 0..ys.len() {
            let expect = 2.0 * yx.samples()[i] - yz.samples()[i];
            assert!((ys.samples()[i] - expect).abs() < 1e-12);
        }
    }
}
