#![allow(dead_code)]

use num_complex::Complex;
use ovaug::{FrameSpec, Waveform, WolaEngine};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

pub fn white_noise(len: usize, rate: u32, seed: u64) -> Waveform<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..len)
        .map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Waveform::new(x, rate).unwrap()
}

/// Decaying 32-tap test filter.
pub fn test_fir(decay: f64, freq: f64, gain: f64) -> Vec<f64> {
    (0..32)
        .map(|n| gain * decay.powi(n) * (freq * n as f64).cos())
        .collect()
}

/// Causal linear convolution truncated to the input length.
pub fn fir_filter(x: &Waveform<f64>, h: &[f64]) -> Waveform<f64> {
    let s = x.samples();
    let y = (0..s.len())
        .map(|n| {
            h.iter()
                .enumerate()
                .take(n + 1)
                .map(|(m, &hm)| hm * s[n - m])
                .sum()
        })
        .collect();
    Waveform::new(y, x.sample_rate()).unwrap()
}

/// `sum_n h[n] exp(-j 2 pi k n / frame_len)`.
pub fn fir_response(h: &[f64], frame_len: usize, k: usize) -> Complex<f64> {
    h.iter()
        .enumerate()
        .map(|(n, &v)| {
            Complex::from_polar(
                v,
                -2.0 * std::f64::consts::PI * (k * n) as f64 / frame_len as f64,
            )
        })
        .sum()
}

pub fn db(v: f64) -> f64 {
    10.0 * v.log10()
}

/// Frame-averaged power spectrum on `spec`.
pub fn average_power(x: &Waveform<f64>, spec: FrameSpec) -> Vec<f64> {
    let s = WolaEngine::new(spec).analyze(x).unwrap();
    let frames = s.num_frames() as f64;
    s.data()
        .rows()
        .into_iter()
        .map(|row| row.iter().map(|c| c.norm_sqr()).sum::<f64>() / frames)
        .collect()
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    dot(a, b) / (dot(a, a) * dot(b, b)).sqrt()
}

/// Welch power spectrum (bins `0..=n/2`) with a 4-term Blackman-Harris window
/// and 50 % overlap.
pub fn welch_power(x: &[f64], n: usize) -> Vec<f64> {
    let tau = 2.0 * std::f64::consts::PI;
    let w: Vec<f64> = (0..n)
        .map(|i| {
            let t = tau * i as f64 / n as f64;
            0.35875 - 0.48829 * t.cos() + 0.14128 * (2.0 * t).cos() - 0.01168 * (3.0 * t).cos()
        })
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut acc = vec![0.0; n / 2 + 1];
    let mut start = 0;
    while start + n <= x.len() {
        let mut buf: Vec<Complex<f64>> = (0..n)
            .map(|i| Complex::new(x[start + i] * w[i], 0.0))
            .collect();
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
        start += n / 2;
    }
    acc
}
