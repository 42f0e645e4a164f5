//! Own-voice estimate from complex masks applied to both noisy microphones.

use ndarray::{Array2, Zip};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::format::MaskRecord;
use crate::scalar::Scalar;
use crate::waveform::Waveform;
use crate::wola::{Spectrogram, WolaEngine};

/// `M_o * Y_o + M_i * Y_i`, elementwise.
pub fn combine_masks<T: Scalar>(
    noisy_outer: &Spectrogram<T>,
    noisy_inear: &Spectrogram<T>,
    mask_outer: &Array2<Complex<T>>,
    mask_inear: &Array2<Complex<T>>,
) -> Result<Spectrogram<T>> {
    if noisy_outer.spec() != noisy_inear.spec() {
        return Err(Error::ShapeMismatch(
            "outer and in-ear spectrograms use different frame specs".into(),
        ));
    }
    let shape = noisy_outer.data().dim();
    for (what, dim) in [
        ("in-ear spectrogram", noisy_inear.data().dim()),
        ("outer mask", mask_outer.dim()),
        ("in-ear mask", mask_inear.dim()),
    ] {
        if dim != shape {
            return Err(Error::ShapeMismatch(format!(
                "{what} is {dim:?}, outer spectrogram is {shape:?}"
            )));
        }
    }
    let finite = |m: &Array2<Complex<T>>| m.iter().all(|c| c.re.is_finite() && c.im.is_finite());
    if !finite(mask_outer) {
        return Err(Error::NonFinite("outer mask"));
    }
    if !finite(mask_inear) {
        return Err(Error::NonFinite("in-ear mask"));
    }
    let mut out = Array2::zeros(shape);
    Zip::from(&mut out)
        .and(mask_outer)
        .and(noisy_outer.data())
        .and(mask_inear)
        .and(noisy_inear.data())
        .for_each(|o, &mo, &yo, &mi, &yi| *o = mo * yo + mi * yi);
    noisy_outer.with_data(out)
}

pub fn apply_masks<T: Scalar>(
    noisy_outer: &Spectrogram<T>,
    noisy_inear: &Spectrogram<T>,
    mask_outer: &Array2<Complex<T>>,
    mask_inear: &Array2<Complex<T>>,
) -> Result<Waveform<T>> {
    let est = combine_masks(noisy_outer, noisy_inear, mask_outer, mask_inear)?;
    WolaEngine::new(*est.spec()).synthesize(&est)
}

/// Analyzes a noisy pair with the mask's frame spec and applies the masks.
pub fn reconstruct<T: Scalar>(
    noisy_outer: &Waveform<T>,
    noisy_inear: &Waveform<T>,
    masks: &MaskRecord<T>,
) -> Result<Waveform<T>> {
    if noisy_outer.len() != noisy_inear.len() {
        return Err(Error::LengthMismatch {
            expected: noisy_outer.len(),
            found: noisy_inear.len(),
        });
    }
    if masks.signal_len != 0 && masks.signal_len != noisy_outer.len() {
        return Err(Error::LengthMismatch {
            expected: masks.signal_len,
            found: noisy_outer.len(),
        });
    }
    let engine = WolaEngine::new(masks.spec);
    let yo = engine.analyze(noisy_outer)?;
    let yi = engine.analyze(noisy_inear)?;
    let est = combine_masks(&yo, &yi, &masks.outer, &masks.inear)?;
    engine.synthesize(&est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wola::FrameSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(len: usize, seed: u64) -> Waveform<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Waveform::new(
            (0..len).map(|_| rng.random_range(-0.5..0.5)).collect(),
            16000,
        )
        .unwrap()
    }

    fn random_mask(shape: (usize, usize), seed: u64) -> Array2<Complex<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn(shape, |_| {
            Complex::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
        })
    }

    fn pair() -> (Spectrogram<f64>, Spectrogram<f64>) {
        let e = WolaEngine::new(FrameSpec::pipeline());
        (
            e.analyze(&noise(5000, 1)).unwrap(),
            e.analyze(&noise(5000, 2)).unwrap(),
        )
    }

    #[test]
    fn passthrough_and_silence() {
        let (yo, yi) = pair();
        let ones = Array2::from_elem(yo.shape(), Complex::new(1.0, 0.0));
        let zeros = Array2::zeros(yo.shape());
        let out = apply_masks(&yo, &yi, &ones, &zeros).unwrap();
        let want = WolaEngine::new(FrameSpec::pipeline())
            .synthesize(&yo)
            .unwrap();
        assert_eq!(out, want);
        let silent = apply_masks(&yo, &yi, &zeros, &zeros).unwrap();
        assert!(silent.samples().iter().all(|&v| v == 0.0));
        assert_eq!(silent.len(), 5000);
    }

    #[test]
    fn matches_elementwise_oracle() {
        let (yo, yi) = pair();
        let mo = random_mask(yo.shape(), 3);
        let mi = random_mask(yo.shape(), 4);
        let mut oracle = Array2::zeros(yo.shape());
        for ((k, l), v) in oracle.indexed_iter_mut() {
            *v = mo[[k, l]] * yo.data()[[k, l]] + mi[[k, l]] * yi.data()[[k, l]];
        }
        let e = WolaEngine::new(FrameSpec::pipeline());
        let want = e.synthesize(&yo.with_data(oracle).unwrap()).unwrap();
        let got = apply_masks(&yo, &yi, &mo, &mi).unwrap();
        for (a, b) in got.samples().iter().zip(want.samples()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn additive_in_masks() {
        let (yo, yi) = pair();
        let mo = random_mask(yo.shape(), 5);
        let mi = random_mask(yo.shape(), 6);
        let z = Array2::zeros(yo.shape());
        let a = apply_masks(&yo, &yi, &mo, &z).unwrap();
        let b = apply_masks(&yo, &yi, &z, &mi).unwrap();
        let ab = apply_masks(&yo, &yi, &mo, &mi).unwrap();
        for n in 0..ab.len() {
            assert!((a.samples()[n] + b.samples()[n] - ab.samples()[n]).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_masks() {
        let (yo, yi) = pair();
        let (bins, frames) = yo.shape();
        let short = Array2::zeros((bins, frames - 1));
        let ok = Array2::zeros((bins, frames));
        assert!(matches!(
            apply_masks(&yo, &yi, &short, &ok),
            Err(Error::ShapeMismatch(_))
        ));
        let mut nan = ok.clone();
        nan[[3, 2]] = Complex::new(f64::NAN, 0.0);
        assert!(matches!(
            apply_masks(&yo, &yi, &ok, &nan),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn waveform_entry_point() {
        let (xo, xi) = (noise(3000, 7), noise(3000, 8));
        let spec = FrameSpec::pipeline();
        let frames = spec.frame_count(3000);
        let masks = MaskRecord {
            spec,
            signal_len: 3000,
            outer: Array2::from_elem((257, frames), Complex::new(0.5, 0.0)),
            inear: Array2::from_elem((257, frames), Complex::new(0.5, 0.0)),
            meta: serde_json::Value::Null,
        };
        let out = reconstruct(&xo, &xi, &masks).unwrap();
        for n in 0..3000 {
            let want = 0.5 * (xo.samples()[n] + xi.samples()[n]);
            assert!((out.samples()[n] - want).abs() < 1e-9);
        }
    }
}
