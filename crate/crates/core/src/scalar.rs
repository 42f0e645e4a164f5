//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real floating-point sample type: `f32` or `f64`.
///
/// Statistics that need headroom (RMS, variances, SNRs) are accumulated in
/// `f64` regardless of `T`; spectra and filters stay in `T`.
pub trait Scalar:
    Float + FftNum + FromPrimitive + ToPrimitive + Default + Sum + Debug + Display + Send + Sync
{
    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 is representable in every float type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("float to f64 never fails")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Mean power of a real sequence, accumulated in `f64`.
pub fn mean_power<T: Scalar>(x: &[T]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v.to_f64_lossy().powi(2)).sum::<f64>() / x.len() as f64
}

/// Root-mean-square value of a real sequence.
pub fn rms<T: Scalar>(x: &[T]) -> f64 {
    mean_power(x).sqrt()
}
