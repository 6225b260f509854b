use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst};
use rustfft::FftNum;

/// Floating-point scalar the spectral backbone can run on: `f32` or `f64`.
pub trait Real: Float + FloatConst + FftNum + Default + Sum + Debug + Display + LowerExp {
    /// Lossless for f64, rounding for f32.
    fn lit(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    fn idx(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

impl<T> Real for T where
    T: Float + FloatConst + FftNum + Default + Sum + Debug + Display + LowerExp
{
}
