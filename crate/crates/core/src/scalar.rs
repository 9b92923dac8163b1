//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point scalar used throughout the toolkit: `f32` or `f64`.
///
/// Thresholds in this crate are calibrated for `f64`; `f32` instantiations
/// compile and run but will not meet the tight residual targets.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    /// Lossy conversion to `f64` for reporting and error payloads.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn two_pi() -> Self {
        Self::TAU()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Wraps `v` into `[0, period)`.
#[inline]
pub fn wrap_positive<T: Real>(v: T, period: T) -> T {
    let r = v - period * (v / period).floor();
    if r >= period {
        r - period
    } else {
        r
    }
}

/// Wraps `v` into `[-period/2, period/2)`.
#[inline]
pub fn wrap_centered<T: Real>(v: T, period: T) -> T {
    let half = period * T::lit(0.5);
    wrap_positive(v + half, period) - half
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraps_into_fundamental_interval() {
        let tau = std::f64::consts::TAU;
        assert!((wrap_positive(-0.5, tau) - (tau - 0.5)).abs() < 1e-15);
        assert!((wrap_positive(3.0 * tau + 0.25, tau) - 0.25).abs() < 1e-12);
        assert!((wrap_centered(tau - 0.1, tau) + 0.1).abs() < 1e-12);
        assert!((wrap_centered(0.1f32, 1.0) - 0.1).abs() < 1e-6);
    }
}
