//! Scalar abstraction for the numeric layer.
//!
//! Every cost, loss, and filter kernel in this crate is written against
//! [`Scalar`] so the same code runs at `f32` or `f64` precision. The
//! simulator pins [`crate::Real`] = `f64`; the generic bound exists so the
//! math stays type-agnostic and the narrower instantiation can be exercised
//! in tests.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the numeric kernels are generic over.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Convert from `f64`, the canonical constant/RNG representation.
    ///
    /// Conversion is widening or rounding, never fallible for `f32`/`f64`.
    fn from_real(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any float scalar")
    }

    /// Convert to `f64` for hashing, bucketing, and report emission.
    fn to_real(self) -> f64 {
        self.to_f64().expect("float scalar converts to f64")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

/// Clamp `v` into `[lo, hi]`.
pub fn clamp<S: Scalar>(v: S, lo: S, hi: S) -> S {
    if v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_f64() {
        let x: f32 = Scalar::from_real(1.5);
        assert_eq!(x, 1.5f32);
        assert_eq!(x.to_real(), 1.5f64);
    }

    #[test]
    fn clamp_orders_endpoints() {
        assert_eq!(clamp(2.0, 0.0, 1.0), 1.0);
        assert_eq!(clamp(-2.0, 0.0, 1.0), 0.0);
        assert_eq!(clamp(0.5, 0.0, 1.0), 0.5);
    }
}
