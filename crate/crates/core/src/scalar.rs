//! Scalar abstraction: the engine is generic over the floating-point type.

use ndarray::ScalarOperand;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point scalar the engine computes with: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + ScalarOperand
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + NumAssign
        + ScalarOperand
        + std::fmt::Debug
        + std::fmt::Display
        + Send
        + Sync
        + 'static
{
}

/// Convert an `f64` constant into the working scalar type.
pub fn real<S: Real>(x: f64) -> S {
    S::from_f64(x).expect("constant representable in scalar type")
}

/// `max(a, b)` for scalars (total over non-NaN inputs).
pub fn smax<S: Real>(a: S, b: S) -> S {
    if a > b {
        a
    } else {
        b
    }
}

/// `min(a, b)` for scalars (total over non-NaN inputs).
pub fn smin<S: Real>(a: S, b: S) -> S {
    if a < b {
        a
    } else {
        b
    }
}

/// Clamp `x` into `[lo, hi]`.
pub fn clamp<S: Real>(x: S, lo: S, hi: S) -> S {
    smin(smax(x, lo), hi)
}

/// Positive part `max(x, 0)`.
pub fn pos<S: Real>(x: S) -> S {
    smax(x, S::zero())
}

/// Dot product of two equal-length slices.
pub fn dot<S: Real>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = S::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        acc += *x * *y;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_and_helpers() {
        let x: f32 = real(0.25);
        assert_eq!(x, 0.25f32);
        assert_eq!(smax(1.0, 2.0), 2.0);
        assert_eq!(smin(1.0, 2.0), 1.0);
        assert_eq!(clamp(3.0, 0.0, 2.0), 2.0);
        assert_eq!(pos(-1.0), 0.0);
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]), 11.0);
    }
}
