//! Scalar abstraction for the numeric pipeline.
//!
//! Everything numeric in this crate is generic over [`Real`] so the same
//! code runs in `f32` or `f64`. The crate root fixes [`crate::Scalar`] to
//! `f64`, which is what the CLI and all on-disk formats use.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, Signed, ToPrimitive};

/// Floating-point scalar usable throughout the pipeline.
///
/// The supertrait set is exactly what the signal kernels need: `Float` for
/// arithmetic, `FromPrimitive`/`ToPrimitive` to cross the f64 boundary at
/// API edges, `Signed + Send + Sync + Debug + 'static` so values satisfy
/// `rustfft::FftNum`, and `FromStr`/`Display` for text round-trips.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Signed
    + Sum<Self>
    + FromStr
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Name stored in parameter files so a checkpoint cannot be reloaded
    /// at a different precision.
    const NAME: &'static str;

    /// Narrowing conversion from `f64`, the precision of all constants.
    fn cast(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 converts to any Real")
    }

    fn to_f64_lossy(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("Real converts to f64")
    }
}

impl Real for f32 {
    const NAME: &'static str = "f32";
}

impl Real for f64 {
    const NAME: &'static str = "f64";
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean<T: Real>(xs: &[T]) -> T {
        let n = T::from_usize(xs.len()).unwrap();
        xs.iter().copied().sum::<T>() / n
    }

    #[test]
    fn generic_code_runs_in_both_precisions() {
        assert_eq!(mean(&[1.0f32, 2.0, 3.0]), 2.0f32);
        assert_eq!(mean(&[1.0f64, 2.0, 3.0]), 2.0f64);
    }

    #[test]
    fn f64_round_trips_through_text_exactly() {
        let v: f64 = 0.1 + 0.2;
        let parsed: f64 = v.to_string().parse().unwrap();
        assert_eq!(v.to_bits(), parsed.to_bits());
    }
}
