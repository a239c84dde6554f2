//! Scalar abstraction shared by the numeric modules.
//!
//! Every probability, observation and utility in the simulator is carried as a
//! [`Real`]. The trait is implemented for `f32` and `f64`; the crate root
//! exports `f64` aliases for the common types.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar usable throughout the simulator.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Draws one standard normal variate.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Converts an `f64` literal. Total for the supported types.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::lit(2.0)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion to f64")
    }
}

impl Real for f32 {
    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Real for f64 {
    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

/// Numerically stable logistic function.
pub fn logistic<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Log-odds of a probability in (0, 1).
pub fn logit<F: Real>(p: F) -> F {
    (p / (F::one() - p)).ln()
}

/// Bernoulli draw with success probability `p`, consuming exactly one uniform.
#[inline]
pub fn bernoulli<F: Real, R: Rng + ?Sized>(rng: &mut R, p: F) -> bool {
    rng.random::<f64>() < p.as_f64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_inverts_logit() {
        for &p in &[0.01_f64, 0.2, 0.5, 0.7, 0.999] {
            assert!((logistic(logit(p)) - p).abs() < 1e-12);
        }
        assert!((logistic(0.5_f32) - 0.622_459_3).abs() < 1e-6);
    }

    #[test]
    fn logistic_is_stable_at_extremes() {
        assert_eq!(logistic(-1000.0_f64), 0.0);
        assert_eq!(logistic(1000.0_f64), 1.0);
    }
}
