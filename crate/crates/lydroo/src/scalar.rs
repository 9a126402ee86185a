//! Scalar abstraction: all core math is generic over a floating-point type.
//!
//! `f64` is the type the simulator is normally run with (queue recursions
//! accumulate over tens of thousands of frames); `f32` is supported for the
//! pure per-frame math. Concrete aliases live at the crate root.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// Floating-point scalar used by the simulator core: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssignOps
    + Sum<Self>
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; every config constant goes through here.
    fn of(v: f64) -> Self;

    /// Widening to `f64` for reporting and CSV output.
    fn as_f64(self) -> f64;

    /// One standard-normal draw from `rng`.
    fn std_normal<G: Rng + ?Sized>(rng: &mut G) -> Self;

    /// One unit-mean exponential draw from `rng`.
    fn exp1<G: Rng + ?Sized>(rng: &mut G) -> Self;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn of(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            #[inline]
            fn std_normal<G: Rng + ?Sized>(rng: &mut G) -> Self {
                StandardNormal.sample(rng)
            }

            #[inline]
            fn exp1<G: Rng + ?Sized>(rng: &mut G) -> Self {
                Exp1.sample(rng)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn draws_are_generic_over_scalar() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a: f32 = Real::std_normal(&mut rng);
        let b: f64 = Real::std_normal(&mut rng);
        assert!(a.is_finite() && b.is_finite());
        let e: f64 = Real::exp1(&mut rng);
        assert!(e >= 0.0);
    }
}
