//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StandardUniform};

/// Floating point type the solver and simulator are written against: `f32` or `f64`.
///
/// Besides the arithmetic traits this carries the three primitive samplers the
/// path simulator needs, so that random draws come out directly in the working
/// precision.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into the working type.
    #[inline]
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("constant representable in scalar type")
    }

    /// Converts a count into the working type.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lossy conversion used for diagnostics and error payloads.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    fn exp1<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform draw on `[0, 1)`.
    fn unit<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

macro_rules! impl_scalar {
    ($($t:ty),*) => {
        $(
            impl Scalar for $t {
                #[inline]
                fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                    <StandardNormal as Distribution<$t>>::sample(&StandardNormal, rng)
                }

                #[inline]
                fn exp1<R: Rng + ?Sized>(rng: &mut R) -> Self {
                    <Exp1 as Distribution<$t>>::sample(&Exp1, rng)
                }

                #[inline]
                fn unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
                    <StandardUniform as Distribution<$t>>::sample(&StandardUniform, rng)
                }
            }
        )*
    };
}

impl_scalar!(f32, f64);
