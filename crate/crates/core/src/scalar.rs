//! Scalar abstraction shared by all floating-point code.

use std::fmt::{Debug, Display};

use num_traits::{FromPrimitive, ToPrimitive};

pub use num_complex::Complex;

/// Real scalar usable by every numeric routine in the crate.
///
/// `nalgebra::RealField` already bundles the num-traits arithmetic traits and
/// gives access to the decompositions; the extra bounds add lossless-enough
/// conversions to and from `f64`.
pub trait Real:
    nalgebra::RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant.
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite constant")
    }

    /// Converts an unsigned count.
    fn count(x: u64) -> Self {
        <Self as FromPrimitive>::from_u64(x).expect("count fits")
    }

    /// Converts to `f64` for reporting.
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("finite value")
    }

    /// Machine epsilon of the type.
    fn eps() -> Self;
}

impl Real for f32 {
    fn eps() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn eps() -> Self {
        f64::EPSILON
    }
}

/// Complex number from real and imaginary parts.
pub fn c<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

/// Complex number from a real part.
pub fn cr<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

/// Squared modulus without the square root.
pub fn norm_sqr<T: Real>(z: &Complex<T>) -> T {
    z.re * z.re + z.im * z.im
}

/// Binomial coefficient as an `f64`-exact integer up to `n = 62`.
pub fn binom_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Binomial coefficient converted to `T`; zero outside the usual range.
pub fn binom<T: Real>(n: i64, k: i64) -> T {
    if n < 0 || k < 0 || k > n {
        return T::zero();
    }
    <T as FromPrimitive>::from_u128(binom_u128(n as u64, k as u64)).expect("binomial fits")
}
