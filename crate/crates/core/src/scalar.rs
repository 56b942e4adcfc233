//! Scalar types shared by the exact and floating-point code paths.

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

/// Exact Gaussian rational `a + b i` with `a, b ∈ ℚ`.
pub type Qi = Complex<BigRational>;

/// Coefficient field for graded elements and operators.
///
/// Implemented for [`Qi`] (exact) and [`Complex64`] (numeric).
pub trait Scalar:
    Clone
    + PartialEq
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn imag_unit() -> Self;
    fn from_int(n: i64) -> Self;
    fn from_rational(r: &BigRational) -> Self;
    fn conj(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn to_c64(&self) -> Complex64;

    fn from_parts(re: &BigRational, im: &BigRational) -> Self {
        Self::from_rational(re) + Self::imag_unit() * Self::from_rational(im)
    }
}

impl Scalar for Qi {
    fn zero() -> Self {
        Complex::new(BigRational::zero(), BigRational::zero())
    }
    fn one() -> Self {
        Complex::new(BigRational::one(), BigRational::zero())
    }
    fn imag_unit() -> Self {
        Complex::new(BigRational::zero(), BigRational::one())
    }
    fn from_int(n: i64) -> Self {
        Complex::new(BigRational::from_integer(BigInt::from(n)), BigRational::zero())
    }
    fn from_rational(r: &BigRational) -> Self {
        Complex::new(r.clone(), BigRational::zero())
    }
    fn conj(&self) -> Self {
        Complex::new(self.re.clone(), -self.im.clone())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn to_c64(&self) -> Complex64 {
        Complex64::new(rat_to_f64(&self.re), rat_to_f64(&self.im))
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn imag_unit() -> Self {
        Complex64::new(0.0, 1.0)
    }
    fn from_int(n: i64) -> Self {
        Complex64::new(n as f64, 0.0)
    }
    fn from_rational(r: &BigRational) -> Self {
        Complex64::new(rat_to_f64(r), 0.0)
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn to_c64(&self) -> Complex64 {
        *self
    }
}

/// `n / d` as an exact rational.
pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Exact Gaussian rational `(re_n / re_d) + (im_n / im_d) i`.
pub fn qi(re: BigRational, im: BigRational) -> Qi {
    Complex::new(re, im)
}

pub fn rat_to_f64(r: &BigRational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // Very large numerators or denominators: shift both down first.
            let bits = r.numer().bits().max(r.denom().bits()) as i64 - 900;
            let shift = bits.max(0) as usize;
            let n = (r.numer().abs() >> shift).to_f64().unwrap_or(f64::MAX);
            let d = (r.denom() >> shift).to_f64().unwrap_or(f64::MAX);
            let v = n / d;
            if r.is_negative() {
                -v
            } else {
                v
            }
        }
    }
}

/// Sign `(-1)^k`.
pub fn parity_sign<S: Scalar>(odd: bool) -> S {
    if odd {
        -S::one()
    } else {
        S::one()
    }
}
