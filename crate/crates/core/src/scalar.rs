//! Scalar abstractions.
//!
//! The exact engine is written against [`Field`], which any exact number type
//! with the usual `num-traits` operations satisfies (`BigRational`,
//! `Rational64`, ...). The numerical integrator is written against [`Real`],
//! implemented for `f32` and `f64`.

use std::fmt::{Debug, Display};
use std::hash::Hash;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

/// An exact field used for coefficients.
///
/// Reference arithmetic is exposed through methods so that generic code does
/// not need to restate higher-ranked bounds on `&Self` everywhere.
pub trait Field:
    Clone + Debug + Display + PartialEq + Eq + Hash + Ord + Zero + One + Send + Sync + 'static
{
    fn add_r(&self, other: &Self) -> Self;
    fn sub_r(&self, other: &Self) -> Self;
    fn mul_r(&self, other: &Self) -> Self;
    fn div_r(&self, other: &Self) -> Self;
    fn neg_r(&self) -> Self;
    fn from_i64(n: i64) -> Self;
    fn to_f64(&self) -> f64;

    fn from_frac(num: i64, den: i64) -> Self {
        Self::from_i64(num).div_r(&Self::from_i64(den))
    }

    fn inv_r(&self) -> Self {
        Self::one().div_r(self)
    }

    fn pow_u(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc.mul_r(self);
        }
        acc
    }
}

impl<T> Field for T
where
    T: Num + Signed + FromPrimitive + ToPrimitive,
    T: Clone + Debug + Display + Eq + Hash + Ord + Send + Sync + 'static,
    for<'a> &'a T: std::ops::Add<&'a T, Output = T>
        + std::ops::Sub<&'a T, Output = T>
        + std::ops::Mul<&'a T, Output = T>
        + std::ops::Div<&'a T, Output = T>
        + std::ops::Neg<Output = T>,
{
    fn add_r(&self, other: &Self) -> Self {
        self + other
    }
    fn sub_r(&self, other: &Self) -> Self {
        self - other
    }
    fn mul_r(&self, other: &Self) -> Self {
        self * other
    }
    fn div_r(&self, other: &Self) -> Self {
        self / other
    }
    fn neg_r(&self) -> Self {
        -self
    }
    fn from_i64(n: i64) -> Self {
        T::from_i64(n).expect("integer representable in field")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Floating-point scalar for the contour integrator.
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Display + Send + Sync + 'static {
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Parse `"p/q"` or `"p"` into a big rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            if q.is_zero() {
                return None;
            }
            Some(BigRational::new(p, q))
        }
        None => Some(BigRational::from_integer(s.parse().ok()?)),
    }
}

/// Format a rational as `"p/q"` (or `"p"` when integral).
pub fn format_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    #[test]
    fn rational_round_trip() {
        let q = parse_rational("-3/6").unwrap();
        assert_eq!(format_rational(&q), "-1/2");
        assert_eq!(format_rational(&parse_rational("7").unwrap()), "7");
        assert!(parse_rational("1/0").is_none());
        assert!(parse_rational("x").is_none());
    }

    #[test]
    fn field_ops_generic() {
        fn harmonic<F: Field>(n: i64) -> F {
            (1..=n).fold(F::zero(), |acc, k| acc.add_r(&F::from_frac(1, k)))
        }
        assert_eq!(harmonic::<Rational64>(4), Rational64::new(25, 12));
        assert_eq!(
            harmonic::<BigRational>(4),
            parse_rational("25/12").unwrap()
        );
    }
}
