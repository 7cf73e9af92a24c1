//! Probability scalars.
//!
//! Every table, model and evaluator in the crate is generic over [`Scalar`].
//! Exact rationals are the default used by the oracle checks; `f64`/`f32`
//! are available for quick numeric work where exactness is not required.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};

/// A probability value: a field-like number that can be parsed from and
/// written to the `num/den` text form used by table and model files.
pub trait Scalar: Num + Clone + Debug + PartialOrd + Send + Sync + 'static {
    /// `num / den`. `den` must be nonzero.
    fn from_ratio(num: i64, den: i64) -> Self;

    fn from_big(r: &BigRational) -> Self;

    /// Parses `"3/4"`, `"1"`, `"-2/7"` and, for float scalars, decimals.
    fn parse_text(s: &str) -> Option<Self>;

    /// Canonical text form (lowest terms for rationals).
    fn to_text(&self) -> String;

    fn to_f64(&self) -> f64;

    /// True when arithmetic is exact, so equality checks need no tolerance.
    fn is_exact() -> bool;

    fn abs_value(&self) -> Self {
        if *self < Self::zero() {
            Self::zero() - self.clone()
        } else {
            self.clone()
        }
    }
}

fn split_ratio(s: &str) -> Option<(&str, Option<&str>)> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    match s.split_once('/') {
        Some((n, d)) => Some((n.trim(), Some(d.trim()))),
        None => Some((s, None)),
    }
}

impl Scalar for BigRational {
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_big(r: &BigRational) -> Self {
        r.clone()
    }

    fn parse_text(s: &str) -> Option<Self> {
        let (n, d) = split_ratio(s)?;
        let num: BigInt = n.parse().ok()?;
        let den: BigInt = match d {
            Some(d) => d.parse().ok()?,
            None => BigInt::one(),
        };
        if den.is_zero() {
            return None;
        }
        Some(BigRational::new(num, den))
    }

    fn to_text(&self) -> String {
        if self.is_integer() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_exact() -> bool {
        true
    }

    fn abs_value(&self) -> Self {
        self.abs()
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_ratio(num: i64, den: i64) -> Self {
                num as $t / den as $t
            }

            fn from_big(r: &BigRational) -> Self {
                ToPrimitive::to_f64(r).unwrap_or(f64::NAN) as $t
            }

            fn parse_text(s: &str) -> Option<Self> {
                let (n, d) = split_ratio(s)?;
                let num: $t = n.parse().ok()?;
                match d {
                    Some(d) => {
                        let den: $t = d.parse().ok()?;
                        if den == 0.0 {
                            None
                        } else {
                            Some(num / den)
                        }
                    }
                    None => Some(num),
                }
            }

            fn to_text(&self) -> String {
                format!("{}", self)
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }

            fn is_exact() -> bool {
                false
            }
        }
    };
}

float_scalar!(f64);
float_scalar!(f32);

/// Shorthand for an exact rational `num / den`.
pub fn big(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}
