//! Scalar abstraction shared by every distance computation.
//!
//! Finite spaces run on exact rationals so that oracle comparisons never
//! depend on rounding; real-coordinate spaces run on `f64` (or `f32`) with an
//! explicit relative tolerance.

use std::fmt::{Debug, Display};

use num_rational::{Ratio, Rational64};
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Number type used for distances, residuals and control-function values.
pub trait Scalar:
    Num + Signed + PartialOrd + Clone + Debug + Display + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// `true` when arithmetic is exact and comparisons need no tolerance.
    const EXACT: bool;

    /// `self <= other`, allowing for rounding on inexact types.
    fn approx_le(&self, other: &Self) -> bool;

    /// `self == other`, allowing for rounding on inexact types.
    fn approx_eq(&self, other: &Self) -> bool {
        self.approx_le(other) && other.approx_le(self)
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lossy conversion used for reporting and log-spaced grids.
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Conversion from a float literal. Exact types round to a nearby rational.
    fn from_f64_lossy(x: f64) -> Self;

    /// JSON rendering for reports: numbers for floats, `"p/q"` strings for rationals.
    fn to_json(&self) -> serde_json::Value;

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }
}

macro_rules! float_scalar {
    ($t:ty, $rel:expr) => {
        impl Scalar for $t {
            const EXACT: bool = false;

            fn approx_le(&self, other: &Self) -> bool {
                let scale = 1.0 as $t + self.abs().max(other.abs());
                *self <= *other + $rel * scale
            }

            fn from_f64_lossy(x: f64) -> Self {
                x as $t
            }

            fn to_json(&self) -> serde_json::Value {
                serde_json::json!(*self as f64)
            }
        }
    };
}

float_scalar!(f64, 1e-9);
float_scalar!(f32, 1e-5);

impl Scalar for Rational64 {
    const EXACT: bool = true;

    fn approx_le(&self, other: &Self) -> bool {
        self <= other
    }

    fn approx_eq(&self, other: &Self) -> bool {
        self == other
    }

    fn from_f64_lossy(x: f64) -> Self {
        // Bounded denominators keep later sums well inside i64.
        match Ratio::approximate_float(x) {
            Some(r) if *r.denom() <= MAX_DEN => r,
            _ if x.is_finite() && x.abs() < (1u64 << 40) as f64 => {
                Ratio::new((x * MAX_DEN as f64).round() as i64, MAX_DEN)
            }
            _ if x.is_finite() && x.abs() < i64::MAX as f64 => Ratio::from_integer(x.round() as i64),
            _ => Ratio::from_integer(0),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(render_ratio(self))
    }
}

const MAX_DEN: i64 = 1 << 20;

pub fn render_ratio(r: &Rational64) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `"3"`, `"-1/4"` or a decimal literal such as `"0.125"` into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational64> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: i64 = num.trim().parse().ok()?;
        let den: i64 = den.trim().parse().ok()?;
        if den == 0 {
            return None;
        }
        return Some(Ratio::new(num, den));
    }
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: i64 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    let denom = 10i64.checked_pow(frac_part.len() as u32)?;
    let r = Ratio::new(numer, denom);
    Some(if negative { -r } else { r })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("1/2"), Some(Ratio::new(1, 2)));
        assert_eq!(parse_rational("-3/6"), Some(Ratio::new(-1, 2)));
        assert_eq!(parse_rational("0.9"), Some(Ratio::new(9, 10)));
        assert_eq!(parse_rational("2"), Some(Ratio::from_integer(2)));
        assert_eq!(parse_rational("-.25"), Some(Ratio::new(-1, 4)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational(""), None);
    }

    #[test]
    fn float_tolerance_is_relative() {
        assert!(1.0f64.approx_le(&(1.0 - 1e-12)));
        assert!(!1.0f64.approx_le(&0.999));
        assert!(1e6f64.approx_eq(&(1e6 + 1e-5)));
    }

    #[test]
    fn rationals_compare_exactly() {
        let a = Ratio::new(1, 3);
        let b = Ratio::new(1, 3) + Ratio::new(1, 1_000_000);
        assert!(a.approx_le(&b));
        assert!(!b.approx_le(&a));
        assert_eq!(render_ratio(&Ratio::new(6, 4)), "3/2");
        assert_eq!(render_ratio(&Ratio::from_integer(-2)), "-2");
    }
}
