//! Exact rational numbers used for every monetary quantity, price and time.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Arbitrary-precision rational, always kept in lowest terms with a positive denominator.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RationalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("invalid rational literal `{0}` (expected `num/den` or an integer)")]
    Invalid(String),
    #[error("decimal literal `{0}` rejected; write it as `num/den`")]
    Decimal(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// `num/den` as a rational. Panics on a zero denominator; use [`checked_ratio`] for input data.
pub fn ratio(num: i64, den: i64) -> Rational {
    checked_ratio(num, den).expect("zero denominator")
}

pub fn checked_ratio(num: i64, den: i64) -> Result<Rational, RationalError> {
    if den == 0 {
        return Err(RationalError::DivisionByZero);
    }
    Ok(BigRational::new(BigInt::from(num), BigInt::from(den)))
}

pub fn int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

pub fn checked_div(a: &Rational, b: &Rational) -> Result<Rational, RationalError> {
    if b.is_zero() {
        Err(RationalError::DivisionByZero)
    } else {
        Ok(a / b)
    }
}

/// Parses `num/den`, `-num/den` or a bare integer. Decimal points are refused so that no
/// value ever passes through a binary float.
pub fn parse_rational(text: &str) -> Result<Rational, RationalError> {
    let s = text.trim();
    if s.contains('.') || s.contains('e') || s.contains('E') {
        return Err(RationalError::Decimal(s.to_string()));
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| RationalError::Invalid(s.to_string()))?;
    if den.starts_with('-') || den.starts_with('+') {
        return Err(RationalError::Invalid(s.to_string()));
    }
    let den: BigInt = den.parse().map_err(|_| RationalError::Invalid(s.to_string()))?;
    if den.is_zero() {
        return Err(RationalError::ZeroDenominator(s.to_string()));
    }
    Ok(BigRational::new(num, den))
}

/// Canonical text form: `num/den`, or just `num` for integers.
pub fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn min(a: Rational, b: Rational) -> Rational {
    if a <= b {
        a
    } else {
        b
    }
}

pub fn max(a: Rational, b: Rational) -> Rational {
    if a >= b {
        a
    } else {
        b
    }
}

pub fn is_positive(r: &Rational) -> bool {
    r.is_positive()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_fractions_and_integers() {
        assert_eq!(parse_rational("3/4").unwrap(), ratio(3, 4));
        assert_eq!(parse_rational("-6/8").unwrap(), ratio(-3, 4));
        assert_eq!(parse_rational("2").unwrap(), int(2));
        assert_eq!(parse_rational(" 5 / 3 ").unwrap(), ratio(5, 3));
    }

    #[test]
    fn rejects_zero_denominator_and_decimals() {
        assert!(matches!(parse_rational("1/0"), Err(RationalError::ZeroDenominator(_))));
        assert!(matches!(parse_rational("0.5"), Err(RationalError::Decimal(_))));
        assert!(matches!(parse_rational("1/-2"), Err(RationalError::Invalid(_))));
        assert!(matches!(parse_rational("abc"), Err(RationalError::Invalid(_))));
    }

    #[test]
    fn reduced_with_positive_denominator() {
        let r = ratio(4, -6);
        assert_eq!(r.numer(), &BigInt::from(-2));
        assert_eq!(r.denom(), &BigInt::from(3));
        assert_eq!(checked_div(&one(), &zero()), Err(RationalError::DivisionByZero));
    }

    #[test]
    fn formatting() {
        assert_eq!(fmt_rational(&ratio(10, 4)), "5/2");
        assert_eq!(fmt_rational(&int(-3)), "-3");
    }

    proptest! {
        #[test]
        fn add_then_subtract_round_trips(a in -50i64..50, b in 1i64..50, c in -50i64..50, d in 1i64..50) {
            let x = ratio(a, b);
            let y = ratio(c, d);
            prop_assert_eq!(&(&x + &y) - &y, x.clone());
            prop_assert_eq!(parse_rational(&fmt_rational(&x)).unwrap(), x);
        }
    }
}
