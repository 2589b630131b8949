use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{Signed, Zero};
use thiserror::Error;

use super::rational::{fmt_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AmountError {
    #[error("rate must be positive, got {0}")]
    NonPositiveRate(String),
    #[error("price must be positive, got {0}")]
    NonPositivePrice(String),
    #[error("BTC amount must be non-negative, got {0}")]
    NegativeBtc(String),
}

/// Fiat quantity in millions ("M").
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FiatAmount(pub Rational);

/// Quantity of BTC in coins.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BtcAmount(pub Rational);

/// Fiat-M per 1 BTC. Always strictly positive.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Price(Rational);

impl FiatAmount {
    pub fn new(value: Rational) -> Self {
        FiatAmount(value)
    }

    pub fn zero() -> Self {
        FiatAmount(Rational::zero())
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }
}

impl BtcAmount {
    pub fn new(value: Rational) -> Result<Self, AmountError> {
        if value.is_negative() {
            return Err(AmountError::NegativeBtc(fmt_rational(&value)));
        }
        Ok(BtcAmount(value))
    }

    pub fn zero() -> Self {
        BtcAmount(Rational::zero())
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }
}

impl Price {
    pub fn new(value: Rational) -> Result<Self, AmountError> {
        if !value.is_positive() {
            return Err(AmountError::NonPositivePrice(fmt_rational(&value)));
        }
        Ok(Price(value))
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }

    pub fn into_value(self) -> Rational {
        self.0
    }

    /// BTC per 1M fiat.
    pub fn rate(&self) -> Rational {
        self.0.recip()
    }
}

/// The price implied by a fiat-to-BTC rate: 1M fiat buys `rate` BTC, so 1 BTC costs `1/rate` M.
pub fn price_of(rate: &Rational) -> Result<Price, AmountError> {
    if !rate.is_positive() {
        return Err(AmountError::NonPositiveRate(fmt_rational(rate)));
    }
    Ok(Price(rate.recip()))
}

/// Fiat worth of `amount` BTC at price `p`.
pub fn collateral_value(amount: &BtcAmount, p: &Price) -> FiatAmount {
    FiatAmount(&amount.0 * &p.0)
}

/// BTC needed to be worth `fiat` at price `p`.
pub fn btc_worth(fiat: &FiatAmount, p: &Price) -> Rational {
    &fiat.0 / &p.0
}

impl Add for FiatAmount {
    type Output = FiatAmount;
    fn add(self, rhs: Self) -> Self {
        FiatAmount(self.0 + rhs.0)
    }
}

impl Sub for FiatAmount {
    type Output = FiatAmount;
    fn sub(self, rhs: Self) -> Self {
        FiatAmount(self.0 - rhs.0)
    }
}

impl Neg for FiatAmount {
    type Output = FiatAmount;
    fn neg(self) -> Self {
        FiatAmount(-self.0)
    }
}

impl Mul<&Rational> for &FiatAmount {
    type Output = FiatAmount;
    fn mul(self, rhs: &Rational) -> FiatAmount {
        FiatAmount(&self.0 * rhs)
    }
}

impl fmt::Display for FiatAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}M", fmt_rational(&self.0))
    }
}

impl fmt::Display for BtcAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} BTC", fmt_rational(&self.0))
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_rational(&self.0))
    }
}
