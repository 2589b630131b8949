//! Exact-arithmetic monetary types, prices, loan parameters, price paths and the timeline.

pub mod amount;
pub mod params;
pub mod rational;

pub use amount::{btc_worth, collateral_value, price_of, AmountError, BtcAmount, FiatAmount, Price};
pub use params::{LoanParams, ParamsError, PricePath, TimeAnchors};
pub use rational::{fmt_rational, int, parse_rational, ratio, Rational, RationalError};
