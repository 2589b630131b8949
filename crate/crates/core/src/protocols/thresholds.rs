//! Price thresholds: P2 liquidation and fast-track triggers, P3 reasonableness bands.

use num_traits::One;
use thiserror::Error;

use crate::model::{fmt_rational, int, LoanParams, ParamsError, Price, Rational};

use super::state::Party;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ThresholdError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("rho_B undefined: epsilon * p0 = {0} is not below 1")]
    RhoBUndefined(String),
    #[error("only the lender or the borrower can open early")]
    ArbiterCannotLiquidate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reasonableness {
    Reasonable,
    Unreasonable,
}

/// `p < p0 / 2`.
pub fn check_liquidation_pi2(p: &Price, params: &LoanParams) -> bool {
    p.value() * int(2) < *params.p0.value()
}

/// `p >= tau`. Requires `tau` to be set and above `p0`.
pub fn check_early_termination_pi2(p: &Price, params: &LoanParams) -> Result<bool, ParamsError> {
    let tau = params.tau.as_ref().ok_or(ParamsError::TauUnset)?;
    if tau <= &params.p0 {
        return Err(ParamsError::TauNotAboveP0 {
            tau: tau.to_string(),
            p0: params.p0.to_string(),
        });
    }
    Ok(p >= tau)
}

/// `p0 / (1 - epsilon p0)`: the price at which terminating early is worth exactly 2x principal
/// to the borrower.
pub fn rho_b(params: &LoanParams) -> Result<Price, ThresholdError> {
    let ep = &params.epsilon * params.p0.value();
    if ep >= Rational::one() {
        return Err(ThresholdError::RhoBUndefined(fmt_rational(&ep)));
    }
    Ok(Price::new(params.p0.value() / (Rational::one() - ep)).expect("positive"))
}

/// `p0 / (1 + epsilon p0)`: the price at which liquidating returns exactly the principal to the
/// lender.
pub fn rho_l(params: &LoanParams) -> Price {
    let ep = &params.epsilon * params.p0.value();
    Price::new(params.p0.value() / (Rational::one() + ep)).expect("positive")
}

pub fn classify(party: Party, p: &Price, params: &LoanParams) -> Result<Reasonableness, ThresholdError> {
    let ok = match party {
        Party::Lender => p <= &rho_l(params),
        Party::Borrower => match rho_b(params) {
            Ok(r) => p >= &r,
            Err(_) => false,
        },
        Party::Arbiter => return Err(ThresholdError::ArbiterCannotLiquidate),
    };
    Ok(if ok { Reasonableness::Reasonable } else { Reasonableness::Unreasonable })
}

/// Boolean form of [`classify`]. A borrower termination is never reasonable when `rho_B` is
/// undefined.
pub fn classify_liquidation(party: Party, p: &Price, params: &LoanParams) -> Result<bool, ThresholdError> {
    classify(party, p, params).map(|r| r == Reasonableness::Reasonable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ratio;
    use proptest::prelude::*;

    fn price(n: i64, d: i64) -> Price {
        Price::new(ratio(n, d)).unwrap()
    }

    fn params(p0: Price, eps: Rational) -> LoanParams {
        LoanParams::new(p0, eps)
    }

    #[test]
    fn liquidation_threshold_is_strict() {
        let ps = params(price(2, 1), ratio(1, 10));
        assert!(!check_liquidation_pi2(&price(1, 1), &ps));
        assert!(check_liquidation_pi2(&price(9, 10), &ps));
        assert!(!check_liquidation_pi2(&price(2, 1), &ps));
    }

    #[test]
    fn early_termination() {
        let ps = params(price(2, 1), ratio(1, 10)).with_tau(price(3, 1));
        assert!(check_early_termination_pi2(&price(3, 1), &ps).unwrap());
        assert!(!check_early_termination_pi2(&price(299, 100), &ps).unwrap());
        let bad = params(price(2, 1), ratio(1, 10)).with_tau(price(2, 1));
        assert!(check_early_termination_pi2(&price(3, 1), &bad).is_err());
        assert!(check_early_termination_pi2(&price(3, 1), &params(price(2, 1), ratio(1, 10))).is_err());
    }

    #[test]
    fn rho_values() {
        let ps = params(price(2, 1), ratio(1, 10));
        assert_eq!(rho_b(&ps).unwrap(), price(5, 2));
        assert_eq!(rho_l(&ps), price(5, 3));
        let zero = params(price(1, 1), int(0));
        assert_eq!(rho_b(&zero).unwrap(), price(1, 1));
        assert_eq!(rho_l(&zero), price(1, 1));
        assert!(rho_b(&params(price(2, 1), ratio(1, 2))).is_err());
    }

    #[test]
    fn threshold_fixed_points() {
        let ps = params(price(2, 1), ratio(1, 10));
        let y = ps.y().0;
        let half = &y / int(2);
        // borrower: 1 + (y/2 - eps) rho_B == 2
        let rb = rho_b(&ps).unwrap();
        assert_eq!(int(1) + (&half - &ps.epsilon) * rb.value(), int(2));
        // lender: (y/2 + eps) rho_L == 1
        assert_eq!((&half + &ps.epsilon) * rho_l(&ps).value(), int(1));
    }

    #[test]
    fn classification() {
        let ps = params(price(2, 1), ratio(1, 10));
        assert!(classify_liquidation(Party::Lender, &rho_l(&ps), &ps).unwrap());
        assert!(classify_liquidation(Party::Borrower, &rho_b(&ps).unwrap(), &ps).unwrap());
        assert!(!classify_liquidation(Party::Borrower, &price(2, 1), &ps).unwrap());
        assert!(!classify_liquidation(Party::Lender, &price(2, 1), &ps).unwrap());
        assert!(classify_liquidation(Party::Arbiter, &price(2, 1), &ps).is_err());
    }

    proptest! {
        #[test]
        fn rho_l_below_p0_below_rho_b(p in 1i64..40, pd in 1i64..10, e in 1i64..100) {
            let p0 = price(p, pd);
            let eps = ratio(e, 100);
            prop_assume!(&eps * p0.value() < int(1));
            let ps = params(p0.clone(), eps);
            let rl = rho_l(&ps);
            let rb = rho_b(&ps).unwrap();
            prop_assert!(rl < p0);
            prop_assert!(p0 < rb);
        }
    }
}
