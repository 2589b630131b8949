use num_traits::{One, Signed};
use thiserror::Error;

use super::amount::{BtcAmount, FiatAmount, Price};
use super::rational::{fmt_rational, int, ratio, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamsError {
    #[error("principal must be positive")]
    NonPositivePrincipal,
    #[error("epsilon must satisfy 0 < epsilon < 1, got {0}")]
    EpsilonOutOfRange(String),
    #[error("epsilon' must be positive, got {0}")]
    EpsilonPrimeNonPositive(String),
    #[error("delta must be positive, got {0}")]
    NonPositiveDelta(String),
    #[error("tau must exceed p0 ({p0}), got {tau}")]
    TauNotAboveP0 { tau: String, p0: String },
    #[error("tau is not set")]
    TauUnset,
    #[error("query count q must be at least 1")]
    ZeroQueries,
    #[error("chunk count k must be at least 1")]
    ZeroChunks,
    #[error("invalid timeline: {0}")]
    Timeline(String),
    #[error("epsilon * p0 = {0} must be below 1/2 for the oracle-free protocol")]
    EpsilonAboveHalfRate(String),
    #[error("price path: {0}")]
    PricePath(String),
}

/// Protocol clock anchors, in months. Maturity and forfeit are derived from `t_star`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeAnchors {
    /// Contract-creation timeout.
    pub t1: Rational,
    /// Loan start.
    pub t_star: Rational,
    /// End of the arbiter window / start of the lender window.
    pub t2: Rational,
    /// End of the lender window / start of the borrower window.
    pub t3: Rational,
}

impl Default for TimeAnchors {
    fn default() -> Self {
        TimeAnchors {
            t1: int(-1),
            t_star: int(0),
            t2: ratio(49, 4),
            t3: ratio(25, 2),
        }
    }
}

impl TimeAnchors {
    pub fn maturity(&self) -> Rational {
        &self.t_star + int(12)
    }

    pub fn forfeit(&self) -> Rational {
        &self.t_star + int(13)
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        let m = self.maturity();
        if !(self.t2 > m) {
            return Err(ParamsError::Timeline("t2 must be after t*+12".into()));
        }
        if !(self.t3 > self.t2) {
            return Err(ParamsError::Timeline("t3 must be after t2".into()));
        }
        if !(self.t1 < self.t_star) {
            return Err(ParamsError::Timeline("t1 must be before t*".into()));
        }
        if !(self.forfeit() > self.t3) {
            return Err(ParamsError::Timeline("t*+13 must be after t3".into()));
        }
        Ok(())
    }
}

/// All constants a loan instance is run with.
///
/// `epsilon` is a penalty rate per unit of principal: the absolute penalty is
/// `epsilon * principal` (fiat for the flat and oracle protocols, BTC for the oracle-free one).
/// `epsilon_prime`, when set, is an absolute fiat amount.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoanParams {
    pub principal: FiatAmount,
    pub p0: Price,
    pub epsilon: Rational,
    pub epsilon_prime: Option<Rational>,
    pub delta: Rational,
    pub tau: Option<Price>,
    pub q: u32,
    pub k: u32,
    pub timeline: TimeAnchors,
}

impl LoanParams {
    /// Defaults: principal 1M, delta 5, no tau, one query, one chunk, default timeline.
    pub fn new(p0: Price, epsilon: Rational) -> Self {
        LoanParams {
            principal: FiatAmount(Rational::one()),
            p0,
            epsilon,
            epsilon_prime: None,
            delta: int(5),
            tau: None,
            q: 1,
            k: 1,
            timeline: TimeAnchors::default(),
        }
    }

    pub fn with_delta(mut self, delta: Rational) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_tau(mut self, tau: Price) -> Self {
        self.tau = Some(tau);
        self
    }

    pub fn with_queries(mut self, q: u32) -> Self {
        self.q = q;
        self
    }

    pub fn with_epsilon_prime(mut self, e: Rational) -> Self {
        self.epsilon_prime = Some(e);
        self
    }

    pub fn with_principal(mut self, principal: Rational) -> Self {
        self.principal = FiatAmount(principal);
        self
    }

    pub fn principal(&self) -> &Rational {
        &self.principal.0
    }

    /// Collateral in BTC: worth twice the principal at `p0`.
    pub fn y(&self) -> BtcAmount {
        BtcAmount(self.principal.value() * int(2) / self.p0.value())
    }

    /// Absolute penalty `epsilon * principal`.
    pub fn penalty(&self) -> Rational {
        &self.epsilon * self.principal()
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        if !self.principal.0.is_positive() {
            return Err(ParamsError::NonPositivePrincipal);
        }
        if !(self.epsilon.is_positive() && self.epsilon < Rational::one()) {
            return Err(ParamsError::EpsilonOutOfRange(fmt_rational(&self.epsilon)));
        }
        if let Some(e) = &self.epsilon_prime {
            if !e.is_positive() {
                return Err(ParamsError::EpsilonPrimeNonPositive(fmt_rational(e)));
            }
        }
        if !self.delta.is_positive() {
            return Err(ParamsError::NonPositiveDelta(fmt_rational(&self.delta)));
        }
        if let Some(tau) = &self.tau {
            if tau <= &self.p0 {
                return Err(ParamsError::TauNotAboveP0 {
                    tau: tau.to_string(),
                    p0: self.p0.to_string(),
                });
            }
        }
        if self.q == 0 {
            return Err(ParamsError::ZeroQueries);
        }
        if self.k == 0 {
            return Err(ParamsError::ZeroChunks);
        }
        self.timeline.validate()
    }

    /// Extra precondition for the oracle-free protocol's equilibrium result: `epsilon < 1/(2 p0)`.
    pub fn validate_oracle_free(&self) -> Result<(), ParamsError> {
        self.validate()?;
        let ep = &self.epsilon * self.p0.value();
        if ep * int(2) >= Rational::one() {
            return Err(ParamsError::EpsilonAboveHalfRate(fmt_rational(
                &(&self.epsilon * self.p0.value()),
            )));
        }
        Ok(())
    }
}

/// Oracle price samples, strictly increasing in time.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PricePath {
    samples: Vec<(Rational, Price)>,
}

impl PricePath {
    pub fn new(samples: Vec<(Rational, Price)>) -> Result<Self, ParamsError> {
        for w in samples.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(ParamsError::PricePath(format!(
                    "times must be strictly increasing ({} then {})",
                    fmt_rational(&w[0].0),
                    fmt_rational(&w[1].0)
                )));
            }
        }
        Ok(PricePath { samples })
    }

    /// Spreads `prices` evenly over the loan term, the last one at maturity.
    pub fn evenly_spaced(prices: Vec<Price>, timeline: &TimeAnchors) -> Self {
        let n = prices.len() as i64;
        let samples = prices
            .into_iter()
            .enumerate()
            .map(|(i, p)| (&timeline.t_star + ratio(12 * (i as i64 + 1), n), p))
            .collect();
        PricePath { samples }
    }

    /// Spreads `prices` strictly inside the loan term, before maturity (liquidation rounds).
    pub fn before_maturity(prices: Vec<Price>, timeline: &TimeAnchors) -> Self {
        let n = prices.len() as i64;
        let samples = prices
            .into_iter()
            .enumerate()
            .map(|(i, p)| (&timeline.t_star + ratio(12 * (i as i64 + 1), n + 1), p))
            .collect();
        PricePath { samples }
    }

    pub fn samples(&self) -> &[(Rational, Price)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn terminal(&self) -> Option<&Price> {
        self.samples.last().map(|(_, p)| p)
    }

    /// Checks the oracle protocol's requirements: exactly `q` samples inside the loan term,
    /// the last one at maturity.
    pub fn validate_for_oracle(&self, params: &LoanParams) -> Result<(), ParamsError> {
        if self.samples.len() != params.q as usize {
            return Err(ParamsError::PricePath(format!(
                "expected {} samples, got {}",
                params.q,
                self.samples.len()
            )));
        }
        let m = params.timeline.maturity();
        match self.samples.last() {
            Some((t, _)) if *t == m => {}
            _ => return Err(ParamsError::PricePath("last sample must be at maturity".into())),
        }
        if let Some((t, _)) = self.samples.first() {
            if *t <= params.timeline.t_star {
                return Err(ParamsError::PricePath("samples must be after t*".into()));
            }
        }
        Ok(())
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: i64, d: i64) -> Price {
        Price::new(ratio(n, d)).unwrap()
    }

    #[test]
    fn default_timeline_is_valid() {
        let t = TimeAnchors::default();
        t.validate().unwrap();
        assert_eq!(t.maturity(), int(12));
        assert_eq!(t.forfeit(), int(13));
    }

    #[test]
    fn bad_timelines_rejected() {
        let mut t = TimeAnchors::default();
        t.t2 = int(12);
        assert!(t.validate().is_err());
        let mut t = TimeAnchors::default();
        t.t3 = ratio(49, 4);
        assert!(t.validate().is_err());
        let mut t = TimeAnchors::default();
        t.t1 = int(0);
        assert!(t.validate().is_err());
    }

    #[test]
    fn collateral_is_twice_principal() {
        let params = LoanParams::new(p(2, 1), ratio(1, 10));
        assert_eq!(params.y().value(), &int(1));
        assert_eq!(params.y().value() * params.p0.value(), int(2));
        let params = params.with_principal(ratio(1, 4));
        assert_eq!(params.y().value(), &ratio(1, 4));
    }

    #[test]
    fn validation() {
        let base = LoanParams::new(p(2, 1), ratio(1, 10));
        base.validate().unwrap();
        assert!(LoanParams::new(p(2, 1), int(0)).validate().is_err());
        assert!(LoanParams::new(p(2, 1), int(1)).validate().is_err());
        assert!(base.clone().with_tau(p(2, 1)).validate().is_err());
        base.clone().with_tau(p(3, 1)).validate().unwrap();
        assert!(base.clone().with_queries(0).validate().is_err());
        assert!(base.clone().with_delta(int(0)).validate().is_err());
        base.validate_oracle_free().unwrap();
        assert!(LoanParams::new(p(2, 1), ratio(1, 4)).validate_oracle_free().is_err());
    }

    #[test]
    fn price_paths() {
        let t = TimeAnchors::default();
        let path = PricePath::evenly_spaced(vec![p(2, 1), p(3, 1), p(3, 2)], &t);
        assert_eq!(path.samples()[2].0, int(12));
        assert_eq!(path.samples()[0].0, int(4));
        let params = LoanParams::new(p(2, 1), ratio(1, 10)).with_queries(3);
        path.validate_for_oracle(&params).unwrap();
        assert!(path.validate_for_oracle(&params.clone().with_queries(2)).is_err());
        assert!(PricePath::new(vec![(int(1), p(1, 1)), (int(1), p(2, 1))]).is_err());
        let rounds = PricePath::before_maturity(vec![p(2, 1)], &t);
        assert_eq!(rounds.samples()[0].0, int(6));
    }
}
