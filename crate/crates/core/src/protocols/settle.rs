//! Terminal payoffs of complete traces.

use thiserror::Error;

use crate::model::{fmt_rational, LoanParams, ParamsError, Price, PricePath, Rational};

use super::machine::{run_trace, StepError};
use super::state::{LoanEvent, LoanState, Outcome, Party, Phase, Protocol, TimedEvent};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SettleError {
    #[error("event {index} ({event}): {source}")]
    Step {
        index: usize,
        event: String,
        #[source]
        source: StepError,
    },
    #[error("trace ends in non-terminal phase {0:?}")]
    IncompleteTrace(Phase),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("oracle query {index} reports {got} but the price path has {expected}")]
    PathMismatch {
        index: usize,
        got: String,
        expected: String,
    },
}

/// Result of a complete run. Indexed by [`Party::index`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settlement {
    pub protocol: Protocol,
    pub outcome: Outcome,
    /// Price used to convert BTC to fiat at the end.
    pub terminal_price: Price,
    /// Price at which the borrower's initial collateral is valued.
    pub baseline_price: Price,
    /// Net fiat and BTC positions relative to the initial endowments.
    pub fiat: [Rational; 3],
    pub btc: [Rational; 3],
    /// Terminal wealth in fiat (lender starts with the principal, borrower with `y` BTC).
    pub gross: [Rational; 3],
    /// Terminal wealth minus the initial endowment valued at the baseline price.
    pub utilities: [Rational; 3],
}

impl Settlement {
    pub fn from_state(state: &LoanState, params: &LoanParams) -> Result<Self, SettleError> {
        let outcome = match (&state.outcome, state.phase.is_terminal()) {
            (Some(o), true) => o.clone(),
            _ => return Err(SettleError::IncompleteTrace(state.phase)),
        };
        let pt = state.market_price.value();
        let y = params.y().0;
        let principal = params.principal();
        let worth = |p: Party| &state.fiat[p.index()] + &state.btc[p.index()] * pt;
        let gross = [
            principal + worth(Party::Lender),
            &y * pt + worth(Party::Borrower),
            worth(Party::Arbiter),
        ];
        let utilities = [
            &gross[0] - principal,
            &gross[1] - &y * state.baseline_price.value(),
            gross[2].clone(),
        ];
        Ok(Settlement {
            protocol: state.protocol,
            outcome,
            terminal_price: state.market_price.clone(),
            baseline_price: state.baseline_price.clone(),
            fiat: state.fiat.clone(),
            btc: state.btc.clone(),
            gross,
            utilities,
        })
    }

    pub fn utility(&self, p: Party) -> &Rational {
        &self.utilities[p.index()]
    }

    pub fn gross_of(&self, p: Party) -> &Rational {
        &self.gross[p.index()]
    }

    /// Conservation: utilities add up to the collateral's change in value between the baseline
    /// and terminal prices.
    pub fn conserves_value(&self, params: &LoanParams) -> bool {
        let total: Rational = self.utilities.iter().sum();
        let y = params.y().0;
        total == y * (self.terminal_price.value() - self.baseline_price.value())
    }

    /// `(lender, borrower)` utilities as used at game leaves; a failed deal costs both `delta`.
    pub fn game_utilities(&self, params: &LoanParams) -> (Rational, Rational) {
        if self.outcome == Outcome::NoDeal {
            (-params.delta.clone(), -params.delta.clone())
        } else {
            (self.utilities[0].clone(), self.utilities[1].clone())
        }
    }
}

fn settle_trace(protocol: Protocol, trace: &[TimedEvent], params: &LoanParams) -> Result<Settlement, SettleError> {
    params.validate()?;
    let state = run_trace(protocol, trace, params).map_err(|(index, source)| SettleError::Step {
        index,
        event: trace[index].to_string(),
        source,
    })?;
    Settlement::from_state(&state, params)
}

pub fn settle_pi1(trace: &[TimedEvent], params: &LoanParams) -> Result<Settlement, SettleError> {
    settle_trace(Protocol::P1, trace, params)
}

/// Oracle protocol. Every `OracleQuery` in `trace` must agree with `path` in time and price.
pub fn settle_pi2(trace: &[TimedEvent], path: &PricePath, params: &LoanParams) -> Result<Settlement, SettleError> {
    let queries = trace.iter().filter_map(|ev| match &ev.event {
        LoanEvent::OracleQuery(p) => Some((&ev.time, p)),
        _ => None,
    });
    for (i, ((t, p), (st, sp))) in queries.zip(path.samples()).enumerate() {
        if t != st || p != sp {
            return Err(SettleError::PathMismatch {
                index: i,
                got: format!("{p} at {}", fmt_rational(t)),
                expected: format!("{sp} at {}", fmt_rational(st)),
            });
        }
    }
    settle_trace(Protocol::P2, trace, params)
}

pub fn settle_pi3(trace: &[TimedEvent], params: &LoanParams) -> Result<Settlement, SettleError> {
    settle_trace(Protocol::P3, trace, params)
}

pub fn settle(protocol: Protocol, trace: &[TimedEvent], params: &LoanParams) -> Result<Settlement, SettleError> {
    settle_trace(protocol, trace, params)
}
