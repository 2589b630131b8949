//! The event-driven state machine shared by the three protocols.

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::model::{fmt_rational, int, LoanParams, Price, Rational};

use super::state::{LoanEvent, LoanState, Outcome, Party, Phase, Protocol, TimedEvent};
use super::thresholds::{check_early_termination_pi2, check_liquidation_pi2, classify_liquidation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("inadmissible event {event} in phase {phase:?}: {reason}")]
    InadmissibleEvent {
        phase: Phase,
        event: String,
        reason: String,
    },
    #[error("{event} at time {time} is outside its window {window}")]
    WindowViolation {
        event: String,
        time: String,
        window: String,
    },
    #[error("clock cannot go back from {from} to {to}")]
    ClockRegression { from: String, to: String },
    #[error("epsilon' = {eps} must satisfy 0 < epsilon' < {bound}")]
    InvalidEpsilonPrime { eps: String, bound: String },
}

/// A half-open or closed interval of admissible times, used for error reporting.
struct Window {
    from: Rational,
    to: Rational,
    to_open: bool,
    from_open: bool,
}

impl Window {
    fn closed(from: Rational, to: Rational) -> Self {
        Window { from, to, from_open: false, to_open: false }
    }

    fn contains(&self, t: &Rational) -> bool {
        let lo = if self.from_open { t > &self.from } else { t >= &self.from };
        let hi = if self.to_open { t < &self.to } else { t <= &self.to };
        lo && hi
    }

    fn describe(&self) -> String {
        format!(
            "{}{}, {}{}",
            if self.from_open { "(" } else { "[" },
            fmt_rational(&self.from),
            fmt_rational(&self.to),
            if self.to_open { ")" } else { "]" }
        )
    }
}

fn inadmissible(state: &LoanState, ev: &LoanEvent, reason: &str) -> StepError {
    StepError::InadmissibleEvent {
        phase: state.phase,
        event: ev.to_string(),
        reason: reason.to_string(),
    }
}

fn require_window(ev: &TimedEvent, w: Window) -> Result<(), StepError> {
    if w.contains(&ev.time) {
        Ok(())
    } else {
        Err(StepError::WindowViolation {
            event: ev.event.to_string(),
            time: fmt_rational(&ev.time),
            window: w.describe(),
        })
    }
}

/// Repayment-phase windows, shifted when a price spike fast-tracked maturity.
struct Windows {
    maturity: Rational,
    t2: Rational,
    t3: Rational,
    forfeit: Rational,
}

fn windows(state: &LoanState, params: &LoanParams) -> Windows {
    let s = &state.maturity_shift;
    let tl = &params.timeline;
    Windows {
        maturity: tl.maturity() + s,
        t2: &tl.t2 + s,
        t3: &tl.t3 + s,
        forfeit: tl.forfeit() + s,
    }
}

/// Applies one event. Rejected events return an error and leave `state` untouched.
pub fn step(state: &LoanState, ev: &TimedEvent, params: &LoanParams) -> Result<LoanState, StepError> {
    if state.phase.is_terminal() {
        return Err(inadmissible(state, &ev.event, "protocol already terminated"));
    }
    if let Some(c) = &state.clock {
        if ev.time < *c {
            return Err(StepError::ClockRegression {
                from: fmt_rational(c),
                to: fmt_rational(&ev.time),
            });
        }
    }
    let mut s = state.clone();
    s.clock = Some(ev.time.clone());
    match s.phase {
        Phase::AwaitLenderDeposit => await_deposit(&mut s, ev, params)?,
        Phase::AwaitContract => await_contract(&mut s, ev, params)?,
        Phase::Active => active(&mut s, ev, params)?,
        Phase::Repayment => repayment(&mut s, ev, params)?,
        _ => unreachable!("terminal phases rejected above"),
    }
    Ok(s)
}

/// Runs `trace` from the initial state, reporting the index of the first rejected event.
pub fn run_trace(
    protocol: Protocol,
    trace: &[TimedEvent],
    params: &LoanParams,
) -> Result<LoanState, (usize, StepError)> {
    let mut state = LoanState::initial(protocol, params);
    for (i, ev) in trace.iter().enumerate() {
        state = step(&state, ev, params).map_err(|e| (i, e))?;
    }
    Ok(state)
}

fn abort(s: &mut LoanState) {
    if s.arbiter_fiat.is_positive() {
        let refund = std::mem::take(&mut s.arbiter_fiat);
        s.fiat[Party::Lender.index()] += refund;
    }
    if s.contract_created {
        let c = std::mem::take(&mut s.contract_btc);
        s.btc[Party::Borrower.index()] += c;
    }
    s.phase = Phase::Aborted;
    s.outcome = Some(Outcome::NoDeal);
}

fn await_deposit(s: &mut LoanState, ev: &TimedEvent, params: &LoanParams) -> Result<(), StepError> {
    let t1 = &params.timeline.t1;
    match &ev.event {
        LoanEvent::LenderDeposit(a) => {
            if ev.time >= *t1 {
                return Err(StepError::WindowViolation {
                    event: ev.event.to_string(),
                    time: fmt_rational(&ev.time),
                    window: format!("before {}", fmt_rational(t1)),
                });
            }
            if a.value() != params.principal() {
                return Err(inadmissible(s, &ev.event, "deposit must equal the principal"));
            }
            s.fiat[Party::Lender.index()] -= a.value();
            s.arbiter_fiat += a.value();
            s.phase = Phase::AwaitContract;
            Ok(())
        }
        LoanEvent::TimeAdvance => {
            if ev.time >= *t1 {
                abort(s);
            }
            Ok(())
        }
        _ => Err(inadmissible(s, &ev.event, "waiting for the lender's deposit")),
    }
}

fn await_contract(s: &mut LoanState, ev: &TimedEvent, params: &LoanParams) -> Result<(), StepError> {
    let tl = &params.timeline;
    let before_t1 = |ev: &TimedEvent| -> Result<(), StepError> {
        if ev.time < tl.t1 {
            Ok(())
        } else {
            Err(StepError::WindowViolation {
                event: ev.event.to_string(),
                time: fmt_rational(&ev.time),
                window: format!("before {}", fmt_rational(&tl.t1)),
            })
        }
    };
    match &ev.event {
        LoanEvent::CreateContract { correct } => {
            before_t1(ev)?;
            if s.contract_created {
                return Err(inadmissible(s, &ev.event, "contract already created"));
            }
            if *correct {
                let y = params.y().0;
                s.btc[Party::Borrower.index()] -= &y;
                s.contract_btc += y;
                s.contract_created = true;
            } else {
                abort(s);
            }
            Ok(())
        }
        LoanEvent::ArbiterVerdict => {
            before_t1(ev)?;
            if !s.contract_created || s.verified {
                return Err(inadmissible(s, &ev.event, "nothing to verify"));
            }
            s.verified = true;
            Ok(())
        }
        LoanEvent::PrincipalRelease => {
            if !s.verified {
                return Err(inadmissible(s, &ev.event, "contract not verified"));
            }
            if ev.time != tl.t_star {
                return Err(StepError::WindowViolation {
                    event: ev.event.to_string(),
                    time: fmt_rational(&ev.time),
                    window: format!("exactly {}", fmt_rational(&tl.t_star)),
                });
            }
            let p = std::mem::take(&mut s.arbiter_fiat);
            s.fiat[Party::Borrower.index()] += p;
            s.phase = Phase::Active;
            Ok(())
        }
        LoanEvent::TimeAdvance => {
            if s.verified {
                if ev.time > tl.t_star {
                    return Err(inadmissible(s, &ev.event, "principal release pending"));
                }
            } else if ev.time >= tl.t1 {
                abort(s);
            }
            Ok(())
        }
        _ => Err(inadmissible(s, &ev.event, "contract not yet active")),
    }
}

fn enter_repayment(s: &mut LoanState, ev: &LoanEvent, params: &LoanParams) -> Result<(), StepError> {
    if s.protocol == Protocol::P2 && s.queries < params.q {
        return Err(inadmissible(
            s,
            ev,
            &format!("{} of {} oracle queries still outstanding", params.q - s.queries, params.q),
        ));
    }
    s.phase = Phase::Repayment;
    Ok(())
}

fn active(s: &mut LoanState, ev: &TimedEvent, params: &LoanParams) -> Result<(), StepError> {
    let tl = &params.timeline;
    let m = tl.maturity();
    let term = Window { from: tl.t_star.clone(), to: m.clone(), from_open: true, to_open: false };
    match &ev.event {
        LoanEvent::OracleQuery(p) => match s.protocol {
            Protocol::P1 => Err(inadmissible(s, &ev.event, "no price feed under P1")),
            Protocol::P2 => {
                require_window(ev, term)?;
                if s.queries >= params.q {
                    return Err(inadmissible(s, &ev.event, "all oracle queries already made"));
                }
                oracle_query(s, ev, p, params)
            }
            Protocol::P3 => {
                require_window(ev, term)?;
                s.market_price = p.clone();
                Ok(())
            }
        },
        LoanEvent::LiquidateByLender(p) | LoanEvent::TerminateByBorrower(p) => {
            if s.protocol != Protocol::P3 {
                return Err(inadmissible(s, &ev.event, "early opening exists only under P3"));
            }
            require_window(ev, Window { from: tl.t_star.clone(), to: m, from_open: false, to_open: true })?;
            let party = match ev.event {
                LoanEvent::LiquidateByLender(_) => Party::Lender,
                _ => Party::Borrower,
            };
            early_open(s, party, p, params);
            Ok(())
        }
        LoanEvent::Repay(_) | LoanEvent::LenderOpen | LoanEvent::BorrowerOpen | LoanEvent::ForfeitTimeout => {
            if ev.time < m {
                return Err(StepError::WindowViolation {
                    event: ev.event.to_string(),
                    time: fmt_rational(&ev.time),
                    window: format!("not before maturity {}", fmt_rational(&m)),
                });
            }
            enter_repayment(s, &ev.event, params)?;
            repayment(s, ev, params)
        }
        LoanEvent::TimeAdvance => {
            if ev.time >= m {
                enter_repayment(s, &ev.event, params)?;
                return repayment(s, ev, params);
            }
            Ok(())
        }
        _ => Err(inadmissible(s, &ev.event, "loan already running")),
    }
}

fn oracle_query(s: &mut LoanState, ev: &TimedEvent, p: &Price, params: &LoanParams) -> Result<(), StepError> {
    s.queries += 1;
    s.market_price = p.clone();
    if check_liquidation_pi2(p, params) {
        let t = std::mem::take(&mut s.temp_account_btc);
        s.contract_btc += t;
        let c = std::mem::take(&mut s.contract_btc);
        s.btc[Party::Lender.index()] += c;
        s.baseline_price = p.clone();
        s.phase = Phase::Liquidated;
        s.outcome = Some(Outcome::LenderLiquidation { price: p.clone() });
        return Ok(());
    }
    redistribute_in_place(s, p, params);
    let spiked = params.tau.is_some()
        && check_early_termination_pi2(p, params).map_err(|e| inadmissible(s, &ev.event, &e.to_string()))?;
    let m = params.timeline.maturity();
    if spiked {
        s.maturity_shift = &ev.time - &m;
        s.phase = Phase::Repayment;
    } else if ev.time == m {
        enter_repayment(s, &ev.event, params)?;
    }
    Ok(())
}

fn redistribute_in_place(s: &mut LoanState, p: &Price, params: &LoanParams) {
    let cap = params.principal() * int(2);
    let value = &s.contract_btc * p.value();
    if value > cap {
        let excess = (value - &cap) / p.value();
        s.contract_btc -= &excess;
        s.temp_account_btc += excess;
    } else if value < cap {
        let need = (&cap - value) / p.value();
        let moved = if need <= s.temp_account_btc { need } else { s.temp_account_btc.clone() };
        s.temp_account_btc -= &moved;
        s.contract_btc += moved;
    }
}

/// Caps the P2 contract at 2x principal in value at price `p`, using the temporary account as
/// overflow.
pub fn redistribute(state: &LoanState, p: &Price, params: &LoanParams) -> Result<LoanState, StepError> {
    let ev = LoanEvent::OracleQuery(p.clone());
    if state.protocol != Protocol::P2 {
        return Err(inadmissible(state, &ev, "redistribution exists only under P2"));
    }
    if state.phase != Phase::Active {
        return Err(inadmissible(state, &ev, "loan not active"));
    }
    let mut s = state.clone();
    redistribute_in_place(&mut s, p, params);
    Ok(s)
}

fn move_btc(s: &mut LoanState, from: Party, to: Party, amount: &Rational) {
    s.btc[from.index()] -= amount;
    s.btc[to.index()] += amount;
}

/// Splits the contract (y/2 - e, y/2 - e, 2e) in BTC between borrower, lender and arbiter.
fn split_contract_btc(s: &mut LoanState, params: &LoanParams) -> Rational {
    let e = params.penalty();
    let half = params.y().0 / int(2) - &e;
    s.contract_btc -= params.y().0;
    s.btc[Party::Borrower.index()] += &half;
    s.btc[Party::Lender.index()] += &half;
    s.btc[Party::Arbiter.index()] += &e * int(2);
    e
}

fn early_open(s: &mut LoanState, party: Party, p: &Price, params: &LoanParams) {
    s.market_price = p.clone();
    let e = split_contract_btc(s, params);
    let reasonable = classify_liquidation(party, p, params).unwrap_or(false);
    match (party, reasonable) {
        (Party::Lender, true) => {
            move_btc(s, Party::Arbiter, Party::Lender, &(&e * int(2)));
        }
        (Party::Borrower, true) => {
            move_btc(s, Party::Arbiter, Party::Borrower, &e);
            move_btc(s, Party::Arbiter, Party::Lender, &e);
        }
        (Party::Lender, false) => move_btc(s, Party::Arbiter, Party::Borrower, &e),
        _ => move_btc(s, Party::Arbiter, Party::Lender, &e),
    }
    if party == Party::Lender {
        s.phase = Phase::Liquidated;
        s.outcome = Some(Outcome::LenderLiquidationEarly { reasonable });
    } else {
        s.phase = Phase::Terminated;
        s.outcome = Some(Outcome::BorrowerTermination { reasonable });
    }
}

fn release_temp(s: &mut LoanState, params: &LoanParams) {
    let to = if &s.repaid == params.principal() { Party::Borrower } else { Party::Arbiter };
    let t = std::mem::take(&mut s.temp_account_btc);
    s.btc[to.index()] += t;
}

fn forfeit(s: &mut LoanState, params: &LoanParams) {
    let c = std::mem::take(&mut s.contract_btc);
    s.btc[Party::Lender.index()] += c;
    release_temp(s, params);
    let kept = std::mem::take(&mut s.arbiter_fiat);
    s.fiat[Party::Arbiter.index()] += kept;
    s.phase = Phase::Forfeited;
    s.outcome = Some(Outcome::Forfeit { repaid: s.repaid.clone() });
}

fn repayment(s: &mut LoanState, ev: &TimedEvent, params: &LoanParams) -> Result<(), StepError> {
    let w = windows(s, params);
    let principal = params.principal().clone();
    match &ev.event {
        LoanEvent::Repay(x) => {
            require_window(ev, Window::closed(w.maturity, w.t2))?;
            let x = x.value();
            if x.is_negative() || &s.repaid + x > principal {
                return Err(inadmissible(s, &ev.event, "repayments must be non-negative and total at most the principal"));
            }
            s.fiat[Party::Borrower.index()] -= x;
            s.arbiter_fiat += x;
            s.repaid += x;
            Ok(())
        }
        LoanEvent::LenderOpen => {
            require_window(ev, Window::closed(w.t2, w.t3))?;
            let c = std::mem::take(&mut s.contract_btc);
            s.btc[Party::Borrower.index()] += c;
            release_temp(s, params);
            let x = std::mem::take(&mut s.arbiter_fiat);
            s.fiat[Party::Lender.index()] += x;
            s.phase = Phase::Settled;
            s.outcome = Some(if s.repaid == principal {
                Outcome::HonestClose
            } else {
                Outcome::LenderReleasedUnpaid { repaid: s.repaid.clone() }
            });
            Ok(())
        }
        LoanEvent::BorrowerOpen => {
            require_window(ev, Window { from: w.t3, to: w.forfeit, from_open: false, to_open: true })?;
            borrower_open(s, params)
        }
        LoanEvent::TimeAdvance => {
            if ev.time >= w.forfeit {
                forfeit(s, params);
            }
            Ok(())
        }
        LoanEvent::ForfeitTimeout => {
            if ev.time < w.forfeit {
                return Err(StepError::WindowViolation {
                    event: ev.event.to_string(),
                    time: fmt_rational(&ev.time),
                    window: format!("from {}", fmt_rational(&w.forfeit)),
                });
            }
            forfeit(s, params);
            Ok(())
        }
        _ => Err(inadmissible(s, &ev.event, "loan in repayment")),
    }
}

fn borrower_open(s: &mut LoanState, params: &LoanParams) -> Result<(), StepError> {
    let principal = params.principal().clone();
    let full = s.repaid == principal;
    let x = s.repaid.clone();
    if s.protocol == Protocol::P3 {
        let e = split_contract_btc(s, params);
        let escrow = std::mem::take(&mut s.arbiter_fiat);
        if full {
            s.fiat[Party::Borrower.index()] += escrow;
            move_btc(s, Party::Arbiter, Party::Borrower, &e);
            s.outcome = Some(Outcome::LenderWithheld);
        } else {
            s.fiat[Party::Lender.index()] += escrow;
            move_btc(s, Party::Arbiter, Party::Lender, &e);
            s.outcome = Some(Outcome::BorrowerDefaulted { repaid: x });
        }
        s.phase = Phase::Settled;
        return Ok(());
    }
    let pt = s.market_price.value().clone();
    let v = &s.contract_btc * &pt;
    let flat = v == &principal * int(2);
    let e = if flat {
        params.penalty()
    } else {
        let e = default_epsilon_prime(params, &v);
        let bound = &v - &principal;
        if !(e.is_positive() && e < bound) {
            return Err(StepError::InvalidEpsilonPrime { eps: fmt_rational(&e), bound: fmt_rational(&bound) });
        }
        e
    };
    let to_b = (&v - &principal - &e) / &pt;
    let to_l = (&principal - &e) / &pt;
    let to_a = &e * int(2) / &pt;
    let e_btc = &e / &pt;
    s.contract_btc = Rational::zero();
    s.btc[Party::Borrower.index()] += to_b;
    s.btc[Party::Lender.index()] += to_l;
    s.btc[Party::Arbiter.index()] += to_a;
    release_temp(s, params);
    let escrow = std::mem::take(&mut s.arbiter_fiat);
    if full {
        s.fiat[Party::Borrower.index()] += escrow;
        move_btc(s, Party::Arbiter, Party::Borrower, &e_btc);
        s.outcome = Some(Outcome::LenderWithheld);
    } else {
        if flat {
            s.fiat[Party::Arbiter.index()] += escrow;
        } else {
            s.fiat[Party::Lender.index()] += escrow;
        }
        move_btc(s, Party::Arbiter, Party::Lender, &e_btc);
        s.outcome = Some(Outcome::BorrowerDefaulted { repaid: x });
    }
    s.phase = Phase::Settled;
    Ok(())
}

/// The configured epsilon', or `min(epsilon * principal, (v - principal) / 2)` for contract value `v`.
pub fn default_epsilon_prime(params: &LoanParams, v: &Rational) -> Rational {
    if let Some(e) = &params.epsilon_prime {
        return e.clone();
    }
    let half_gap = (v - params.principal()) / int(2);
    let pen = params.penalty();
    if pen <= half_gap {
        pen
    } else {
        half_gap
    }
}
