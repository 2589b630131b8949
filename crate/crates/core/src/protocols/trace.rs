//! Line-oriented trace format (`TIME EVENT [ARGS]`, `#` comments) and a builder for the usual
//! event sequences.

use thiserror::Error;

use crate::model::{int, parse_rational, ratio, FiatAmount, LoanParams, Price, Rational};

use super::state::{LoanEvent, TimedEvent};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

pub fn format_trace(trace: &[TimedEvent]) -> String {
    trace.iter().map(|e| format!("{e}\n")).collect()
}

pub fn parse_trace(text: &str) -> Result<Vec<TimedEvent>, TraceParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(line, i + 1)?);
    }
    Ok(out)
}

fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut v = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                v.push((s, &line[s..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        v.push((s, &line[s..]));
    }
    v
}

fn parse_line(line: &str, lineno: usize) -> Result<TimedEvent, TraceParseError> {
    let err = |col: usize, msg: String| TraceParseError { line: lineno, column: col + 1, message: msg };
    let toks = tokens(line);
    let (tc, tt) = toks[0];
    let time = parse_rational(tt).map_err(|e| err(tc, e.to_string()))?;
    let (nc, name) = *toks.get(1).ok_or_else(|| err(line.len(), "missing event name".into()))?;
    let args = &toks[2..];
    let want = |n: usize| -> Result<(), TraceParseError> {
        if args.len() == n {
            Ok(())
        } else {
            let col = args.get(n).map(|a| a.0).unwrap_or(line.len());
            Err(err(col, format!("{name} takes {n} argument(s), got {}", args.len())))
        }
    };
    let rat = |k: usize| -> Result<Rational, TraceParseError> {
        let (c, t) = args[k];
        parse_rational(t).map_err(|e| err(c, e.to_string()))
    };
    let price = |k: usize| -> Result<Price, TraceParseError> {
        let r = rat(k)?;
        Price::new(r).map_err(|e| err(args[k].0, e.to_string()))
    };
    let event = match name {
        "LenderDeposit" => {
            want(1)?;
            LoanEvent::LenderDeposit(FiatAmount(rat(0)?))
        }
        "CreateContract" => {
            want(1)?;
            let correct = match args[0].1 {
                "true" => true,
                "false" => false,
                other => return Err(err(args[0].0, format!("expected true or false, got `{other}`"))),
            };
            LoanEvent::CreateContract { correct }
        }
        "ArbiterVerdict" => {
            want(0)?;
            LoanEvent::ArbiterVerdict
        }
        "PrincipalRelease" => {
            want(0)?;
            LoanEvent::PrincipalRelease
        }
        "OracleQuery" => {
            want(1)?;
            LoanEvent::OracleQuery(price(0)?)
        }
        "Repay" => {
            want(1)?;
            LoanEvent::Repay(FiatAmount(rat(0)?))
        }
        "LenderOpen" => {
            want(0)?;
            LoanEvent::LenderOpen
        }
        "BorrowerOpen" => {
            want(0)?;
            LoanEvent::BorrowerOpen
        }
        "LiquidateByLender" => {
            want(1)?;
            LoanEvent::LiquidateByLender(price(0)?)
        }
        "TerminateByBorrower" => {
            want(1)?;
            LoanEvent::TerminateByBorrower(price(0)?)
        }
        "TimeAdvance" => {
            want(0)?;
            LoanEvent::TimeAdvance
        }
        "ForfeitTimeout" => {
            want(0)?;
            LoanEvent::ForfeitTimeout
        }
        other => return Err(err(nc, format!("unknown event `{other}`"))),
    };
    Ok(TimedEvent::new(time, event))
}

/// Builds traces with the canonical event times: setup before `t1`, release at `t*`, repayment
/// at maturity, lender opening at `t2`, borrower opening at `t3`, forfeit at `t*+13`. All
/// post-maturity times move with the fast-track shift.
#[derive(Debug, Clone)]
pub struct TraceBuilder {
    params: LoanParams,
    events: Vec<TimedEvent>,
    shift: Rational,
}

impl TraceBuilder {
    pub fn new(params: &LoanParams) -> Self {
        TraceBuilder { params: params.clone(), events: Vec::new(), shift: int(0) }
    }

    fn push(mut self, time: Rational, event: LoanEvent) -> Self {
        self.events.push(TimedEvent::new(time, event));
        self
    }

    fn setup_time(&self, quarter: i64) -> Rational {
        &self.params.timeline.t1 - ratio(quarter, 4)
    }

    pub fn deposit(self) -> Self {
        let t = self.setup_time(4);
        let p = self.params.principal.clone();
        self.push(t, LoanEvent::LenderDeposit(p))
    }

    pub fn create_contract(self, correct: bool) -> Self {
        let t = self.setup_time(2);
        self.push(t, LoanEvent::CreateContract { correct })
    }

    pub fn verdict(self) -> Self {
        let t = self.setup_time(1);
        self.push(t, LoanEvent::ArbiterVerdict)
    }

    pub fn release(self) -> Self {
        let t = self.params.timeline.t_star.clone();
        self.push(t, LoanEvent::PrincipalRelease)
    }

    /// Deposit, correct contract, verdict and principal release.
    pub fn opened(self) -> Self {
        self.deposit().create_contract(true).verdict().release()
    }

    /// Lets the creation deadline pass without a contract.
    pub fn timeout_at_t1(self) -> Self {
        let t = self.params.timeline.t1.clone();
        self.push(t, LoanEvent::TimeAdvance)
    }

    pub fn query(self, time: Rational, p: Price) -> Self {
        self.push(time, LoanEvent::OracleQuery(p))
    }

    /// A query that fast-tracks maturity to `time`.
    pub fn spike(mut self, time: Rational, p: Price) -> Self {
        self.shift = &time - self.params.timeline.maturity();
        self.query(time, p)
    }

    pub fn liquidate(self, time: Rational, p: Price) -> Self {
        self.push(time, LoanEvent::LiquidateByLender(p))
    }

    pub fn terminate(self, time: Rational, p: Price) -> Self {
        self.push(time, LoanEvent::TerminateByBorrower(p))
    }

    pub fn repay(self, x: Rational) -> Self {
        let t = self.params.timeline.maturity() + &self.shift;
        self.push(t, LoanEvent::Repay(FiatAmount(x)))
    }

    pub fn lender_open(self) -> Self {
        let t = &self.params.timeline.t2 + &self.shift;
        self.push(t, LoanEvent::LenderOpen)
    }

    pub fn borrower_open(self) -> Self {
        let t = &self.params.timeline.t3 + &self.shift;
        self.push(t, LoanEvent::BorrowerOpen)
    }

    pub fn forfeit(self) -> Self {
        let t = self.params.timeline.forfeit() + &self.shift;
        self.push(t, LoanEvent::ForfeitTimeout)
    }

    pub fn build(self) -> Vec<TimedEvent> {
        self.events
    }
}
