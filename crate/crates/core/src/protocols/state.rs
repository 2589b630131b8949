use std::fmt;

use num_traits::Zero;

use crate::model::{fmt_rational, FiatAmount, LoanParams, Price, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    /// Flat exchange rate.
    P1,
    /// Price oracle with collateral redistribution.
    P2,
    /// No oracle; either side may liquidate or terminate at any time.
    P3,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::P1 => "P1",
            Protocol::P2 => "P2",
            Protocol::P3 => "P3",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Party {
    Lender,
    Borrower,
    Arbiter,
}

impl Party {
    pub const ALL: [Party; 3] = [Party::Lender, Party::Borrower, Party::Arbiter];

    pub fn index(self) -> usize {
        match self {
            Party::Lender => 0,
            Party::Borrower => 1,
            Party::Arbiter => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Party::Lender => "lender",
            Party::Borrower => "borrower",
            Party::Arbiter => "arbiter",
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    AwaitLenderDeposit,
    AwaitContract,
    Active,
    Repayment,
    Settled,
    Forfeited,
    Liquidated,
    Terminated,
    Aborted,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            Phase::Settled | Phase::Forfeited | Phase::Liquidated | Phase::Terminated | Phase::Aborted
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LoanEvent {
    LenderDeposit(FiatAmount),
    CreateContract { correct: bool },
    ArbiterVerdict,
    PrincipalRelease,
    /// A price observation: the contract's oracle query under P2, the arbiter's own feed under P3.
    OracleQuery(Price),
    /// Repayment of `x`; doing nothing is written as `Repay(0)`.
    Repay(FiatAmount),
    LenderOpen,
    BorrowerOpen,
    LiquidateByLender(Price),
    TerminateByBorrower(Price),
    /// Moves the clock to the event time, firing any timeout that falls due.
    TimeAdvance,
    ForfeitTimeout,
}

impl LoanEvent {
    pub fn name(&self) -> &'static str {
        match self {
            LoanEvent::LenderDeposit(_) => "LenderDeposit",
            LoanEvent::CreateContract { .. } => "CreateContract",
            LoanEvent::ArbiterVerdict => "ArbiterVerdict",
            LoanEvent::PrincipalRelease => "PrincipalRelease",
            LoanEvent::OracleQuery(_) => "OracleQuery",
            LoanEvent::Repay(_) => "Repay",
            LoanEvent::LenderOpen => "LenderOpen",
            LoanEvent::BorrowerOpen => "BorrowerOpen",
            LoanEvent::LiquidateByLender(_) => "LiquidateByLender",
            LoanEvent::TerminateByBorrower(_) => "TerminateByBorrower",
            LoanEvent::TimeAdvance => "TimeAdvance",
            LoanEvent::ForfeitTimeout => "ForfeitTimeout",
        }
    }
}

impl fmt::Display for LoanEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())?;
        match self {
            LoanEvent::LenderDeposit(a) | LoanEvent::Repay(a) => {
                write!(f, " {}", fmt_rational(a.value()))
            }
            LoanEvent::CreateContract { correct } => write!(f, " {correct}"),
            LoanEvent::OracleQuery(p)
            | LoanEvent::LiquidateByLender(p)
            | LoanEvent::TerminateByBorrower(p) => write!(f, " {p}"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TimedEvent {
    pub time: Rational,
    pub event: LoanEvent,
}

impl TimedEvent {
    pub fn new(time: Rational, event: LoanEvent) -> Self {
        TimedEvent { time, event }
    }
}

impl fmt::Display for TimedEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", fmt_rational(&self.time), self.event)
    }
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// Full repayment and the lender released the collateral.
    HonestClose,
    /// The lender released the collateral although only `repaid` came back.
    LenderReleasedUnpaid { repaid: Rational },
    /// Full repayment, the lender stayed idle and the borrower opened.
    LenderWithheld,
    /// Partial repayment `repaid` and the borrower opened.
    BorrowerDefaulted { repaid: Rational },
    /// Nobody opened before the forfeit time.
    Forfeit { repaid: Rational },
    /// The oracle price fell below the liquidation threshold.
    LenderLiquidation { price: Price },
    BorrowerTermination { reasonable: bool },
    LenderLiquidationEarly { reasonable: bool },
    NoDeal,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::HonestClose => f.write_str("HonestClose"),
            Outcome::LenderReleasedUnpaid { repaid } => {
                write!(f, "LenderReleasedUnpaid({})", fmt_rational(repaid))
            }
            Outcome::LenderWithheld => f.write_str("LenderWithheld"),
            Outcome::BorrowerDefaulted { repaid } => {
                write!(f, "BorrowerDefaulted({})", fmt_rational(repaid))
            }
            Outcome::Forfeit { repaid } => write!(f, "Forfeit({})", fmt_rational(repaid)),
            Outcome::LenderLiquidation { price } => write!(f, "LenderLiquidation({price})"),
            Outcome::BorrowerTermination { reasonable } => {
                write!(f, "BorrowerTermination({})", reasonableness(*reasonable))
            }
            Outcome::LenderLiquidationEarly { reasonable } => {
                write!(f, "LenderLiquidationEarly({})", reasonableness(*reasonable))
            }
            Outcome::NoDeal => f.write_str("NoDeal"),
        }
    }
}

fn reasonableness(r: bool) -> &'static str {
    if r {
        "reasonable"
    } else {
        "unreasonable"
    }
}

/// Full protocol state. Party positions are net changes relative to the initial endowments
/// (lender: `principal` fiat, borrower: `y` BTC).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoanState {
    pub protocol: Protocol,
    pub phase: Phase,
    pub clock: Option<Rational>,
    /// Fiat held by the arbiter in escrow (deposit, repayments).
    pub arbiter_fiat: Rational,
    pub contract_btc: Rational,
    pub temp_account_btc: Rational,
    pub repaid: Rational,
    pub fiat: [Rational; 3],
    pub btc: [Rational; 3],
    pub contract_created: bool,
    pub verified: bool,
    pub queries: u32,
    /// Last observed price; `p0` until the first observation.
    pub market_price: Price,
    /// Price at which the borrower's initial collateral is valued when computing utilities.
    pub baseline_price: Price,
    /// Offset applied to the repayment windows after an early-termination fast track.
    pub maturity_shift: Rational,
    pub outcome: Option<Outcome>,
}

impl LoanState {
    pub fn initial(protocol: Protocol, params: &LoanParams) -> Self {
        LoanState {
            protocol,
            phase: Phase::AwaitLenderDeposit,
            clock: None,
            arbiter_fiat: Rational::zero(),
            contract_btc: Rational::zero(),
            temp_account_btc: Rational::zero(),
            repaid: Rational::zero(),
            fiat: Default::default(),
            btc: Default::default(),
            contract_created: false,
            verified: false,
            queries: 0,
            market_price: params.p0.clone(),
            baseline_price: params.p0.clone(),
            maturity_shift: Rational::zero(),
            outcome: None,
        }
    }

    pub fn fiat_of(&self, party: Party) -> &Rational {
        &self.fiat[party.index()]
    }

    pub fn btc_of(&self, party: Party) -> &Rational {
        &self.btc[party.index()]
    }

    /// Sum of fiat positions plus escrow; zero in every reachable state.
    pub fn fiat_total(&self) -> Rational {
        self.fiat.iter().fold(self.arbiter_fiat.clone(), |acc, x| acc + x)
    }

    /// Sum of BTC positions plus contract and temporary account; zero in every reachable state.
    pub fn btc_total(&self) -> Rational {
        self.btc
            .iter()
            .fold(&self.contract_btc + &self.temp_account_btc, |acc, x| acc + x)
    }
}
