//! Event-driven state machines for the flat-rate (P1), oracle (P2) and oracle-free (P3) loans.

pub mod chunk;
pub mod machine;
pub mod settle;
pub mod state;
pub mod thresholds;
pub mod trace;

pub use chunk::{chunk_principal, scale_trace};
pub use machine::{default_epsilon_prime, redistribute, run_trace, step, StepError};
pub use settle::{settle, settle_pi1, settle_pi2, settle_pi3, SettleError, Settlement};
pub use state::{LoanEvent, LoanState, Outcome, Party, Phase, Protocol, TimedEvent};
pub use thresholds::{
    check_early_termination_pi2, check_liquidation_pi2, classify, classify_liquidation, rho_b, rho_l,
    Reasonableness, ThresholdError,
};
pub use trace::{format_trace, parse_trace, TraceBuilder, TraceParseError};
