use crate::model::{int, LoanParams, ParamsError};

use super::state::{LoanEvent, TimedEvent};
use crate::model::FiatAmount;

/// Splits a loan into `k` equal sub-loans. Each has principal `P/k`; since the penalty rate
/// `epsilon` is per unit of principal, absolute penalties scale by `1/k` too.
pub fn chunk_principal(params: &LoanParams, k: u32) -> Result<Vec<LoanParams>, ParamsError> {
    if k == 0 {
        return Err(ParamsError::ZeroChunks);
    }
    let kk = int(k as i64);
    let mut sub = params.clone();
    sub.principal = FiatAmount(params.principal() / &kk);
    sub.epsilon_prime = params.epsilon_prime.as_ref().map(|e| e / &kk);
    sub.k = 1;
    Ok(vec![sub; k as usize])
}

/// The same trace with every fiat amount divided by `k`, for running against a chunk.
pub fn scale_trace(trace: &[TimedEvent], k: u32) -> Vec<TimedEvent> {
    let kk = int(k as i64);
    trace
        .iter()
        .map(|ev| {
            let event = match &ev.event {
                LoanEvent::LenderDeposit(a) => LoanEvent::LenderDeposit(FiatAmount(a.value() / &kk)),
                LoanEvent::Repay(a) => LoanEvent::Repay(FiatAmount(a.value() / &kk)),
                other => other.clone(),
            };
            TimedEvent::new(ev.time.clone(), event)
        })
        .collect()
}
