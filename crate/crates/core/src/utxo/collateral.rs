use num_traits::Zero;
use thiserror::Error;

use crate::model::{fmt_rational, int, BtcAmount, LoanParams, Price, Rational};
use crate::protocols::{settle_pi1, Outcome, Party, SettleError, TimedEvent};

use super::condition::{Condition, Witness};
use super::ledger::{apply_tx, Branch, OutPoint, Output, Transaction, UtxoError, UtxoSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChunkError {
    #[error("need at least 2 chunks, got {0}")]
    TooFewChunks(usize),
    #[error("collateral must be positive")]
    NonPositive,
    #[error("chunks differ in value ({0} vs {1})")]
    NonUniform(String, String),
}

#[derive(Debug, Error)]
pub enum RealizeError {
    #[error(transparent)]
    Settle(#[from] SettleError),
    #[error(transparent)]
    Utxo(#[from] UtxoError),
}

/// The borrower's funding output of `y` BTC, before it is locked.
pub fn funding_set(params: &LoanParams) -> (UtxoSet, OutPoint) {
    let (set, tx) = UtxoSet::genesis(vec![Output::wallet(Party::Borrower, params.y().0)]);
    (set, tx.outpoint(0))
}

/// Locks the funding output into three outputs worth `(1-e)P`, `(1-e)P` and `2eP` at `p0`.
/// Each can be released by the lender to the borrower, opened by the borrower from `t3`
/// (routing to borrower, lender and arbiter respectively), or taken by the lender after the
/// forfeit time. Zero-valued outputs (when `e = 0`) are left out.
pub fn build_pi1_collateral_tx(params: &LoanParams) -> Transaction {
    let (_, funding) = funding_set(params);
    let p0 = params.p0.value();
    let side = (Rational::from_integer(1.into()) - &params.epsilon) * params.principal() / p0;
    let arb = params.penalty() * int(2) / p0;
    let t3 = params.timeline.t3.clone();
    let forfeit = params.timeline.forfeit();
    let outputs = [(side.clone(), Party::Borrower), (side, Party::Lender), (arb, Party::Arbiter)]
        .into_iter()
        .filter(|(v, _)| !v.is_zero())
        .map(|(value, opened_to)| Output {
            value: BtcAmount(value),
            branches: vec![
                Branch { condition: Condition::All(vec![Condition::RequireSig(Party::Lender)]), recipient: Party::Borrower },
                Branch {
                    condition: Condition::All(vec![Condition::RequireSig(Party::Borrower), Condition::After(t3.clone())]),
                    recipient: opened_to,
                },
                Branch { condition: Condition::After(forfeit.clone()), recipient: Party::Lender },
            ],
        })
        .collect();
    Transaction { inputs: vec![funding], outputs }
}

/// A transaction paying each input to whoever `w` entitles to it.
fn claim_all(set: &UtxoSet, inputs: &[OutPoint], w: &Witness) -> Option<Transaction> {
    let mut outputs = Vec::new();
    for op in inputs {
        let out = set.get(op)?;
        outputs.push(Output::wallet(out.claimant(w)?, out.value.value().clone()));
    }
    Some(Transaction { inputs: inputs.to_vec(), outputs })
}

/// Time windows and witness sets probed by the spend matrix.
fn matrix_columns(params: &LoanParams) -> Vec<(String, Witness)> {
    let tl = &params.timeline;
    let windows = [
        ("t*..t3", tl.t_star.clone()),
        ("t3..t*+13", tl.t3.clone()),
        ("t*+13..", tl.forfeit()),
    ];
    let sigs: [(&str, &[Party]); 4] = [
        ("none", &[]),
        ("lender", &[Party::Lender]),
        ("borrower", &[Party::Borrower]),
        ("lender+borrower", &[Party::Lender, Party::Borrower]),
    ];
    let mut cols = Vec::new();
    for (wname, t) in &windows {
        for (sname, parties) in &sigs {
            let mut w = Witness::at(t.clone());
            for p in *parties {
                w = w.signed(*p, "open");
            }
            cols.push((format!("{wname}@{sname}"), w));
        }
    }
    cols
}

/// Rows of (output index, value, claimant per column); a cell is a party name or `locked`.
pub fn spend_matrix(params: &LoanParams) -> (Vec<String>, Vec<Vec<String>>) {
    let tx = build_pi1_collateral_tx(params);
    let cols = matrix_columns(params);
    let mut header = vec!["output".to_string(), "btc".to_string(), "fiat_at_p0".to_string()];
    header.extend(cols.iter().map(|(n, _)| n.clone()));
    let rows = tx
        .outputs
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let mut row = vec![
                i.to_string(),
                fmt_rational(o.value.value()),
                fmt_rational(&(o.value.value() * params.p0.value())),
            ];
            row.extend(cols.iter().map(|(_, w)| o.claimant(w).map_or("locked".to_string(), |p| p.name().to_string())));
            row
        })
        .collect();
    (header, rows)
}

pub fn spend_matrix_csv(params: &LoanParams) -> String {
    let (header, rows) = spend_matrix(params);
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// Final BTC holdings from the UTXO route next to those from the state machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Realization {
    pub outcome: Outcome,
    pub utxo_holdings: [Rational; 3],
    pub machine_holdings: [Rational; 3],
    pub transactions: usize,
}

impl Realization {
    pub fn matches(&self) -> bool {
        self.utxo_holdings == self.machine_holdings
    }
}

/// Replays a P1 trace as UTXO spends: lock the collateral, then spend it along the branch the
/// outcome calls for, and finally let the arbiter forward its share of the penalty.
pub fn realize_pi1_settlement(trace: &[TimedEvent], params: &LoanParams) -> Result<Realization, RealizeError> {
    let settlement = settle_pi1(trace, params)?;
    let y = params.y().0;
    let mut machine = settlement.btc.clone();
    machine[Party::Borrower.index()] += &y;

    let (mut set, _) = funding_set(params);
    let mut count = 0;
    let tl = &params.timeline;
    let open_at = match settlement.outcome {
        Outcome::NoDeal => None,
        Outcome::HonestClose | Outcome::LenderReleasedUnpaid { .. } => {
            Some(Witness::at(tl.t2.clone()).signed(Party::Lender, "open"))
        }
        Outcome::LenderWithheld | Outcome::BorrowerDefaulted { .. } => {
            Some(Witness::at(tl.t3.clone()).signed(Party::Borrower, "open"))
        }
        _ => Some(Witness::at(tl.forfeit())),
    };
    if let Some(w) = open_at {
        let lock = build_pi1_collateral_tx(params);
        let sign = Witness::at(tl.t1.clone()).signed(Party::Borrower, "lock");
        set = apply_tx(&set, &lock, &[sign])?;
        count += 1;
        let locked: Vec<OutPoint> = (0..lock.outputs.len()).map(|i| lock.outpoint(i)).collect();
        let claim = claim_all(&set, &locked, &w).ok_or(UtxoError::UnsatisfiedCondition(0))?;
        set = apply_tx(&set, &claim, &vec![w.clone(); locked.len()])?;
        count += 1;

        let forward_to = match settlement.outcome {
            Outcome::LenderWithheld => Some(Party::Borrower),
            Outcome::BorrowerDefaulted { .. } => Some(Party::Lender),
            _ => None,
        };
        let share = params.penalty() / params.p0.value();
        if let (Some(to), false) = (forward_to, share.is_zero()) {
            let arb_in = claim.outpoint(claim.outputs.len() - 1);
            let forward = Transaction {
                inputs: vec![arb_in],
                outputs: vec![Output::wallet(to, share.clone()), Output::wallet(Party::Arbiter, share)],
            };
            let sig = Witness::at(w.time.clone()).signed(Party::Arbiter, "forward");
            set = apply_tx(&set, &forward, &[sig])?;
            count += 1;
        }
    }
    Ok(Realization {
        outcome: settlement.outcome,
        utxo_holdings: set.holdings(),
        machine_holdings: machine,
        transactions: count,
    })
}

/// `k` outputs of `y/k` BTC each, spendable by the contract on an arbiter price attestation.
pub fn build_chunked_collateral(y: &BtcAmount, k: usize) -> Result<Vec<Output>, ChunkError> {
    if k < 2 {
        return Err(ChunkError::TooFewChunks(k));
    }
    if !num_traits::Signed::is_positive(y.value()) {
        return Err(ChunkError::NonPositive);
    }
    let each = y.value() / Rational::from_integer((k as i64).into());
    Ok((0..k).map(|_| chunk_output(each.clone())).collect())
}

fn chunk_output(value: Rational) -> Output {
    Output {
        value: BtcAmount(value),
        branches: vec![Branch {
            condition: Condition::All(vec![Condition::RequireSig(Party::Arbiter)]),
            recipient: Party::Arbiter,
        }],
    }
}

fn chunk_total(chunks: &[Output]) -> Rational {
    chunks.iter().map(|c| c.value.value().clone()).sum()
}

/// Moves whole chunks so the main account is worth at most `2P` at `p`, keeping as many
/// chunks in it as that bound allows.
pub fn redistribute_chunks(
    main: &[Output],
    temp: &[Output],
    p: &Price,
    params: &LoanParams,
) -> Result<(Vec<Output>, Vec<Output>), ChunkError> {
    let mut all = main.iter().chain(temp);
    if let Some(first) = all.next() {
        if let Some(other) = all.find(|c| c.value != first.value) {
            return Err(ChunkError::NonUniform(
                fmt_rational(first.value.value()),
                fmt_rational(other.value.value()),
            ));
        }
    }
    let cap = params.principal() * int(2);
    let mut main = main.to_vec();
    let mut temp = temp.to_vec();
    while chunk_total(&main) * p.value() > cap {
        match main.pop() {
            Some(c) => temp.push(c),
            None => break,
        }
    }
    while let Some(c) = temp.last() {
        if (chunk_total(&main) + c.value.value()) * p.value() > cap {
            break;
        }
        main.push(temp.pop().expect("non-empty"));
    }
    Ok((main, temp))
}
