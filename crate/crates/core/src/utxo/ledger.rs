use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{Signed, Zero};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{fmt_rational, BtcAmount, Rational};
use crate::protocols::Party;

use super::condition::{eval_condition, Condition, Witness};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UtxoError {
    #[error("input {0} is not in the unspent set")]
    MissingInput(usize),
    #[error("witness for input {0} does not satisfy its spending condition")]
    UnsatisfiedCondition(usize),
    #[error("inputs total {inputs} BTC but outputs total {outputs} BTC")]
    ValueMismatch { inputs: String, outputs: String },
    #[error("{0} witnesses for {1} inputs")]
    WitnessCount(usize, usize),
    #[error("output values must be positive")]
    NonPositiveOutput,
}

/// One way to spend an output, and who the spend pays.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Branch {
    pub condition: Condition,
    pub recipient: Party,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Output {
    pub value: BtcAmount,
    pub branches: Vec<Branch>,
}

impl Output {
    /// An output spendable only by `owner`'s signature.
    pub fn wallet(owner: Party, value: Rational) -> Self {
        Output {
            value: BtcAmount(value),
            branches: vec![Branch { condition: Condition::RequireSig(owner), recipient: owner }],
        }
    }

    pub fn condition(&self) -> Condition {
        Condition::Any(self.branches.iter().map(|b| b.condition.clone()).collect())
    }

    /// Recipient of the first branch `w` satisfies, if any.
    pub fn claimant(&self, w: &Witness) -> Option<Party> {
        self.branches.iter().find(|b| eval_condition(&b.condition, w)).map(|b| b.recipient)
    }

    /// The owner if this is a plain single-signature wallet output.
    pub fn owner(&self) -> Option<Party> {
        match self.branches.as_slice() {
            [Branch { condition: Condition::RequireSig(p), recipient }] if p == recipient => Some(*p),
            _ => None,
        }
    }

    fn canonical(&self) -> String {
        let mut s = fmt_rational(self.value.value());
        for b in &self.branches {
            let _ = write!(s, "|{}=>{}", b.condition, b.recipient.name());
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutPoint {
    pub txid: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub inputs: Vec<OutPoint>,
    pub outputs: Vec<Output>,
}

impl Transaction {
    /// SHA-256 of a canonical text serialization, hex encoded.
    pub fn txid(&self) -> String {
        let mut h = Sha256::new();
        for i in &self.inputs {
            h.update(format!("in:{}:{};", i.txid, i.index));
        }
        for o in &self.outputs {
            h.update(format!("out:{};", o.canonical()));
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn outpoint(&self, index: usize) -> OutPoint {
        OutPoint { txid: self.txid(), index }
    }

    pub fn output_total(&self) -> Rational {
        self.outputs.iter().map(|o| o.value.value().clone()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UtxoSet {
    pub unspent: BTreeMap<OutPoint, Output>,
}

impl UtxoSet {
    /// A set holding the outputs of a coinbase-like transaction with no inputs.
    pub fn genesis(outputs: Vec<Output>) -> (Self, Transaction) {
        let tx = Transaction { inputs: Vec::new(), outputs };
        let txid = tx.txid();
        let unspent = tx
            .outputs
            .iter()
            .enumerate()
            .map(|(i, o)| (OutPoint { txid: txid.clone(), index: i }, o.clone()))
            .collect();
        (UtxoSet { unspent }, tx)
    }

    pub fn get(&self, op: &OutPoint) -> Option<&Output> {
        self.unspent.get(op)
    }

    pub fn total(&self) -> Rational {
        self.unspent.values().map(|o| o.value.value().clone()).sum()
    }

    /// BTC held in plain wallet outputs, per party.
    pub fn holdings(&self) -> [Rational; 3] {
        let mut h = [Rational::zero(), Rational::zero(), Rational::zero()];
        for o in self.unspent.values() {
            if let Some(p) = o.owner() {
                h[p.index()] += o.value.value();
            }
        }
        h
    }
}

/// Spends `tx.inputs` (each authorised by the matching witness) and adds `tx.outputs`.
pub fn apply_tx(set: &UtxoSet, tx: &Transaction, witnesses: &[Witness]) -> Result<UtxoSet, UtxoError> {
    if witnesses.len() != tx.inputs.len() {
        return Err(UtxoError::WitnessCount(witnesses.len(), tx.inputs.len()));
    }
    if tx.outputs.iter().any(|o| !o.value.value().is_positive()) {
        return Err(UtxoError::NonPositiveOutput);
    }
    let mut next = set.clone();
    let mut total_in = Rational::zero();
    for (i, (op, w)) in tx.inputs.iter().zip(witnesses).enumerate() {
        let out = next.unspent.remove(op).ok_or(UtxoError::MissingInput(i))?;
        if !eval_condition(&out.condition(), w) {
            return Err(UtxoError::UnsatisfiedCondition(i));
        }
        total_in += out.value.value();
    }
    let total_out = tx.output_total();
    if total_in != total_out {
        return Err(UtxoError::ValueMismatch { inputs: fmt_rational(&total_in), outputs: fmt_rational(&total_out) });
    }
    let txid = tx.txid();
    for (i, o) in tx.outputs.iter().enumerate() {
        next.unspent.insert(OutPoint { txid: txid.clone(), index: i }, o.clone());
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{int, ratio};

    #[test]
    fn spend_and_double_spend() {
        let (set, g) = UtxoSet::genesis(vec![Output::wallet(Party::Borrower, int(2))]);
        let tx = Transaction { inputs: vec![g.outpoint(0)], outputs: vec![Output::wallet(Party::Borrower, int(2))] };
        let w = Witness::at(int(0)).signed(Party::Borrower, "spend");
        let after = apply_tx(&set, &tx, &[w.clone()]).unwrap();
        assert_eq!(after.total(), int(2));
        let twice = Transaction { inputs: vec![g.outpoint(0), g.outpoint(0)], outputs: vec![Output::wallet(Party::Lender, int(4))] };
        assert_eq!(apply_tx(&set, &twice, &[w.clone(), w.clone()]), Err(UtxoError::MissingInput(1)));
        assert_eq!(apply_tx(&after, &tx, &[w]), Err(UtxoError::MissingInput(0)));
    }

    #[test]
    fn value_and_signature_checks() {
        let (set, g) = UtxoSet::genesis(vec![Output::wallet(Party::Borrower, int(2))]);
        let short = Transaction { inputs: vec![g.outpoint(0)], outputs: vec![Output::wallet(Party::Lender, ratio(19, 10))] };
        let w = Witness::at(int(0)).signed(Party::Borrower, "spend");
        assert!(matches!(apply_tx(&set, &short, &[w]), Err(UtxoError::ValueMismatch { .. })));
        let ok = Transaction { inputs: vec![g.outpoint(0)], outputs: vec![Output::wallet(Party::Lender, int(2))] };
        let wrong = Witness::at(int(0)).signed(Party::Lender, "spend");
        assert_eq!(apply_tx(&set, &ok, &[wrong]), Err(UtxoError::UnsatisfiedCondition(0)));
    }

    #[test]
    fn txids_are_stable_and_distinct() {
        let a = Transaction { inputs: vec![], outputs: vec![Output::wallet(Party::Lender, int(1))] };
        let b = Transaction { inputs: vec![], outputs: vec![Output::wallet(Party::Borrower, int(1))] };
        assert_eq!(a.txid(), a.clone().txid());
        assert_ne!(a.txid(), b.txid());
        assert_eq!(a.txid().len(), 64);
    }
}
