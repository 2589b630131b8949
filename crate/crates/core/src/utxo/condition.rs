use std::fmt;

use crate::model::{fmt_rational, Rational};
use crate::protocols::Party;

/// Spending condition. Timelocks are absolute and only ever unlock, so every condition is
/// monotone in time.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Condition {
    RequireSig(Party),
    After(Rational),
    All(Vec<Condition>),
    Any(Vec<Condition>),
}

/// A simulated signature: an opaque token naming the signer and what it signs for.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature {
    pub party: Party,
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub signatures: Vec<Signature>,
    pub time: Rational,
}

impl Witness {
    pub fn at(time: Rational) -> Self {
        Witness { signatures: Vec::new(), time }
    }

    pub fn signed(mut self, party: Party, context: &str) -> Self {
        self.signatures.push(Signature { party, context: context.to_string() });
        self
    }

    pub fn has_sig(&self, party: Party) -> bool {
        self.signatures.iter().any(|s| s.party == party)
    }
}

pub fn eval_condition(c: &Condition, w: &Witness) -> bool {
    match c {
        Condition::RequireSig(p) => w.has_sig(*p),
        Condition::After(t) => w.time >= *t,
        Condition::All(cs) => cs.iter().all(|c| eval_condition(c, w)),
        Condition::Any(cs) => cs.iter().any(|c| eval_condition(c, w)),
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::RequireSig(p) => write!(f, "sig({})", p.name()),
            Condition::After(t) => write!(f, "after({})", fmt_rational(t)),
            Condition::All(cs) | Condition::Any(cs) => {
                f.write_str(if matches!(self, Condition::All(_)) { "all(" } else { "any(" })?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
        }
    }
}
