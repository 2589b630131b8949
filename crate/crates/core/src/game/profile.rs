//! Strategy profiles stated as rules over node tags.

use crate::model::{LoanParams, Price};
use crate::protocols::{rho_b, rho_l, Protocol};

use super::build::{repay_label, CORRECT, LEND, LIQUIDATE, NOT_LIQUIDATE, NOT_OPEN, OPEN};
use super::solve::StrategyProfile;
use super::tree::{GameTree, NodeKind, NodeTag};

/// Builds a profile by asking `rule` for the action at each info set (using its first member's tag).
pub fn profile_from_rule(tree: &GameTree, rule: impl Fn(&NodeTag) -> String) -> StrategyProfile {
    let mut p = StrategyProfile::new();
    for (is, members) in tree.info_sets() {
        if let NodeKind::Decision { tag, .. } = &tree.node(members[0]).kind {
            p.insert(is, rule(tag));
        }
    }
    p
}

/// Lend, correct contract, repay in full, lender opens iff repaid in full, borrower opens.
pub fn honest_rule(params: &LoanParams) -> impl Fn(&NodeTag) -> String + '_ {
    move |tag| match tag {
        NodeTag::Lend => LEND.into(),
        NodeTag::Contract => CORRECT.into(),
        NodeTag::Repay { .. } => repay_label(params.principal()),
        NodeTag::LenderOpen { repaid, .. } => {
            if repaid == params.principal() { OPEN.into() } else { NOT_OPEN.into() }
        }
        NodeTag::BorrowerOpen { .. } => OPEN.into(),
        NodeTag::BlockBorrower { .. } | NodeTag::BlockLender { .. } => NOT_LIQUIDATE.into(),
        NodeTag::Custom(s) => s.clone(),
    }
}

/// The oracle-free profile: the lender liquidates at or below `rho_L`, nobody else liquidates;
/// at maturity the borrower repays in full iff the price is at least `rho_L`, and after full
/// repayment the lender opens only below `rho_B`, leaving the opening to the borrower otherwise.
pub fn oracle_free_rule(params: &LoanParams) -> impl Fn(&NodeTag) -> String + '_ {
    let rl = rho_l(params);
    let rb: Option<Price> = rho_b(params).ok();
    move |tag| match tag {
        NodeTag::BlockLender { price } => {
            if price <= &rl { LIQUIDATE.into() } else { NOT_LIQUIDATE.into() }
        }
        NodeTag::BlockBorrower { .. } => NOT_LIQUIDATE.into(),
        NodeTag::Repay { price } => {
            if price >= &rl {
                repay_label(params.principal())
            } else {
                repay_label(&num_traits::Zero::zero())
            }
        }
        NodeTag::LenderOpen { repaid, price } => {
            let below_rb = rb.as_ref().is_none_or(|r| price < r);
            if repaid == params.principal() && below_rb { OPEN.into() } else { NOT_OPEN.into() }
        }
        other => honest_rule(params)(other),
    }
}

/// The protocol's prescribed profile for `tree`.
pub fn honest_profile(tree: &GameTree, params: &LoanParams) -> StrategyProfile {
    match tree.protocol {
        Some(Protocol::P3) => profile_from_rule(tree, oracle_free_rule(params)),
        _ => profile_from_rule(tree, honest_rule(params)),
    }
}
