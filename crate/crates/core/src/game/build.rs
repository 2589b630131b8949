//! Game trees induced by the three protocols. Every leaf is the settlement of an explicit event
//! trace, so the trees can never disagree with the state machine.

use num_traits::{One, Zero};
use thiserror::Error;

use crate::model::{fmt_rational, int, ratio, LoanParams, ParamsError, Price, PricePath, Rational};
use crate::protocols::{
    check_early_termination_pi2, check_liquidation_pi2, settle, settle_pi2, Party, Protocol, SettleError,
    TraceBuilder,
};

use super::tree::{GameTree, NodeId, NodeTag};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("repayment grid is empty")]
    EmptyGrid,
    #[error("repayment grid must contain 0 and the principal, with every value in between them")]
    BadGrid,
    #[error("at least one liquidation round is required")]
    ZeroRounds,
    #[error("expected {expected} price samples, got {got}")]
    PathLength { expected: usize, got: usize },
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("leaf trace rejected: {0}")]
    Settle(#[from] SettleError),
}

/// Repayment amounts `{0, P}`.
pub fn default_grid(params: &LoanParams) -> Vec<Rational> {
    vec![Rational::zero(), params.principal().clone()]
}

/// Repayment amounts `{0, P/4, P/2, 3P/4, P}`.
pub fn quarter_grid(params: &LoanParams) -> Vec<Rational> {
    (0..=4).map(|i| params.principal() * ratio(i, 4)).collect()
}

pub fn repay_label(x: &Rational) -> String {
    format!("repay:{}", fmt_rational(x))
}

pub fn price_label(p: &Price) -> String {
    format!("p={p}")
}

pub const LEND: &str = "lend";
pub const NOT_LEND: &str = "not_lend";
pub const CORRECT: &str = "correct";
pub const INCORRECT: &str = "incorrect";
pub const OPEN: &str = "open";
pub const NOT_OPEN: &str = "not_open";
pub const LIQUIDATE: &str = "liquidate";
pub const NOT_LIQUIDATE: &str = "not_liquidate";

struct Builder<'a> {
    tree: GameTree,
    params: &'a LoanParams,
    protocol: Protocol,
    grid: Vec<Rational>,
    path: Option<&'a PricePath>,
}

impl<'a> Builder<'a> {
    fn new(protocol: Protocol, params: &'a LoanParams, grid: &[Rational]) -> Result<Self, BuildError> {
        if grid.is_empty() {
            return Err(BuildError::EmptyGrid);
        }
        let p = params.principal();
        let in_range = grid.iter().all(|x| *x >= Rational::zero() && x <= p);
        if !in_range || !grid.contains(&Rational::zero()) || !grid.contains(p) {
            return Err(BuildError::BadGrid);
        }
        let mut g = grid.to_vec();
        g.sort();
        g.dedup();
        Ok(Builder { tree: GameTree::new(Some(protocol)), params, protocol, grid: g, path: None })
    }

    fn leaf(&mut self, b: TraceBuilder) -> Result<NodeId, BuildError> {
        let trace = b.build();
        let s = match (self.protocol, self.path) {
            (Protocol::P2, Some(path)) => settle_pi2(&trace, path, self.params)?,
            _ => settle(self.protocol, &trace, self.params)?,
        };
        let (l, bw) = s.game_utilities(self.params);
        Ok(self.tree.leaf([l, bw], s.outcome, trace))
    }

    /// Stages 3 to 5: repayment choice, lender opening, borrower opening.
    fn repayment(&mut self, prefix: &TraceBuilder, price: &Price) -> Result<NodeId, BuildError> {
        let mut branches = Vec::new();
        for x in self.grid.clone() {
            let b = prefix.clone().repay(x.clone());
            let lender_opens = self.leaf(b.clone().lender_open())?;
            let borrower_opens = self.leaf(b.clone().borrower_open())?;
            let forfeit = self.leaf(b.clone().forfeit())?;
            let bnode = self.tree.decision(
                Party::Borrower,
                NodeTag::BorrowerOpen { repaid: x.clone(), price: price.clone() },
                vec![(OPEN.into(), borrower_opens), (NOT_OPEN.into(), forfeit)],
            );
            let lnode = self.tree.decision(
                Party::Lender,
                NodeTag::LenderOpen { repaid: x.clone(), price: price.clone() },
                vec![(OPEN.into(), lender_opens), (NOT_OPEN.into(), bnode)],
            );
            branches.push((repay_label(&x), lnode));
        }
        Ok(self.tree.decision(Party::Borrower, NodeTag::Repay { price: price.clone() }, branches))
    }

    /// Stages 1 and 2 around the loan subtree `after_contract`.
    fn finish(mut self, after_contract: NodeId) -> Result<GameTree, BuildError> {
        let params = self.params;
        let incorrect = self.leaf(TraceBuilder::new(params).deposit().create_contract(false))?;
        let contract = self.tree.decision(
            Party::Borrower,
            NodeTag::Contract,
            vec![(CORRECT.into(), after_contract), (INCORRECT.into(), incorrect)],
        );
        let no_loan = self.leaf(TraceBuilder::new(params).timeout_at_t1())?;
        let root = self
            .tree
            .decision(Party::Lender, NodeTag::Lend, vec![(LEND.into(), contract), (NOT_LEND.into(), no_loan)]);
        self.tree.set_root(root);
        debug_assert!(self.tree.validate().is_ok());
        Ok(self.tree)
    }
}

/// Flat-rate game: lend, contract, repayment grid, lender open, borrower open.
pub fn build_gamma1(params: &LoanParams, grid: &[Rational]) -> Result<GameTree, BuildError> {
    params.validate()?;
    let mut b = Builder::new(Protocol::P1, params, grid)?;
    let opened = TraceBuilder::new(params).opened();
    let sub = b.repayment(&opened, &params.p0)?;
    b.finish(sub)
}

/// Oracle game. Each query is a point-mass Nature move; a query in the liquidation zone ends the
/// game, one at or above `tau` fast-tracks to the repayment stages.
pub fn build_gamma2(params: &LoanParams, path: &PricePath, grid: &[Rational]) -> Result<GameTree, BuildError> {
    params.validate()?;
    path.validate_for_oracle(params)?;
    let mut b = Builder::new(Protocol::P2, params, grid)?;
    b.path = Some(path);
    let opened = TraceBuilder::new(params).opened();
    let sub = queries(&mut b, path, 0, opened)?;
    b.finish(sub)
}

fn queries(b: &mut Builder, path: &PricePath, i: usize, prefix: TraceBuilder) -> Result<NodeId, BuildError> {
    let samples = path.samples();
    let (t, p) = samples[i].clone();
    let child = if check_liquidation_pi2(&p, b.params) {
        b.leaf(prefix.query(t, p.clone()))?
    } else if b.params.tau.is_some() && check_early_termination_pi2(&p, b.params)? {
        b.repayment(&prefix.spike(t, p.clone()), &p)?
    } else if i + 1 == samples.len() {
        b.repayment(&prefix.query(t, p.clone()), &p)?
    } else {
        queries(b, path, i + 1, prefix.query(t, p.clone()))?
    };
    Ok(b.tree.nature(vec![(price_label(&p), Rational::one(), child)]))
}

/// Nature's distribution over prices in one liquidation round.
pub type RoundDistribution = Vec<(Price, Rational)>;

/// Oracle-free game with one point-mass Nature move per round, using the path's prices.
/// Requires `epsilon < 1/(2 p0)`.
pub fn build_gamma3(params: &LoanParams, path: &[Price], rounds: usize, grid: &[Rational]) -> Result<GameTree, BuildError> {
    params.validate_oracle_free()?;
    build_gamma3_unchecked(params, path, rounds, grid)
}

/// As [`build_gamma3`] but only requires `0 < epsilon < 1`; used to probe the hypotheses.
pub fn build_gamma3_unchecked(
    params: &LoanParams,
    path: &[Price],
    rounds: usize,
    grid: &[Rational],
) -> Result<GameTree, BuildError> {
    if rounds == 0 {
        return Err(BuildError::ZeroRounds);
    }
    if path.len() != rounds {
        return Err(BuildError::PathLength { expected: rounds, got: path.len() });
    }
    let dists: Vec<RoundDistribution> = path.iter().map(|p| vec![(p.clone(), Rational::one())]).collect();
    build_gamma3_nature(params, &dists, grid)
}

/// General oracle-free game: round `i` draws its price from `dists[i]`. Liquidation leaves are
/// settled at the drawn price; surviving paths reach the repayment stages at the last drawn price.
pub fn build_gamma3_nature(
    params: &LoanParams,
    dists: &[RoundDistribution],
    grid: &[Rational],
) -> Result<GameTree, BuildError> {
    params.validate()?;
    if dists.is_empty() {
        return Err(BuildError::ZeroRounds);
    }
    let mut b = Builder::new(Protocol::P3, params, grid)?;
    let opened = TraceBuilder::new(params).opened();
    let sub = round(&mut b, dists, 0, opened, params.p0.clone())?;
    b.finish(sub)
}

fn round_time(params: &LoanParams, i: usize, n: usize) -> Rational {
    &params.timeline.t_star + int(12) * ratio(i as i64 + 1, n as i64 + 1)
}

fn round(b: &mut Builder, dists: &[RoundDistribution], i: usize, prefix: TraceBuilder, last: Price) -> Result<NodeId, BuildError> {
    if i == dists.len() {
        return b.repayment(&prefix, &last);
    }
    let t = round_time(b.params, i, dists.len());
    let mut edges = Vec::new();
    for (p, prob) in &dists[i] {
        let seen = prefix.clone().query(t.clone(), p.clone());
        let liq_a = b.leaf(seen.clone().liquidate(t.clone(), p.clone()))?;
        let liq_b = b.leaf(seen.clone().liquidate(t.clone(), p.clone()))?;
        let term = b.leaf(seen.clone().terminate(t.clone(), p.clone()))?;
        let cont = round(b, dists, i + 1, seen, p.clone())?;
        let is = b.tree.fresh_info_set();
        let tag = NodeTag::BlockLender { price: p.clone() };
        let after_liq = b.tree.decision_in(
            Party::Lender,
            is,
            tag.clone(),
            vec![(LIQUIDATE.into(), liq_a), (NOT_LIQUIDATE.into(), term)],
        );
        let after_wait = b.tree.decision_in(
            Party::Lender,
            is,
            tag,
            vec![(LIQUIDATE.into(), liq_b), (NOT_LIQUIDATE.into(), cont)],
        );
        let bnode = b.tree.decision(
            Party::Borrower,
            NodeTag::BlockBorrower { price: p.clone() },
            vec![(LIQUIDATE.into(), after_liq), (NOT_LIQUIDATE.into(), after_wait)],
        );
        edges.push((price_label(p), prob.clone(), bnode));
    }
    Ok(b.tree.nature(edges))
}
