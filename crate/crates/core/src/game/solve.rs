//! Pure-strategy subgame perfect equilibria: enumeration by backward induction and checking of
//! a given profile by one-shot deviations.

use std::collections::{BTreeMap, HashMap};

use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::model::{fmt_rational, Rational};
use crate::protocols::Party;

use super::tree::{Block, GameTree, InfoSetId, NodeId, NodeKind, TreeError};

pub type StrategyProfile = BTreeMap<InfoSetId, String>;
pub type Values = [Rational; 2];

/// Upper bound on the number of equilibria kept per subtree.
pub const DEFAULT_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("no pure Nash equilibrium in the simultaneous block at node {0}")]
    NoPureEquilibrium(NodeId),
    #[error("profile does not choose a valid action at info set {0}")]
    IncompleteProfile(InfoSetId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equilibrium {
    pub profile: StrategyProfile,
    pub value: Values,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeSet {
    pub equilibria: Vec<Equilibrium>,
    /// True if the cap cut enumeration short.
    pub truncated: bool,
}

impl SpeSet {
    pub fn contains(&self, profile: &StrategyProfile) -> bool {
        self.equilibria.iter().any(|e| &e.profile == profile)
    }

    /// Root values reached by the equilibria, deduplicated, in first-seen order.
    pub fn values(&self) -> Vec<Values> {
        let mut v: Vec<Values> = Vec::new();
        for e in &self.equilibria {
            if !v.contains(&e.value) {
                v.push(e.value.clone());
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub subgame_root: NodeId,
    pub player: Party,
    pub action: String,
    pub gain: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeVerdict {
    pub is_spe: bool,
    pub witnesses: Vec<Witness>,
    pub root_value: Values,
}

fn pidx(p: Party) -> usize {
    match p {
        Party::Lender => 0,
        Party::Borrower => 1,
        Party::Arbiter => panic!("the arbiter is not a player"),
    }
}

struct Ctx<'a> {
    tree: &'a GameTree,
    /// Block root to its block.
    blocks: HashMap<NodeId, Block>,
    cap: usize,
    truncated: bool,
}

/// All pure SPE of `tree`, with at most `DEFAULT_CAP` profiles kept.
pub fn solve_spe(tree: &GameTree) -> Result<SpeSet, SolveError> {
    solve_spe_capped(tree, DEFAULT_CAP)
}

pub fn solve_spe_capped(tree: &GameTree, cap: usize) -> Result<SpeSet, SolveError> {
    tree.validate()?;
    let blocks = tree.blocks()?.into_iter().map(|b| (b.root, b)).collect();
    let mut ctx = Ctx { tree, blocks, cap: cap.max(1), truncated: false };
    let equilibria = solve_node(&mut ctx, tree.root)?;
    Ok(SpeSet { equilibria, truncated: ctx.truncated })
}

/// Cartesian product of per-child solution lists, capped.
fn product(ctx: &mut Ctx, lists: &[Vec<Equilibrium>]) -> Vec<Vec<usize>> {
    let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
    for l in lists {
        let mut next = Vec::new();
        'outer: for c in &combos {
            for i in 0..l.len() {
                if next.len() >= ctx.cap {
                    ctx.truncated = true;
                    break 'outer;
                }
                let mut c2 = c.clone();
                c2.push(i);
                next.push(c2);
            }
        }
        combos = next;
    }
    combos
}

fn merged(lists: &[Vec<Equilibrium>], combo: &[usize]) -> StrategyProfile {
    let mut p = StrategyProfile::new();
    for (l, &i) in lists.iter().zip(combo) {
        p.extend(l[i].profile.iter().map(|(k, v)| (*k, v.clone())));
    }
    p
}

fn solve_node(ctx: &mut Ctx, id: NodeId) -> Result<Vec<Equilibrium>, SolveError> {
    let tree = ctx.tree;
    if ctx.blocks.contains_key(&id) {
        return solve_block(ctx, id);
    }
    match &tree.node(id).kind {
        NodeKind::Leaf { utilities, .. } => Ok(vec![Equilibrium { profile: StrategyProfile::new(), value: utilities.clone() }]),
        NodeKind::Nature { edges } => {
            let lists = edges.iter().map(|e| solve_node(ctx, e.2)).collect::<Result<Vec<_>, _>>()?;
            let combos = product(ctx, &lists);
            Ok(combos
                .into_iter()
                .map(|c| {
                    let mut value = [Rational::zero(), Rational::zero()];
                    for ((e, l), &i) in edges.iter().zip(&lists).zip(&c) {
                        value[0] += &e.1 * &l[i].value[0];
                        value[1] += &e.1 * &l[i].value[1];
                    }
                    Equilibrium { profile: merged(&lists, &c), value }
                })
                .collect())
        }
        NodeKind::Decision { player, info_set, actions, .. } => {
            let k = pidx(*player);
            let lists = actions.iter().map(|a| solve_node(ctx, a.1)).collect::<Result<Vec<_>, _>>()?;
            let combos = product(ctx, &lists);
            let mut out = Vec::new();
            for c in combos {
                let vals: Vec<&Values> = lists.iter().zip(&c).map(|(l, &i)| &l[i].value).collect();
                let best = vals.iter().map(|v| &v[k]).max().expect("non-empty actions");
                let base = merged(&lists, &c);
                for (j, v) in vals.iter().enumerate() {
                    if &v[k] == best {
                        if out.len() >= ctx.cap {
                            ctx.truncated = true;
                            break;
                        }
                        let mut profile = base.clone();
                        profile.insert(*info_set, actions[j].0.clone());
                        out.push(Equilibrium { profile, value: (*v).clone() });
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Solves a simultaneous block: the root player and the info-set player move without seeing each
/// other; each pure NE of the induced normal form (for each choice of continuation equilibria)
/// yields one equilibrium.
fn solve_block(ctx: &mut Ctx, root: NodeId) -> Result<Vec<Equilibrium>, SolveError> {
    let tree = ctx.tree;
    let (rplayer, rset, ractions) = match &tree.node(root).kind {
        NodeKind::Decision { player, info_set, actions, .. } => (*player, *info_set, actions.clone()),
        _ => unreachable!("block roots are decision nodes"),
    };
    let mut members = Vec::new();
    let mut grand: Vec<(usize, usize, NodeId)> = Vec::new();
    let (mplayer, mset, mlabels) = {
        let first = &tree.node(ractions[0].1).kind;
        match first {
            NodeKind::Decision { player, info_set, actions, .. } => {
                (*player, *info_set, actions.iter().map(|a| a.0.clone()).collect::<Vec<_>>())
            }
            _ => unreachable!(),
        }
    };
    for (r, (_, m)) in ractions.iter().enumerate() {
        members.push(*m);
        if let NodeKind::Decision { actions, .. } = &tree.node(*m).kind {
            for (c, (_, g)) in actions.iter().enumerate() {
                grand.push((r, c, *g));
            }
        }
    }
    let lists = grand.iter().map(|g| solve_node(ctx, g.2)).collect::<Result<Vec<_>, _>>()?;
    let combos = product(ctx, &lists);
    let (rk, mk) = (pidx(rplayer), pidx(mplayer));
    let nr = ractions.len();
    let nm = mlabels.len();
    let mut out = Vec::new();
    for c in combos {
        let val = |r: usize, m: usize| -> &Values { &lists[r * nm + m][c[r * nm + m]].value };
        let base = merged(&lists, &c);
        for r in 0..nr {
            for m in 0..nm {
                let v = val(r, m);
                let root_best = (0..nr).all(|r2| val(r2, m)[rk] <= v[rk]);
                let member_best = (0..nm).all(|m2| val(r, m2)[mk] <= v[mk]);
                if root_best && member_best {
                    if out.len() >= ctx.cap {
                        ctx.truncated = true;
                        continue;
                    }
                    let mut profile = base.clone();
                    profile.insert(rset, ractions[r].0.clone());
                    profile.insert(mset, mlabels[m].clone());
                    out.push(Equilibrium { profile, value: v.clone() });
                }
            }
        }
    }
    if out.is_empty() {
        return Err(SolveError::NoPureEquilibrium(root));
    }
    Ok(out)
}

fn chosen<'a>(profile: &StrategyProfile, info_set: InfoSetId, actions: &'a [(String, NodeId)]) -> Result<(usize, &'a (String, NodeId)), SolveError> {
    let label = profile.get(&info_set).ok_or(SolveError::IncompleteProfile(info_set))?;
    actions
        .iter()
        .enumerate()
        .find(|(_, a)| &a.0 == label)
        .ok_or(SolveError::IncompleteProfile(info_set))
}

/// Expected utilities of every node when all players follow `profile`.
pub fn profile_values(tree: &GameTree, profile: &StrategyProfile) -> Result<Vec<Values>, SolveError> {
    let mut vals: Vec<Option<Values>> = vec![None; tree.len()];
    for &id in tree.preorder().iter().rev() {
        let v = match &tree.node(id).kind {
            NodeKind::Leaf { utilities, .. } => utilities.clone(),
            NodeKind::Nature { edges } => {
                let mut v = [Rational::zero(), Rational::zero()];
                for e in edges {
                    let c = vals[e.2].as_ref().expect("children first");
                    v[0] += &e.1 * &c[0];
                    v[1] += &e.1 * &c[1];
                }
                v
            }
            NodeKind::Decision { info_set, actions, .. } => {
                let (_, a) = chosen(profile, *info_set, actions)?;
                vals[a.1].clone().expect("children first")
            }
        };
        vals[id] = Some(v);
    }
    Ok(vals.into_iter().map(|v| v.expect("all nodes reached")).collect())
}

/// Checks `profile` for profitable one-shot deviations in every subgame. Simultaneous blocks are
/// checked as a unit: each of the two players deviates alone, the other held at the profile.
pub fn is_spe(tree: &GameTree, profile: &StrategyProfile) -> Result<SpeVerdict, SolveError> {
    tree.validate()?;
    let blocks: HashMap<NodeId, Block> = tree.blocks()?.into_iter().map(|b| (b.root, b)).collect();
    let block_sets: Vec<InfoSetId> = blocks.values().map(|b| b.info_set).collect();
    for (is, members) in tree.info_sets() {
        if let NodeKind::Decision { actions, .. } = &tree.node(members[0]).kind {
            chosen(profile, is, actions)?;
        }
    }
    let vals = profile_values(tree, profile)?;
    let mut witnesses = Vec::new();
    for id in tree.preorder() {
        let (player, info_set, actions) = match &tree.node(id).kind {
            NodeKind::Decision { player, info_set, actions, .. } => (*player, *info_set, actions),
            _ => continue,
        };
        if block_sets.contains(&info_set) {
            continue;
        }
        let k = pidx(player);
        let (ci, _) = chosen(profile, info_set, actions)?;
        if let Some(block) = blocks.get(&id) {
            let member = actions[ci].1;
            let (mplayer, mactions) = match &tree.node(member).kind {
                NodeKind::Decision { player, actions, .. } => (*player, actions),
                _ => unreachable!(),
            };
            let (mi, _) = chosen(profile, block.info_set, mactions)?;
            let on_path = &vals[mactions[mi].1];
            for (j, (label, other)) in actions.iter().enumerate() {
                if j == ci {
                    continue;
                }
                let oactions = match &tree.node(*other).kind {
                    NodeKind::Decision { actions, .. } => actions,
                    _ => unreachable!(),
                };
                let dev = &vals[oactions[mi].1];
                let gain = &dev[k] - &on_path[k];
                if gain.is_positive() {
                    witnesses.push(Witness { subgame_root: id, player, action: label.clone(), gain });
                }
            }
            let mk = pidx(mplayer);
            for (j, (label, child)) in mactions.iter().enumerate() {
                if j == mi {
                    continue;
                }
                let gain = &vals[*child][mk] - &on_path[mk];
                if gain.is_positive() {
                    witnesses.push(Witness { subgame_root: id, player: mplayer, action: label.clone(), gain });
                }
            }
            continue;
        }
        let on_path = &vals[actions[ci].1];
        for (j, (label, child)) in actions.iter().enumerate() {
            if j == ci {
                continue;
            }
            let gain = &vals[*child][k] - &on_path[k];
            if gain.is_positive() {
                witnesses.push(Witness { subgame_root: id, player, action: label.clone(), gain });
            }
        }
    }
    Ok(SpeVerdict { is_spe: witnesses.is_empty(), witnesses, root_value: vals[tree.root].clone() })
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessJson {
    pub subgame_root: NodeId,
    pub player: String,
    pub action: String,
    pub gain: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictJson {
    pub is_spe: bool,
    pub root_value: [String; 2],
    pub witnesses: Vec<WitnessJson>,
}

impl From<&SpeVerdict> for VerdictJson {
    fn from(v: &SpeVerdict) -> Self {
        VerdictJson {
            is_spe: v.is_spe,
            root_value: [fmt_rational(&v.root_value[0]), fmt_rational(&v.root_value[1])],
            witnesses: v
                .witnesses
                .iter()
                .map(|w| WitnessJson {
                    subgame_root: w.subgame_root,
                    player: w.player.name().to_string(),
                    action: w.action.clone(),
                    gain: fmt_rational(&w.gain),
                })
                .collect(),
        }
    }
}

impl SpeVerdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&VerdictJson::from(self)).expect("serializable")
    }
}
