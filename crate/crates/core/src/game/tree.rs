use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{One, Signed};
use thiserror::Error;

use crate::model::{fmt_rational, Price, Rational};
use crate::protocols::{Outcome, Party, Protocol, TimedEvent};

pub type NodeId = usize;
pub type InfoSetId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("node {0} does not exist")]
    MissingNode(NodeId),
    #[error("node {0} has more than one parent")]
    SharedChild(NodeId),
    #[error("node {0} is unreachable from the root")]
    Unreachable(NodeId),
    #[error("nature node {0}: probabilities must be positive and sum to 1")]
    BadNature(NodeId),
    #[error("decision node {0} has no actions")]
    NoActions(NodeId),
    #[error("malformed information set {info_set}: {reason}")]
    MalformedInfoSet { info_set: InfoSetId, reason: String },
}

/// What a decision node represents; used to state strategy rules without knowing node ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeTag {
    Lend,
    Contract,
    /// Repayment choice; `price` is the price in force at maturity.
    Repay { price: Price },
    LenderOpen { repaid: Rational, price: Price },
    BorrowerOpen { repaid: Rational, price: Price },
    BlockBorrower { price: Price },
    BlockLender { price: Price },
    Custom(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Decision {
        player: Party,
        info_set: InfoSetId,
        tag: NodeTag,
        actions: Vec<(String, NodeId)>,
    },
    Nature {
        edges: Vec<(String, Rational, NodeId)>,
    },
    Leaf {
        /// `[lender, borrower]` net utilities in fiat.
        utilities: [Rational; 2],
        outcome: Outcome,
        /// The event trace whose settlement produced `utilities`.
        trace: Vec<TimedEvent>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub kind: NodeKind,
}

impl GameNode {
    pub fn children(&self) -> Vec<NodeId> {
        match &self.kind {
            NodeKind::Decision { actions, .. } => actions.iter().map(|a| a.1).collect(),
            NodeKind::Nature { edges } => edges.iter().map(|e| e.2).collect(),
            NodeKind::Leaf { .. } => Vec::new(),
        }
    }
}

/// Extensive-form game in arena form. Node 0 is not necessarily the root; see `root`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GameTree {
    pub protocol: Option<Protocol>,
    pub nodes: Vec<GameNode>,
    pub root: NodeId,
    next_info_set: InfoSetId,
}

/// A non-singleton information set together with the node whose children it covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub root: NodeId,
    pub info_set: InfoSetId,
}

impl GameTree {
    pub fn new(protocol: Option<Protocol>) -> Self {
        GameTree { protocol, ..Default::default() }
    }

    pub fn fresh_info_set(&mut self) -> InfoSetId {
        self.next_info_set += 1;
        self.next_info_set - 1
    }

    fn push(&mut self, kind: NodeKind) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(GameNode { id, parent: None, kind });
        id
    }

    pub fn leaf(&mut self, utilities: [Rational; 2], outcome: Outcome, trace: Vec<TimedEvent>) -> NodeId {
        self.push(NodeKind::Leaf { utilities, outcome, trace })
    }

    /// Adds a decision node in its own information set.
    pub fn decision(&mut self, player: Party, tag: NodeTag, actions: Vec<(String, NodeId)>) -> NodeId {
        let info_set = self.fresh_info_set();
        self.decision_in(player, info_set, tag, actions)
    }

    pub fn decision_in(
        &mut self,
        player: Party,
        info_set: InfoSetId,
        tag: NodeTag,
        actions: Vec<(String, NodeId)>,
    ) -> NodeId {
        let children: Vec<NodeId> = actions.iter().map(|a| a.1).collect();
        let id = self.push(NodeKind::Decision { player, info_set, tag, actions });
        self.adopt(id, &children);
        id
    }

    pub fn nature(&mut self, edges: Vec<(String, Rational, NodeId)>) -> NodeId {
        let children: Vec<NodeId> = edges.iter().map(|e| e.2).collect();
        let id = self.push(NodeKind::Nature { edges });
        self.adopt(id, &children);
        id
    }

    fn adopt(&mut self, parent: NodeId, children: &[NodeId]) {
        for &c in children {
            if let Some(n) = self.nodes.get_mut(c) {
                if n.parent.is_none() {
                    n.parent = Some(parent);
                } else {
                    // recorded as a second parent marker; caught by validate()
                    n.parent = Some(usize::MAX);
                }
            }
        }
    }

    pub fn set_root(&mut self, root: NodeId) {
        self.root = root;
    }

    pub fn node(&self, id: NodeId) -> &GameNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|n| n.children().len()).sum()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &GameNode> {
        self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Leaf { .. }))
    }

    /// Info set id to member nodes, in id order.
    pub fn info_sets(&self) -> BTreeMap<InfoSetId, Vec<NodeId>> {
        let mut m: BTreeMap<InfoSetId, Vec<NodeId>> = BTreeMap::new();
        for n in &self.nodes {
            if let NodeKind::Decision { info_set, .. } = n.kind {
                m.entry(info_set).or_default().push(n.id);
            }
        }
        m
    }

    /// Action labels at an info set (taken from its first member).
    pub fn info_set_actions(&self, info_set: InfoSetId) -> Option<Vec<String>> {
        self.info_sets().get(&info_set).and_then(|members| match &self.nodes[members[0]].kind {
            NodeKind::Decision { actions, .. } => Some(actions.iter().map(|a| a.0.clone()).collect()),
            _ => None,
        })
    }

    /// Follows edge labels (actions or nature labels) from the root.
    pub fn follow(&self, labels: &[&str]) -> Option<NodeId> {
        let mut cur = self.root;
        for l in labels {
            cur = match &self.nodes[cur].kind {
                NodeKind::Decision { actions, .. } => actions.iter().find(|a| a.0 == *l)?.1,
                NodeKind::Nature { edges } => edges.iter().find(|e| e.0 == *l)?.2,
                NodeKind::Leaf { .. } => return None,
            };
        }
        Some(cur)
    }

    /// Nodes in depth-first pre-order from the root.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            out.push(id);
            let mut ch = self.nodes[id].children();
            ch.reverse();
            stack.extend(ch);
        }
        out
    }

    /// Simultaneous-move blocks: every non-singleton info set must be exactly the children of one
    /// decision node of the other player, which is itself alone in its info set.
    pub fn blocks(&self) -> Result<Vec<Block>, TreeError> {
        let mut blocks = Vec::new();
        let sets = self.info_sets();
        for (&is, members) in &sets {
            if members.len() < 2 {
                continue;
            }
            let bad = |reason: &str| TreeError::MalformedInfoSet { info_set: is, reason: reason.to_string() };
            let parent = self.nodes[members[0]].parent.ok_or_else(|| bad("root cannot share an info set"))?;
            let pnode = self.nodes.get(parent).ok_or_else(|| bad("member has several parents"))?;
            let (pplayer, pset) = match &pnode.kind {
                NodeKind::Decision { player, info_set, .. } => (*player, *info_set),
                _ => return Err(bad("members must hang off a decision node")),
            };
            let mut siblings = pnode.children();
            siblings.sort_unstable();
            if siblings != *members {
                return Err(bad("members must be exactly the children of one decision node"));
            }
            if sets[&pset].len() != 1 {
                return Err(bad("block root must be alone in its info set"));
            }
            let member_player = match &self.nodes[members[0]].kind {
                NodeKind::Decision { player, .. } => *player,
                _ => unreachable!(),
            };
            if member_player == pplayer {
                return Err(bad("block must alternate between the two players"));
            }
            blocks.push(Block { root: parent, info_set: is });
        }
        Ok(blocks)
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        if self.nodes.is_empty() {
            return Err(TreeError::MissingNode(self.root));
        }
        if self.root >= self.nodes.len() {
            return Err(TreeError::MissingNode(self.root));
        }
        for n in &self.nodes {
            if n.parent == Some(usize::MAX) {
                return Err(TreeError::SharedChild(n.id));
            }
            for c in n.children() {
                if c >= self.nodes.len() {
                    return Err(TreeError::MissingNode(c));
                }
            }
            match &n.kind {
                NodeKind::Decision { actions, .. } if actions.is_empty() => {
                    return Err(TreeError::NoActions(n.id))
                }
                NodeKind::Nature { edges } => {
                    let sum: Rational = edges.iter().map(|e| e.1.clone()).sum();
                    if edges.is_empty() || !sum.is_one() || edges.iter().any(|e| !e.1.is_positive()) {
                        return Err(TreeError::BadNature(n.id));
                    }
                }
                _ => {}
            }
        }
        let reached = self.preorder();
        if reached.len() != self.nodes.len() {
            let mut seen = vec![false; self.nodes.len()];
            for r in reached {
                seen[r] = true;
            }
            let missing = seen.iter().position(|s| !s).unwrap_or(0);
            return Err(TreeError::Unreachable(missing));
        }
        for (&is, members) in &self.info_sets() {
            let first = &self.nodes[members[0]].kind;
            let (p0, a0) = match first {
                NodeKind::Decision { player, actions, .. } => {
                    (*player, actions.iter().map(|a| &a.0).collect::<Vec<_>>())
                }
                _ => unreachable!(),
            };
            for &m in &members[1..] {
                if let NodeKind::Decision { player, actions, .. } = &self.nodes[m].kind {
                    let a: Vec<_> = actions.iter().map(|a| &a.0).collect();
                    if *player != p0 || a != a0 {
                        return Err(TreeError::MalformedInfoSet {
                            info_set: is,
                            reason: "members disagree on owner or actions".into(),
                        });
                    }
                }
            }
        }
        self.blocks()?;
        Ok(())
    }
}

fn fmt_utils(u: &[Rational; 2]) -> String {
    format!("({}, {})", fmt_rational(&u[0]), fmt_rational(&u[1]))
}

/// Deterministic Graphviz description. Edges chosen by `profile` are drawn bold and dashed.
pub fn export_dot(tree: &GameTree, profile: Option<&BTreeMap<InfoSetId, String>>) -> String {
    let mut out = String::new();
    out.push_str("digraph game {\n  node [fontname=\"Helvetica\"];\n");
    for id in tree.preorder() {
        let n = tree.node(id);
        match &n.kind {
            NodeKind::Decision { player, info_set, actions, .. } => {
                let who = if *player == Party::Lender { "L" } else { "B" };
                let _ = writeln!(out, "  n{id} [shape=circle, label=\"{who}\\nI{info_set}\"];");
                for (label, child) in actions {
                    let chosen = profile.and_then(|p| p.get(info_set)) == Some(label);
                    let style = if chosen { ", style=\"bold,dashed\"" } else { "" };
                    let _ = writeln!(out, "  n{id} -> n{child} [label=\"{label}\"{style}];");
                }
            }
            NodeKind::Nature { edges } => {
                let _ = writeln!(out, "  n{id} [shape=diamond, label=\"E\"];");
                for (label, prob, child) in edges {
                    let _ = writeln!(out, "  n{id} -> n{child} [label=\"{label} ({})\"];", fmt_rational(prob));
                }
            }
            NodeKind::Leaf { utilities, outcome, .. } => {
                let _ = writeln!(
                    out,
                    "  n{id} [shape=box, label=\"{}\\n{}\"];",
                    fmt_utils(utilities),
                    outcome
                );
            }
        }
    }
    for (is, members) in tree.info_sets() {
        if members.len() > 1 {
            let _ = writeln!(out, "  subgraph cluster_i{is} {{ style=dotted; label=\"I{is}\";");
            for m in members {
                let _ = writeln!(out, "    n{m};");
            }
            out.push_str("  }\n");
        }
    }
    out.push_str("}\n");
    out
}
