//! Extensive-form game representation.
//!
//! Games are built top-down through [`GameBuilder`] and frozen into an
//! immutable [`GameTree`]. Building assigns information sets and per-player
//! sequences in depth-first order, so every sequence index is larger than
//! the index of its parent sequence.

mod json;
mod kuhn;
mod leduc;
mod validate;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use json::{GameDocument, InfoSetDoc, LeafDoc, NodeDoc, OutcomeDoc, EFG_SCHEMA};
pub use kuhn::build_kuhn;
pub use leduc::build_leduc;
pub use validate::{validate_game, ValidationReport, Violation};
#[cfg(test)]
pub(crate) use examples as fixtures;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InfoSetId(pub usize);

/// Index into one player's sequence table. Index 0 is the empty sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SequenceId(pub usize);

impl SequenceId {
    pub const EMPTY: SequenceId = SequenceId(0);

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind<T> {
    Decision {
        player: usize,
        infoset: InfoSetId,
        children: Vec<NodeId>,
    },
    Chance {
        outcomes: Vec<(T, NodeId)>,
    },
    /// Payoff to the team; the adversary receives its negation.
    Terminal { team_payoff: T, chance_reach: T },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node<T> {
    pub kind: NodeKind<T>,
    pub parent: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfoSet {
    pub id: InfoSetId,
    pub owner: usize,
    pub label: String,
    pub actions: Vec<String>,
    pub members: Vec<NodeId>,
    /// The owner's sequence leading to this information set.
    pub parent_sequence: SequenceId,
    /// Sequence of the first action; action `a` maps to `first_sequence + a`.
    pub first_sequence: SequenceId,
}

impl InfoSet {
    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn child_sequence(&self, action: usize) -> SequenceId {
        SequenceId(self.first_sequence.0 + action)
    }

    pub fn child_sequences(&self) -> impl Iterator<Item = SequenceId> + '_ {
        (0..self.actions.len()).map(|a| self.child_sequence(a))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceInfo {
    /// Information set where the last action was taken (`None` for the empty sequence).
    pub infoset: Option<InfoSetId>,
    pub action: usize,
    pub parent: SequenceId,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leaf<T> {
    pub node: NodeId,
    pub team_payoff: T,
    pub chance_reach: T,
}

/// Immutable extensive-form game with a team of players `0..n-1` and the
/// adversary `n-1`.
#[derive(Debug, Clone)]
pub struct GameTree<T> {
    num_players: usize,
    nodes: Vec<Node<T>>,
    root: NodeId,
    infosets: Vec<InfoSet>,
    player_infosets: Vec<Vec<InfoSetId>>,
    sequences: Vec<Vec<SequenceInfo>>,
    /// Per player, per sequence: information sets whose parent sequence it is.
    seq_infosets: Vec<Vec<Vec<InfoSetId>>>,
    /// Flat `nodes.len() * num_players` table of each player's sequence at each node.
    node_seqs: Vec<u32>,
    leaves: Vec<Leaf<T>>,
    build_issues: Vec<Violation>,
}

impl<T: Scalar> GameTree<T> {
    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn adversary(&self) -> usize {
        self.num_players - 1
    }

    /// Team members in seat order.
    pub fn team(&self) -> std::ops::Range<usize> {
        0..self.num_players - 1
    }

    pub fn team_size(&self) -> usize {
        self.num_players - 1
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node<T> {
        &self.nodes[id.0]
    }

    pub fn infosets(&self) -> &[InfoSet] {
        &self.infosets
    }

    pub fn infoset(&self, id: InfoSetId) -> &InfoSet {
        &self.infosets[id.0]
    }

    pub fn player_infosets(&self, player: usize) -> &[InfoSetId] {
        &self.player_infosets[player]
    }

    pub fn sequences(&self, player: usize) -> &[SequenceInfo] {
        &self.sequences[player]
    }

    pub fn num_sequences(&self, player: usize) -> usize {
        self.sequences[player].len()
    }

    /// Information sets of `player` reached right after playing `seq`.
    pub fn infosets_after(&self, player: usize, seq: SequenceId) -> &[InfoSetId] {
        &self.seq_infosets[player][seq.0]
    }

    pub fn sequence_label(&self, player: usize, seq: SequenceId) -> &str {
        &self.sequences[player][seq.0].label
    }

    pub fn leaves(&self) -> &[Leaf<T>] {
        &self.leaves
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn node_seq(&self, node: NodeId, player: usize) -> SequenceId {
        SequenceId(self.node_seqs[node.0 * self.num_players + player] as usize)
    }

    /// `seq_player(leaf)` for the leaf at position `leaf` of [`Self::leaves`].
    pub fn leaf_seq(&self, leaf: usize, player: usize) -> SequenceId {
        self.node_seq(self.leaves[leaf].node, player)
    }

    pub(crate) fn build_issues(&self) -> &[Violation] {
        &self.build_issues
    }

    /// `max_l u_T(l) - min_l u_T(l)`.
    pub fn utility_range(&self) -> T {
        let mut it = self.leaves.iter().map(|l| l.team_payoff);
        let Some(first) = it.next() else {
            return T::zero();
        };
        let (lo, hi) = it.fold((first, first), |(lo, hi), u| (lo.min_of(u), hi.max_of(u)));
        hi - lo
    }

    pub fn min_payoff(&self) -> T {
        self.leaves
            .iter()
            .map(|l| l.team_payoff)
            .fold(None, |acc: Option<T>, u| Some(acc.map_or(u, |a| a.min_of(u))))
            .unwrap_or_else(T::zero)
    }

    pub fn max_abs_payoff(&self) -> T {
        self.leaves
            .iter()
            .fold(T::zero(), |acc, l| acc.max_of(l.team_payoff.abs()))
    }

    /// Converts payoffs and probabilities to another scalar type.
    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(T) -> U) -> GameTree<U> {
        let nodes = self
            .nodes
            .iter()
            .map(|n| Node {
                parent: n.parent,
                kind: match &n.kind {
                    NodeKind::Decision { player, infoset, children } => NodeKind::Decision {
                        player: *player,
                        infoset: *infoset,
                        children: children.clone(),
                    },
                    NodeKind::Chance { outcomes } => NodeKind::Chance {
                        outcomes: outcomes.iter().map(|&(p, c)| (f(p), c)).collect(),
                    },
                    NodeKind::Terminal { team_payoff, chance_reach } => NodeKind::Terminal {
                        team_payoff: f(*team_payoff),
                        chance_reach: f(*chance_reach),
                    },
                },
            })
            .collect();
        GameTree {
            num_players: self.num_players,
            nodes,
            root: self.root,
            infosets: self.infosets.clone(),
            player_infosets: self.player_infosets.clone(),
            sequences: self.sequences.clone(),
            seq_infosets: self.seq_infosets.clone(),
            node_seqs: self.node_seqs.clone(),
            leaves: self
                .leaves
                .iter()
                .map(|l| Leaf {
                    node: l.node,
                    team_payoff: f(l.team_payoff),
                    chance_reach: f(l.chance_reach),
                })
                .collect(),
            build_issues: self.build_issues.clone(),
        }
    }
}

/// Where a newly created node attaches.
#[derive(Debug, Clone, Copy)]
pub enum Link<T> {
    Root,
    /// Child reached by action index `usize` at a decision node.
    Action(NodeId, usize),
    /// Chance outcome with the given probability.
    Outcome(NodeId, T),
}

#[derive(Debug)]
enum Proto<T> {
    Decision {
        player: usize,
        infoset: usize,
        children: Vec<Option<NodeId>>,
    },
    Chance {
        outcomes: Vec<(T, NodeId)>,
    },
    Terminal {
        team_payoff: T,
    },
}

#[derive(Debug)]
struct ProtoInfoSet {
    owner: usize,
    label: String,
    actions: Vec<String>,
}

/// Top-down constructor for [`GameTree`].
///
/// Information sets are identified by `(player, label)`; decision nodes
/// sharing a label belong to the same set. Structural problems that do not
/// prevent building (perfect-recall breaks, mismatched action labels,
/// non-normalized chance, non-zero-sum payoffs) are recorded and surface in
/// [`validate_game`].
#[derive(Debug)]
pub struct GameBuilder<T> {
    num_players: usize,
    nodes: Vec<Proto<T>>,
    parents: Vec<Option<NodeId>>,
    infoset_index: HashMap<(usize, String), usize>,
    infosets: Vec<ProtoInfoSet>,
    root: Option<NodeId>,
    issues: Vec<Violation>,
}

impl<T: Scalar> GameBuilder<T> {
    pub fn new(num_players: usize) -> Self {
        Self {
            num_players,
            nodes: Vec::new(),
            parents: Vec::new(),
            infoset_index: HashMap::new(),
            infosets: Vec::new(),
            root: None,
            issues: Vec::new(),
        }
    }

    pub fn with_capacity(num_players: usize, nodes: usize) -> Self {
        let mut b = Self::new(num_players);
        b.nodes.reserve(nodes);
        b.parents.reserve(nodes);
        b
    }

    pub fn decision(
        &mut self,
        link: Link<T>,
        player: usize,
        infoset: &str,
        actions: &[&str],
    ) -> Result<NodeId> {
        if player >= self.num_players {
            return Err(Error::MalformedGame(format!("player {player} out of range")));
        }
        if actions.is_empty() {
            return Err(Error::MalformedGame(format!("infoset {infoset} has no actions")));
        }
        let key = (player, infoset.to_string());
        let idx = match self.infoset_index.get(&key) {
            Some(&idx) => idx,
            None => {
                let idx = self.infosets.len();
                self.infosets.push(ProtoInfoSet {
                    owner: player,
                    label: infoset.to_string(),
                    actions: actions.iter().map(|a| a.to_string()).collect(),
                });
                self.infoset_index.insert(key, idx);
                idx
            }
        };
        let known = &self.infosets[idx].actions;
        if known.len() != actions.len() || known.iter().zip(actions).any(|(a, b)| a != b) {
            self.issues.push(Violation::ActionSetMismatch {
                infoset: infoset.to_string(),
            });
        }
        let width = self.infosets[idx].actions.len().max(actions.len());
        self.push(
            link,
            Proto::Decision {
                player,
                infoset: idx,
                children: vec![None; width],
            },
        )
    }

    pub fn chance(&mut self, link: Link<T>) -> Result<NodeId> {
        self.push(link, Proto::Chance { outcomes: Vec::new() })
    }

    pub fn terminal(&mut self, link: Link<T>, team_payoff: T) -> Result<NodeId> {
        self.push(link, Proto::Terminal { team_payoff })
    }

    /// Terminal from a full payoff vector; the team payoff is the sum over
    /// team members and must equal the negated adversary payoff.
    pub fn terminal_with_payoffs(&mut self, link: Link<T>, payoffs: &[T]) -> Result<NodeId> {
        if payoffs.len() != self.num_players {
            return Err(Error::DimensionMismatch {
                expected: self.num_players,
                got: payoffs.len(),
            });
        }
        let (team, adv) = payoffs.split_at(self.num_players - 1);
        let team_payoff = team.iter().fold(T::zero(), |acc, &u| acc + u);
        if (team_payoff + adv[0]).abs() > T::tol(1e-12) {
            self.issues.push(Violation::ZeroSumViolation {
                node: NodeId(self.nodes.len()),
                sum: (team_payoff + adv[0]).as_f64(),
            });
        }
        self.terminal(link, team_payoff)
    }

    fn push(&mut self, link: Link<T>, proto: Proto<T>) -> Result<NodeId> {
        let id = NodeId(self.nodes.len());
        let parent = match link {
            Link::Root => {
                if self.root.is_some() {
                    return Err(Error::MalformedGame("second root".into()));
                }
                self.root = Some(id);
                None
            }
            Link::Action(parent, action) => {
                match self.nodes.get_mut(parent.0) {
                    Some(Proto::Decision { children, .. }) => match children.get_mut(action) {
                        Some(slot @ None) => *slot = Some(id),
                        Some(Some(_)) => {
                            return Err(Error::MalformedGame(format!(
                                "action {action} of node {} attached twice",
                                parent.0
                            )))
                        }
                        None => {
                            return Err(Error::MalformedGame(format!(
                                "action {action} out of range at node {}",
                                parent.0
                            )))
                        }
                    },
                    _ => {
                        return Err(Error::MalformedGame(format!(
                            "node {} is not a decision node",
                            parent.0
                        )))
                    }
                }
                Some(parent)
            }
            Link::Outcome(parent, prob) => {
                match self.nodes.get_mut(parent.0) {
                    Some(Proto::Chance { outcomes }) => outcomes.push((prob, id)),
                    _ => {
                        return Err(Error::MalformedGame(format!(
                            "node {} is not a chance node",
                            parent.0
                        )))
                    }
                }
                Some(parent)
            }
        };
        self.nodes.push(proto);
        self.parents.push(parent);
        Ok(id)
    }

    /// Freezes the tree: assigns sequences depth-first, computes per-node
    /// sequences, chance reach and the leaf index.
    pub fn build(self) -> Result<GameTree<T>> {
        let n = self.num_players;
        if n < 2 {
            return Err(Error::InvalidParams("need at least two players".into()));
        }
        let root = self
            .root
            .ok_or_else(|| Error::MalformedGame("no root node".into()))?;
        let mut issues = self.issues;
        let count = self.nodes.len();

        let mut infoset_ids: Vec<Option<InfoSetId>> = vec![None; self.infosets.len()];
        let mut infosets: Vec<InfoSet> = Vec::new();
        let mut player_infosets: Vec<Vec<InfoSetId>> = vec![Vec::new(); n];
        let mut sequences: Vec<Vec<SequenceInfo>> = (0..n)
            .map(|_| {
                vec![SequenceInfo {
                    infoset: None,
                    action: 0,
                    parent: SequenceId::EMPTY,
                    label: "\u{2205}".to_string(),
                }]
            })
            .collect();
        let mut node_seqs = vec![0u32; count * n];
        let mut reach: Vec<T> = vec![T::zero(); count];
        let mut visited = vec![false; count];
        let mut leaves = Vec::new();
        let mut by_id: Vec<Option<Node<T>>> = (0..count).map(|_| None).collect();

        // Depth-first preorder; children pushed in reverse to visit them in order.
        reach[root.0] = T::one();
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut visited[id.0], true) {
                return Err(Error::MalformedGame(format!("node {} reached twice", id.0)));
            }
            match &self.nodes[id.0] {
                Proto::Decision { player, infoset, children } => {
                    let player = *player;
                    let current = node_seqs[id.0 * n + player];
                    let info_id = match infoset_ids[*infoset] {
                        Some(i) => {
                            if infosets[i.0].parent_sequence.0 as u32 != current {
                                issues.push(Violation::PerfectRecallViolation {
                                    infoset: infosets[i.0].label.clone(),
                                    node: id,
                                });
                            }
                            i
                        }
                        None => {
                            let proto = &self.infosets[*infoset];
                            let i = InfoSetId(infosets.len());
                            let first = SequenceId(sequences[player].len());
                            for (a, name) in proto.actions.iter().enumerate() {
                                sequences[player].push(SequenceInfo {
                                    infoset: Some(i),
                                    action: a,
                                    parent: SequenceId(current as usize),
                                    label: format!("{}{}", proto.label, name),
                                });
                            }
                            infosets.push(InfoSet {
                                id: i,
                                owner: proto.owner,
                                label: proto.label.clone(),
                                actions: proto.actions.clone(),
                                members: Vec::new(),
                                parent_sequence: SequenceId(current as usize),
                                first_sequence: first,
                            });
                            player_infosets[player].push(i);
                            infoset_ids[*infoset] = Some(i);
                            i
                        }
                    };
                    infosets[info_id.0].members.push(id);
                    let width = infosets[info_id.0].actions.len();
                    let first = infosets[info_id.0].first_sequence.0;
                    let mut kids = Vec::with_capacity(children.len());
                    for (a, child) in children.iter().enumerate() {
                        let child = child.ok_or_else(|| {
                            Error::MalformedGame(format!("node {} misses child {a}", id.0))
                        })?;
                        for p in 0..n {
                            node_seqs[child.0 * n + p] = node_seqs[id.0 * n + p];
                        }
                        // Extra children beyond the set's action list only occur
                        // with an ActionSetMismatch; they keep the parent sequence.
                        if a < width {
                            node_seqs[child.0 * n + player] = (first + a) as u32;
                        }
                        reach[child.0] = reach[id.0];
                        kids.push(child);
                    }
                    stack.extend(kids.iter().rev().copied());
                    by_id[id.0] = Some(Node {
                        kind: NodeKind::Decision {
                            player,
                            infoset: info_id,
                            children: kids,
                        },
                        parent: self.parents[id.0],
                    });
                }
                Proto::Chance { outcomes } => {
                    if outcomes.is_empty() {
                        return Err(Error::MalformedGame(format!(
                            "chance node {} has no outcomes",
                            id.0
                        )));
                    }
                    let total = outcomes.iter().fold(T::zero(), |acc, &(p, _)| acc + p);
                    let negative = outcomes.iter().any(|&(p, _)| p < T::zero());
                    if negative || (total - T::one()).abs() > T::tol(1e-12) {
                        issues.push(Violation::ChanceNormalizationViolation {
                            node: id,
                            total: total.as_f64(),
                        });
                    }
                    for &(p, child) in outcomes {
                        for q in 0..n {
                            node_seqs[child.0 * n + q] = node_seqs[id.0 * n + q];
                        }
                        reach[child.0] = reach[id.0] * p;
                    }
                    stack.extend(outcomes.iter().rev().map(|&(_, c)| c));
                    by_id[id.0] = Some(Node {
                        kind: NodeKind::Chance {
                            outcomes: outcomes.clone(),
                        },
                        parent: self.parents[id.0],
                    });
                }
                Proto::Terminal { team_payoff } => {
                    leaves.push(Leaf {
                        node: id,
                        team_payoff: *team_payoff,
                        chance_reach: reach[id.0],
                    });
                    by_id[id.0] = Some(Node {
                        kind: NodeKind::Terminal {
                            team_payoff: *team_payoff,
                            chance_reach: reach[id.0],
                        },
                        parent: self.parents[id.0],
                    });
                }
            }
        }
        if let Some(orphan) = visited.iter().position(|v| !v) {
            return Err(Error::MalformedGame(format!("node {orphan} unreachable from root")));
        }

        let nodes: Vec<Node<T>> = by_id.into_iter().map(|n| n.expect("visited")).collect();

        let mut seq_infosets: Vec<Vec<Vec<InfoSetId>>> =
            sequences.iter().map(|s| vec![Vec::new(); s.len()]).collect();
        for info in &infosets {
            seq_infosets[info.owner][info.parent_sequence.0].push(info.id);
        }

        Ok(GameTree {
            num_players: n,
            nodes,
            root,
            infosets,
            player_infosets,
            sequences,
            seq_infosets,
            node_seqs,
            leaves,
            build_issues: issues,
        })
    }
}

/// Small hand-built games used as oracles and in documentation.
pub mod examples {
    use super::*;

    /// Three players: player 0 picks L/R, player 1 picks l/r without seeing
    /// it, then the adversary (player 2) picks a/b after observing player 0.
    /// Eight leaves, no chance.
    pub fn toy3() -> GameTree<f64> {
        let mut b = GameBuilder::new(3);
        let root = b.decision(Link::Root, 0, "P0", &["L", "R"]).unwrap();
        let pay = [[3.0, -1.0, 0.0, 2.0], [-2.0, 1.0, 4.0, -3.0]];
        for (x, first) in ["L", "R"].iter().enumerate() {
            let p1 = b.decision(Link::Action(root, x), 1, "P1", &["l", "r"]).unwrap();
            for y in 0..2 {
                let adv = b
                    .decision(Link::Action(p1, y), 2, &format!("A{first}"), &["a", "b"])
                    .unwrap();
                for z in 0..2 {
                    b.terminal(Link::Action(adv, z), pay[x][2 * y + z]).unwrap();
                }
            }
        }
        b.build().unwrap()
    }

    /// One team decision with two actions, dummy teammate, adversary decides
    /// without observing: matching pennies for the team.
    pub fn pennies() -> GameTree<f64> {
        let mut b = GameBuilder::new(3);
        let root = b.decision(Link::Root, 0, "T", &["h", "t"]).unwrap();
        for x in 0..2 {
            let d = b.decision(Link::Action(root, x), 1, "D", &["d"]).unwrap();
            let adv = b.decision(Link::Action(d, 0), 2, "A", &["h", "t"]).unwrap();
            for z in 0..2 {
                let u = if x == z { 1.0 } else { -1.0 };
                b.terminal(Link::Action(adv, z), u).unwrap();
            }
        }
        b.build().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn toy_structure() {
        let g = toy3();
        assert_eq!(g.num_leaves(), 8);
        assert_eq!(g.num_sequences(0), 3);
        assert_eq!(g.num_sequences(1), 3);
        assert_eq!(g.num_sequences(2), 5);
        assert_eq!(g.player_infosets(1).len(), 1);
        assert_eq!(g.infoset(g.player_infosets(1)[0]).members.len(), 2);
        for (i, leaf) in g.leaves().iter().enumerate() {
            assert_eq!(leaf.chance_reach, 1.0);
            assert!(!g.leaf_seq(i, 0).is_empty());
        }
        assert_eq!(g.utility_range(), 7.0);
    }

    #[test]
    fn sequences_are_topological() {
        let g = toy3();
        for p in 0..3 {
            for (i, s) in g.sequences(p).iter().enumerate().skip(1) {
                assert!(s.parent.0 < i);
            }
        }
    }

    #[test]
    fn missing_child_is_an_error() {
        let mut b = GameBuilder::<f64>::new(3);
        let root = b.decision(Link::Root, 0, "x", &["a", "b"]).unwrap();
        b.terminal(Link::Action(root, 0), 1.0).unwrap();
        assert!(matches!(b.build(), Err(Error::MalformedGame(_))));
    }

    #[test]
    fn double_attach_is_an_error() {
        let mut b = GameBuilder::<f64>::new(3);
        let root = b.decision(Link::Root, 0, "x", &["a"]).unwrap();
        b.terminal(Link::Action(root, 0), 1.0).unwrap();
        assert!(b.terminal(Link::Action(root, 0), 1.0).is_err());
    }
}
