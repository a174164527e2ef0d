use serde::{Deserialize, Serialize};

use super::{GameTree, NodeId, NodeKind, SequenceId};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    PerfectRecallViolation { infoset: String, node: NodeId },
    ActionSetMismatch { infoset: String },
    ChanceNormalizationViolation { node: NodeId, total: f64 },
    ZeroSumViolation { node: NodeId, sum: f64 },
    LeafIndexMismatch { node: NodeId, player: usize },
    LeafCoverage { node: NodeId },
    TooFewPlayers { players: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, pred: impl Fn(&Violation) -> bool) -> bool {
        self.violations.iter().any(pred)
    }
}

/// Checks the structural assumptions the solvers rely on. Violations are
/// returned as data; an empty report means the game is usable.
pub fn validate_game<T: Scalar>(g: &GameTree<T>) -> ValidationReport {
    let mut violations: Vec<Violation> = g.build_issues().to_vec();
    if g.num_players() < 3 {
        violations.push(Violation::TooFewPlayers {
            players: g.num_players(),
        });
    }

    for info in g.infosets() {
        for &m in &info.members {
            if g.node_seq(m, info.owner) != info.parent_sequence {
                let v = Violation::PerfectRecallViolation {
                    infoset: info.label.clone(),
                    node: m,
                };
                if !violations.contains(&v) {
                    violations.push(v);
                }
            }
        }
    }

    let mut seen = vec![false; g.nodes().len()];
    for (i, leaf) in g.leaves().iter().enumerate() {
        seen[leaf.node.0] = true;
        let walked = walk_sequences(g, leaf.node);
        for (p, &s) in walked.iter().enumerate() {
            if g.leaf_seq(i, p) != s {
                violations.push(Violation::LeafIndexMismatch {
                    node: leaf.node,
                    player: p,
                });
            }
        }
    }
    for (i, node) in g.nodes().iter().enumerate() {
        if matches!(node.kind, NodeKind::Terminal { .. }) && !seen[i] {
            violations.push(Violation::LeafCoverage { node: NodeId(i) });
        }
    }

    ValidationReport { violations }
}

/// Recomputes every player's sequence at `node` by walking parent links.
pub(crate) fn walk_sequences<T: Scalar>(g: &GameTree<T>, node: NodeId) -> Vec<SequenceId> {
    let mut out: Vec<Option<SequenceId>> = vec![None; g.num_players()];
    let mut child = node;
    let mut cur = g.node(node).parent;
    while let Some(id) = cur {
        if let NodeKind::Decision {
            player,
            infoset,
            children,
        } = &g.node(id).kind
        {
            if out[*player].is_none() {
                let a = children
                    .iter()
                    .position(|&c| c == child)
                    .expect("child listed at parent");
                let info = g.infoset(*infoset);
                if a < info.num_actions() {
                    out[*player] = Some(info.child_sequence(a));
                }
            }
        }
        child = id;
        cur = g.node(id).parent;
    }
    out.into_iter()
        .map(|s| s.unwrap_or(SequenceId::EMPTY))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::toy3;
    use super::super::{GameBuilder, Link};
    use super::*;

    #[test]
    fn toy_is_valid() {
        assert!(validate_game(&toy3()).is_valid());
    }

    #[test]
    fn merged_infoset_breaks_perfect_recall() {
        // Player 0 acts, then acts again in one set spanning both branches.
        let mut b = GameBuilder::<f64>::new(3);
        let root = b.decision(Link::Root, 0, "a", &["x", "y"]).unwrap();
        for i in 0..2 {
            let n = b.decision(Link::Action(root, i), 0, "b", &["u", "v"]).unwrap();
            for j in 0..2 {
                b.terminal(Link::Action(n, j), 1.0).unwrap();
            }
        }
        let g = b.build().unwrap();
        let report = validate_game(&g);
        assert!(report.has(|v| matches!(v, Violation::PerfectRecallViolation { .. })));
    }

    #[test]
    fn unnormalized_chance_is_reported() {
        let mut b = GameBuilder::<f64>::new(3);
        let root = b.chance(Link::Root).unwrap();
        b.terminal(Link::Outcome(root, 0.5), 1.0).unwrap();
        b.terminal(Link::Outcome(root, 0.4), -1.0).unwrap();
        let report = validate_game(&b.build().unwrap());
        assert!(report.has(|v| matches!(v, Violation::ChanceNormalizationViolation { .. })));
    }

    #[test]
    fn non_zero_sum_payoffs_are_reported() {
        let mut b = GameBuilder::<f64>::new(3);
        let root = b.decision(Link::Root, 2, "a", &["x", "y"]).unwrap();
        b.terminal_with_payoffs(Link::Action(root, 0), &[1.0, 1.0, -2.0]).unwrap();
        b.terminal_with_payoffs(Link::Action(root, 1), &[1.0, 1.0, 0.0]).unwrap();
        let report = validate_game(&b.build().unwrap());
        assert!(report.has(|v| matches!(v, Violation::ZeroSumViolation { .. })));
        assert_eq!(report.violations.len(), 1);
    }

    #[test]
    fn mismatched_actions_are_reported() {
        let mut b = GameBuilder::<f64>::new(3);
        let root = b.chance(Link::Root).unwrap();
        let l = b.decision(Link::Outcome(root, 0.5), 0, "s", &["a", "b"]).unwrap();
        let r = b.decision(Link::Outcome(root, 0.5), 0, "s", &["a", "c"]).unwrap();
        for n in [l, r] {
            for j in 0..2 {
                b.terminal(Link::Action(n, j), 0.0).unwrap();
            }
        }
        let report = validate_game(&b.build().unwrap());
        assert!(report.has(|v| matches!(v, Violation::ActionSetMismatch { .. })));
    }
}
