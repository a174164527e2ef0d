//! `efg-v1` JSON documents: a flat node array with child indices, the
//! information sets, and the leaf index.

use serde::{Deserialize, Serialize};

use super::{GameBuilder, GameTree, Link, NodeId, NodeKind};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const EFG_SCHEMA: &str = "efg-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameDocument<T> {
    pub schema: String,
    pub players: usize,
    pub root: usize,
    pub nodes: Vec<NodeDoc<T>>,
    pub infosets: Vec<InfoSetDoc>,
    pub leaf_index: Vec<LeafDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeDoc<T> {
    Decision {
        player: usize,
        infoset: usize,
        children: Vec<usize>,
    },
    Chance {
        outcomes: Vec<OutcomeDoc<T>>,
    },
    Terminal {
        team_payoff: T,
        chance_reach: T,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDoc<T> {
    pub prob: T,
    pub child: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoSetDoc {
    pub owner: usize,
    pub label: String,
    pub actions: Vec<String>,
    pub parent_sequence: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafDoc {
    pub node: usize,
    pub sequences: Vec<usize>,
}

impl<T: Scalar> GameTree<T> {
    pub fn to_document(&self) -> GameDocument<T> {
        let nodes = self
            .nodes()
            .iter()
            .map(|n| match &n.kind {
                NodeKind::Decision {
                    player,
                    infoset,
                    children,
                } => NodeDoc::Decision {
                    player: *player,
                    infoset: infoset.0,
                    children: children.iter().map(|c| c.0).collect(),
                },
                NodeKind::Chance { outcomes } => NodeDoc::Chance {
                    outcomes: outcomes
                        .iter()
                        .map(|&(prob, c)| OutcomeDoc { prob, child: c.0 })
                        .collect(),
                },
                NodeKind::Terminal {
                    team_payoff,
                    chance_reach,
                } => NodeDoc::Terminal {
                    team_payoff: *team_payoff,
                    chance_reach: *chance_reach,
                },
            })
            .collect();
        let infosets = self
            .infosets()
            .iter()
            .map(|i| InfoSetDoc {
                owner: i.owner,
                label: i.label.clone(),
                actions: i.actions.clone(),
                parent_sequence: i.parent_sequence.0,
            })
            .collect();
        let leaf_index = (0..self.num_leaves())
            .map(|l| LeafDoc {
                node: self.leaves()[l].node.0,
                sequences: (0..self.num_players())
                    .map(|p| self.leaf_seq(l, p).0)
                    .collect(),
            })
            .collect();
        GameDocument {
            schema: EFG_SCHEMA.to_string(),
            players: self.num_players(),
            root: self.root().0,
            nodes,
            infosets,
            leaf_index,
        }
    }

    /// Rebuilds a game from a document. Information sets and sequences are
    /// recomputed; the stored leaf index must agree with the recomputation.
    pub fn from_document(doc: &GameDocument<T>) -> Result<Self> {
        if doc.schema != EFG_SCHEMA {
            return Err(Error::MalformedGame(format!(
                "schema {:?}, expected {EFG_SCHEMA:?}",
                doc.schema
            )));
        }
        let mut b = GameBuilder::with_capacity(doc.players, doc.nodes.len());
        // doc index -> builder id
        let mut ids: Vec<Option<NodeId>> = vec![None; doc.nodes.len()];
        let mut stack: Vec<(usize, Link<T>)> = vec![(doc.root, Link::Root)];
        while let Some((idx, link)) = stack.pop() {
            let node = doc
                .nodes
                .get(idx)
                .ok_or_else(|| Error::MalformedGame(format!("node index {idx} out of range")))?;
            if ids[idx].is_some() {
                return Err(Error::MalformedGame(format!("node {idx} has two parents")));
            }
            let id = match node {
                NodeDoc::Decision {
                    player,
                    infoset,
                    children,
                } => {
                    let info = doc.infosets.get(*infoset).ok_or_else(|| {
                        Error::MalformedGame(format!("infoset index {infoset} out of range"))
                    })?;
                    if info.actions.len() != children.len() {
                        return Err(Error::MalformedGame(format!(
                            "node {idx}: {} children for {} actions",
                            children.len(),
                            info.actions.len()
                        )));
                    }
                    let actions: Vec<&str> = info.actions.iter().map(String::as_str).collect();
                    let id = b.decision(link, *player, &info.label, &actions)?;
                    for (a, &c) in children.iter().enumerate().rev() {
                        stack.push((c, Link::Action(id, a)));
                    }
                    id
                }
                NodeDoc::Chance { outcomes } => {
                    let id = b.chance(link)?;
                    for o in outcomes.iter().rev() {
                        stack.push((o.child, Link::Outcome(id, o.prob)));
                    }
                    id
                }
                NodeDoc::Terminal { team_payoff, .. } => b.terminal(link, *team_payoff)?,
            };
            ids[idx] = Some(id);
        }
        let g = b.build()?;

        let mut expected: Vec<(NodeId, Vec<usize>)> = doc
            .leaf_index
            .iter()
            .map(|l| {
                let id = ids
                    .get(l.node)
                    .copied()
                    .flatten()
                    .ok_or_else(|| Error::MalformedGame(format!("leaf node {} unknown", l.node)))?;
                Ok((id, l.sequences.clone()))
            })
            .collect::<Result<_>>()?;
        expected.sort();
        let mut actual: Vec<(NodeId, Vec<usize>)> = (0..g.num_leaves())
            .map(|l| {
                (
                    g.leaves()[l].node,
                    (0..g.num_players()).map(|p| g.leaf_seq(l, p).0).collect(),
                )
            })
            .collect();
        actual.sort();
        if expected != actual {
            return Err(Error::MalformedGame(
                "leaf_index disagrees with the tree".into(),
            ));
        }
        Ok(g)
    }

    pub fn to_json(&self) -> Result<String>
    where
        T: Serialize,
    {
        Ok(serde_json::to_string(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let doc: GameDocument<T> = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::toy3;
    use super::super::{build_kuhn, validate_game};
    use super::*;

    #[test]
    fn kuhn_document_round_trip() {
        let g: GameTree<f64> = build_kuhn(3, 3).unwrap();
        let text = g.to_json().unwrap();
        assert!(text.contains("\"schema\":\"efg-v1\""));
        let back = GameTree::<f64>::from_json(&text).unwrap();
        assert_eq!(back.to_document(), g.to_document());
        assert!(validate_game(&back).is_valid());
    }

    #[test]
    fn tampered_leaf_index_is_rejected() {
        let g = toy3();
        let mut doc = g.to_document();
        doc.leaf_index[0].sequences[0] = 2;
        doc.leaf_index[1].sequences[0] = 1;
        assert!(GameTree::from_document(&doc).is_err());
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let mut doc = toy3().to_document();
        doc.schema = "efg-v0".into();
        assert!(GameTree::from_document(&doc).is_err());
    }
}
