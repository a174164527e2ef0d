//! Sequence-form strategies: realization plans and their flow constraints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameTree, InfoSetId, SequenceId, SequenceInfo};
use crate::scalar::Scalar;

/// Absolute slack for the flow constraints.
pub const FLOW_TOL: f64 = 1e-9;

/// Probability of every sequence of one player, indexed by [`SequenceId`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationPlan<T> {
    pub player: usize,
    pub probs: Vec<T>,
}

impl<T: Scalar> RealizationPlan<T> {
    pub fn new(player: usize, probs: Vec<T>) -> Self {
        Self { player, probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, seq: SequenceId) -> T {
        self.probs[seq.0]
    }

    /// Plan induced by a behavioral strategy.
    pub fn from_behavior(
        g: &GameTree<T>,
        player: usize,
        mut behavior: impl FnMut(InfoSetId, usize) -> T,
    ) -> Self {
        let mut probs = vec![T::zero(); g.num_sequences(player)];
        probs[0] = T::one();
        for &id in g.player_infosets(player) {
            let info = g.infoset(id);
            let base = probs[info.parent_sequence.0];
            for a in 0..info.num_actions() {
                probs[info.child_sequence(a).0] = base * behavior(id, a);
            }
        }
        Self { player, probs }
    }

    /// Every information set splits its mass evenly.
    pub fn uniform(g: &GameTree<T>, player: usize) -> Self {
        Self::from_behavior(g, player, |id, _| {
            T::one() / T::from_count(g.infoset(id).num_actions())
        })
    }

    /// Sets entries in `[-tol, 0)` to zero.
    pub fn clamp_negatives(&mut self, tol: T) {
        for p in &mut self.probs {
            if *p < T::zero() && *p >= -tol {
                *p = T::zero();
            }
        }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> RealizationPlan<U> {
        RealizationPlan {
            player: self.player,
            probs: self.probs.iter().map(|&p| f(p)).collect(),
        }
    }
}

/// A realization plan with every entry in {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PurePlan {
    pub player: usize,
    pub active: Vec<bool>,
}

impl PurePlan {
    pub fn get(&self, seq: SequenceId) -> bool {
        self.active[seq.0]
    }

    pub fn to_realization<T: Scalar>(&self) -> RealizationPlan<T> {
        RealizationPlan {
            player: self.player,
            probs: self
                .active
                .iter()
                .map(|&a| if a { T::one() } else { T::zero() })
                .collect(),
        }
    }

    /// Reads a plan whose entries are within `tol` of 0 or 1.
    pub fn from_realization<T: Scalar>(plan: &RealizationPlan<T>, tol: T) -> Option<Self> {
        let half = T::one() / (T::one() + T::one());
        let mut active = Vec::with_capacity(plan.len());
        for &p in &plan.probs {
            let on = p >= half;
            let target = if on { T::one() } else { T::zero() };
            if (p - target).abs() > tol {
                return None;
            }
            active.push(on);
        }
        Some(Self {
            player: plan.player,
            active,
        })
    }

    /// The plan choosing the first action at every reachable information set.
    pub fn first_actions<T: Scalar>(g: &GameTree<T>, player: usize) -> Self {
        let mut active = vec![false; g.num_sequences(player)];
        active[0] = true;
        for &id in g.player_infosets(player) {
            let info = g.infoset(id);
            if active[info.parent_sequence.0] {
                active[info.first_sequence.0] = true;
            }
        }
        Self { player, active }
    }

    /// Active sequence indices.
    pub fn support(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&i| self.active[i]).collect()
    }
}

/// The player's sequences in topological order; index 0 is the empty sequence.
pub fn enumerate_sequences<T: Scalar>(g: &GameTree<T>, player: usize) -> &[SequenceInfo] {
    g.sequences(player)
}

/// Largest absolute violation of the flow constraints, or an error if the
/// plan has the wrong length.
pub fn flow_residual<T: Scalar>(plan: &RealizationPlan<T>, g: &GameTree<T>) -> Result<T> {
    let expected = g.num_sequences(plan.player);
    if plan.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: plan.len(),
        });
    }
    let mut worst = (plan.probs[0] - T::one()).abs();
    for &id in g.player_infosets(plan.player) {
        let info = g.infoset(id);
        let total = info
            .child_sequences()
            .fold(T::zero(), |acc, s| acc + plan.get(s));
        worst = worst.max_of((total - plan.get(info.parent_sequence)).abs());
    }
    for &p in &plan.probs {
        if p < T::zero() {
            worst = worst.max_of(-p);
        }
    }
    Ok(worst)
}

/// Whether the plan satisfies `r(∅) = 1`, flow conservation at every
/// information set, and non-negativity, within [`FLOW_TOL`].
pub fn validate_plan<T: Scalar>(plan: &RealizationPlan<T>, g: &GameTree<T>) -> Result<bool> {
    Ok(flow_residual(plan, g)? <= T::tol(FLOW_TOL))
}

/// A uniformly random reduced pure strategy: one action at every reachable
/// information set, zero on unreachable sequences. Deterministic in `seed`.
pub fn random_pure_plan<T: Scalar>(g: &GameTree<T>, player: usize, seed: u64) -> PurePlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_pure_plan_with(g, player, &mut rng)
}

pub fn random_pure_plan_with<T: Scalar, R: Rng>(
    g: &GameTree<T>,
    player: usize,
    rng: &mut R,
) -> PurePlan {
    let mut active = vec![false; g.num_sequences(player)];
    active[0] = true;
    for &id in g.player_infosets(player) {
        let info = g.infoset(id);
        if active[info.parent_sequence.0] {
            let a = rng.gen_range(0..info.num_actions());
            active[info.child_sequence(a).0] = true;
        }
    }
    PurePlan { player, active }
}

/// A random mixed plan from random behavior probabilities.
pub fn random_plan_with<T: Scalar, R: Rng>(
    g: &GameTree<T>,
    player: usize,
    rng: &mut R,
) -> RealizationPlan<T> {
    RealizationPlan::from_behavior(g, player, {
        let mut cache: Option<(InfoSetId, Vec<f64>)> = None;
        move |id, a| {
            if cache.as_ref().map(|c| c.0) != Some(id) {
                let k = g.infoset(id).num_actions();
                let raw: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 1e-3).collect();
                let total: f64 = raw.iter().sum();
                cache = Some((id, raw.into_iter().map(|x| x / total).collect()));
            }
            T::from_f64_lossy(cache.as_ref().expect("filled").1[a])
        }
    })
}

/// Projects a nearly valid plan onto the flow constraints top-down: the root
/// gets mass one and every information set rescales its children to the
/// parent's mass (all on the first action if the children carry none).
pub fn repair_flow<T: Scalar>(plan: &mut RealizationPlan<T>, g: &GameTree<T>) {
    plan.probs[0] = T::one();
    for p in &mut plan.probs {
        if *p < T::zero() {
            *p = T::zero();
        }
    }
    for &id in g.player_infosets(plan.player) {
        let info = g.infoset(id);
        let mass = plan.get(info.parent_sequence);
        let total = info
            .child_sequences()
            .fold(T::zero(), |acc, s| acc + plan.get(s));
        if total > T::zero() {
            let scale = mass / total;
            for s in info.child_sequences() {
                plan.probs[s.0] *= scale;
            }
        } else {
            for s in info.child_sequences() {
                plan.probs[s.0] = T::zero();
            }
            plan.probs[info.first_sequence.0] = mass;
        }
    }
}

/// `c(l) · Π_i plans[i][seq_i(l)]`.
pub fn leaf_reach<T: Scalar>(g: &GameTree<T>, plans: &[RealizationPlan<T>], leaf: usize) -> T {
    plans
        .iter()
        .fold(g.leaves()[leaf].chance_reach, |acc, plan| {
            acc * plan.get(g.leaf_seq(leaf, plan.player))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::fixtures::toy3;
    use crate::game::{build_kuhn, GameBuilder, Link};

    fn one_decision() -> GameTree<f64> {
        let mut b = GameBuilder::new(3);
        let root = b.decision(Link::Root, 0, "I", &["a", "b"]).unwrap();
        b.terminal(Link::Action(root, 0), 1.0).unwrap();
        b.terminal(Link::Action(root, 1), -1.0).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn toy_sequences() {
        let g = one_decision();
        let seqs = enumerate_sequences(&g, 0);
        let labels: Vec<&str> = seqs.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, ["\u{2205}", "Ia", "Ib"]);
        assert_eq!(seqs[1].parent, SequenceId::EMPTY);
        assert_eq!(seqs[2].parent, SequenceId::EMPTY);
    }

    #[test]
    fn kuhn_sequence_counts() {
        let g: GameTree<f64> = build_kuhn(3, 4).unwrap();
        for p in 0..3 {
            assert_eq!(enumerate_sequences(&g, p).len(), 33);
        }
    }

    #[test]
    fn uniform_plan_is_valid() {
        let g: GameTree<f64> = build_kuhn(3, 4).unwrap();
        for p in 0..3 {
            assert!(validate_plan(&RealizationPlan::uniform(&g, p), &g).unwrap());
        }
    }

    #[test]
    fn root_mass_must_be_one() {
        let g: GameTree<f64> = build_kuhn(3, 4).unwrap();
        let mut plan = RealizationPlan::uniform(&g, 0);
        plan.probs[0] = 0.9;
        assert!(!validate_plan(&plan, &g).unwrap());
    }

    #[test]
    fn wrong_length_is_dimension_mismatch() {
        let g = toy3();
        let plan = RealizationPlan::new(0, vec![1.0]);
        assert!(matches!(
            validate_plan(&plan, &g),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn random_pure_plan_is_deterministic() {
        let g: GameTree<f64> = build_kuhn(3, 4).unwrap();
        assert_eq!(random_pure_plan(&g, 0, 7), random_pure_plan(&g, 0, 7));
    }

    #[test]
    fn one_infoset_pure_plan_picks_one() {
        let g = one_decision();
        for seed in 0..20 {
            let plan = random_pure_plan(&g, 0, seed);
            assert!(plan.active[1] ^ plan.active[2]);
        }
    }

    #[test]
    fn pure_round_trip() {
        let g: GameTree<f64> = build_kuhn(3, 3).unwrap();
        let pure = random_pure_plan(&g, 1, 3);
        let real: RealizationPlan<f64> = pure.to_realization();
        assert_eq!(PurePlan::from_realization(&real, 1e-6), Some(pure));
        assert!(PurePlan::from_realization(&RealizationPlan::uniform(&g, 1), 1e-6).is_none());
    }

    #[test]
    fn pure_chance_free_leaf_reach_is_one() {
        let g = toy3();
        let plans: Vec<RealizationPlan<f64>> =
            (0..3).map(|p| PurePlan::first_actions(&g, p).to_realization()).collect();
        let reached: Vec<usize> = (0..g.num_leaves())
            .filter(|&l| leaf_reach(&g, &plans, l) > 0.0)
            .collect();
        assert_eq!(reached.len(), 1);
        assert_eq!(leaf_reach(&g, &plans, reached[0]), g.leaves()[reached[0]].chance_reach);
    }

    #[test]
    fn repair_restores_flow() {
        let g: GameTree<f64> = build_kuhn(3, 3).unwrap();
        let mut plan = RealizationPlan::uniform(&g, 0);
        for (i, p) in plan.probs.iter_mut().enumerate() {
            *p += 1e-6 * (i % 3) as f64 - 1e-6;
        }
        assert!(!validate_plan(&plan, &g).unwrap());
        repair_flow(&mut plan, &g);
        assert!(flow_residual(&plan, &g).unwrap() < 1e-12);
        let mut zero = RealizationPlan::new(0, vec![0.0; plan.len()]);
        repair_flow(&mut zero, &g);
        assert!(validate_plan(&zero, &g).unwrap());
    }

    #[test]
    fn uniform_reach_sums_to_one() {
        let g: GameTree<f64> = build_kuhn(3, 4).unwrap();
        let plans: Vec<_> = (0..3).map(|p| RealizationPlan::uniform(&g, p)).collect();
        let total: f64 = (0..g.num_leaves()).map(|l| leaf_reach(&g, &plans, l)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
