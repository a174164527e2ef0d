//! Independent oracles and certification.
//!
//! Team best responses here never touch the best-response MILP: all team
//! members but the last are enumerated over their reduced pure strategies,
//! and the last member answers by an exact sequence-form dynamic program.
//! That is the same maximum as enumerating every joint pure strategy, at a
//! fraction of the cost. The brute-force equilibrium solves the master LP
//! over pure joint columns with this exhaustive pricing, which reaches the
//! optimum of the LP over the complete column set.

use serde::{Deserialize, Serialize};

use crate::bro::solve_bro;
use crate::error::{Error, Result};
use crate::game::GameTree;
use crate::master::{find_duplicate, solve_core_lp, HybridColumn};
use crate::scalar::Scalar;
use crate::sequence::{PurePlan, RealizationPlan};

pub mod checks;

/// Default limit on the number of enumerated joint strategies.
pub const DEFAULT_CAP: u128 = 1_000_000;
/// Slack for best-response improvement checks.
pub const PRICING_TOL: f64 = 1e-9;
/// Leaf-reach slack in realization-equivalence checks.
pub const EQUIVALENCE_TOL: f64 = 1e-9;

/// Number of reduced pure strategies of `player`, saturating.
pub fn count_reduced_strategies<T: Scalar>(g: &GameTree<T>, player: usize) -> u128 {
    let n = g.num_sequences(player);
    let mut count = vec![1u128; n];
    for s in (0..n).rev() {
        let mut c = 1u128;
        for &id in g.infosets_after(player, crate::game::SequenceId(s)) {
            let sum = g
                .infoset(id)
                .child_sequences()
                .fold(0u128, |acc, x| acc.saturating_add(count[x.0]));
            c = c.saturating_mul(sum);
        }
        count[s] = c;
    }
    count[0]
}

/// Every reduced pure strategy of `player`: one action at each reachable
/// information set.
pub fn enumerate_reduced_strategies<T: Scalar>(
    g: &GameTree<T>,
    player: usize,
    cap: u128,
) -> Result<Vec<PurePlan>> {
    let total = count_reduced_strategies(g, player);
    if total > cap {
        return Err(Error::TooLarge { size: total, cap });
    }
    let sets = g.player_infosets(player);
    let mut active = vec![false; g.num_sequences(player)];
    active[0] = true;
    let mut out = Vec::with_capacity(total as usize);
    fn rec<T: Scalar>(
        g: &GameTree<T>,
        sets: &[crate::game::InfoSetId],
        k: usize,
        active: &mut Vec<bool>,
        player: usize,
        out: &mut Vec<PurePlan>,
    ) {
        let Some(&id) = sets.get(k) else {
            out.push(PurePlan {
                player,
                active: active.clone(),
            });
            return;
        };
        let info = g.infoset(id);
        if !active[info.parent_sequence.0] {
            rec(g, sets, k + 1, active, player, out);
            return;
        }
        for s in info.child_sequences() {
            active[s.0] = true;
            rec(g, sets, k + 1, active, player, out);
            active[s.0] = false;
        }
    }
    rec(g, sets, 0, &mut active, player, &mut out);
    Ok(out)
}

/// Reduced strategies of every team member, enumerated eagerly; joint
/// strategies are produced lazily.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormCatalog {
    pub per_player: Vec<Vec<PurePlan>>,
}

impl NormalFormCatalog {
    /// Catalog of `players`; the joint count must stay within `cap`.
    pub fn new<T: Scalar>(
        g: &GameTree<T>,
        players: std::ops::Range<usize>,
        cap: u128,
    ) -> Result<Self> {
        let joint = players
            .clone()
            .fold(1u128, |acc, p| acc.saturating_mul(count_reduced_strategies(g, p)));
        if joint > cap {
            return Err(Error::TooLarge { size: joint, cap });
        }
        let per_player = players
            .map(|p| enumerate_reduced_strategies(g, p, cap))
            .collect::<Result<_>>()?;
        Ok(Self { per_player })
    }

    pub fn joint_count(&self) -> u128 {
        self.per_player.iter().map(|v| v.len() as u128).product()
    }

    /// Joint strategies in odometer order (last player fastest).
    pub fn joint(&self) -> impl Iterator<Item = Vec<&PurePlan>> + '_ {
        let sizes: Vec<usize> = self.per_player.iter().map(Vec::len).collect();
        let mut idx = vec![0usize; sizes.len()];
        let mut done = sizes.iter().any(|&s| s == 0);
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let item: Vec<&PurePlan> = idx
                .iter()
                .enumerate()
                .map(|(p, &i)| &self.per_player[p][i])
                .collect();
            let mut k = idx.len();
            loop {
                if k == 0 {
                    done = true;
                    break;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < sizes[k] {
                    break;
                }
                idx[k] = 0;
            }
            Some(item)
        })
    }
}

/// Best pure plan of `player` for the linear objective `Σ_σ weights[σ]·r(σ)`.
/// Ties go to the lowest action. Returns the optimal value and the plan.
pub fn sequence_best_response<T: Scalar>(
    g: &GameTree<T>,
    player: usize,
    weights: &[T],
    maximize: bool,
) -> (T, PurePlan) {
    let n = g.num_sequences(player);
    let mut val = weights.to_vec();
    let mut choice = vec![0usize; g.infosets().len()];
    for s in (0..n).rev() {
        let mut add = T::zero();
        for &id in g.infosets_after(player, crate::game::SequenceId(s)) {
            let info = g.infoset(id);
            let mut best: Option<(usize, T)> = None;
            for a in 0..info.num_actions() {
                let v = val[info.child_sequence(a).0];
                let better = match best {
                    None => true,
                    Some((_, b)) => {
                        if maximize {
                            v > b
                        } else {
                            v < b
                        }
                    }
                };
                if better {
                    best = Some((a, v));
                }
            }
            let (a, v) = best.expect("information sets have actions");
            choice[id.0] = a;
            add += v;
        }
        val[s] += add;
    }
    let mut active = vec![false; n];
    active[0] = true;
    for &id in g.player_infosets(player) {
        let info = g.infoset(id);
        if active[info.parent_sequence.0] {
            active[info.child_sequence(choice[id.0]).0] = true;
        }
    }
    (val[0], PurePlan { player, active })
}

/// `(leaf, u·c·r_n)` for leaves with a nonzero contribution.
fn weighted_leaves<T: Scalar>(g: &GameTree<T>, r_n: &RealizationPlan<T>) -> Vec<(usize, T)> {
    let adv = g.adversary();
    g.leaves()
        .iter()
        .enumerate()
        .filter_map(|(l, leaf)| {
            let w = leaf.team_payoff * leaf.chance_reach * r_n.get(g.leaf_seq(l, adv));
            (w != T::zero()).then_some((l, w))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamBestResponse<T> {
    pub value: T,
    /// One pure plan per team member.
    pub plans: Vec<PurePlan>,
}

/// `max_{π_T} U_T(π_T, r_n)` over joint pure team strategies. All members
/// but the last are enumerated (their joint count must be within `cap`);
/// the last one answers exactly by dynamic programming.
pub fn brute_force_best_response<T: Scalar>(
    g: &GameTree<T>,
    r_n: &RealizationPlan<T>,
    cap: u128,
) -> Result<TeamBestResponse<T>> {
    let last = g.team_size() - 1;
    let catalog = NormalFormCatalog::new(g, 0..last, cap)?;
    let leaves = weighted_leaves(g, r_n);
    let mut weights = vec![T::zero(); g.num_sequences(last)];
    let mut best: Option<TeamBestResponse<T>> = None;
    for others in catalog.joint() {
        weights.iter_mut().for_each(|w| *w = T::zero());
        'leaf: for &(l, w) in &leaves {
            for p in &others {
                if !p.get(g.leaf_seq(l, p.player)) {
                    continue 'leaf;
                }
            }
            weights[g.leaf_seq(l, last).0] += w;
        }
        let (v, plan) = sequence_best_response(g, last, &weights, true);
        if best.as_ref().map_or(true, |b| v > b.value) {
            let mut plans: Vec<PurePlan> = others.into_iter().cloned().collect();
            plans.push(plan);
            best = Some(TeamBestResponse { value: v, plans });
        }
    }
    best.ok_or_else(|| Error::MalformedGame("team has no pure strategies".into()))
}

/// Full enumeration of every joint pure team strategy evaluated by a direct
/// pass over the leaves; the reference for [`brute_force_best_response`].
pub fn exhaustive_best_response<T: Scalar>(
    g: &GameTree<T>,
    r_n: &RealizationPlan<T>,
    cap: u128,
) -> Result<TeamBestResponse<T>> {
    let catalog = NormalFormCatalog::new(g, g.team(), cap)?;
    let leaves = weighted_leaves(g, r_n);
    let mut best: Option<TeamBestResponse<T>> = None;
    for joint in catalog.joint() {
        let v = leaves
            .iter()
            .filter(|&&(l, _)| joint.iter().all(|p| p.get(g.leaf_seq(l, p.player))))
            .fold(T::zero(), |acc, &(_, w)| acc + w);
        if best.as_ref().map_or(true, |b| v > b.value) {
            best = Some(TeamBestResponse {
                value: v,
                plans: joint.into_iter().cloned().collect(),
            });
        }
    }
    best.ok_or_else(|| Error::MalformedGame("team has no pure strategies".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceTmecor<T> {
    pub value: T,
    /// Joint pure team strategies with positive probability.
    pub support: Vec<(Vec<PurePlan>, T)>,
    pub adversary_plan: RealizationPlan<T>,
    /// Pure joint columns generated before the pricing certified optimality.
    pub columns: usize,
}

/// Equilibrium value of the game with the team restricted to joint pure
/// normal-form strategies, by the master LP with exhaustive pricing.
pub fn brute_force_tmecor<T: Scalar>(g: &GameTree<T>, cap: u128) -> Result<BruteForceTmecor<T>> {
    let last = g.team_size() - 1;
    // fail fast before any LP work
    NormalFormCatalog::new(g, 0..last, cap)?;
    let first: Vec<PurePlan> = g.team().map(|p| PurePlan::first_actions(g, p)).collect();
    let mut joints = vec![first.clone()];
    let mut columns = vec![HybridColumn::from_pure(g, &first)?];
    let tol = T::tol(PRICING_TOL);
    loop {
        let sol = solve_core_lp(g, &columns)?;
        let br = brute_force_best_response(g, &sol.adversary_plan, cap)?;
        if br.value <= sol.value + tol {
            let support = joints
                .into_iter()
                .zip(&sol.mixture)
                .filter(|(_, &x)| x > tol)
                .map(|(j, &x)| (j, x))
                .collect();
            return Ok(BruteForceTmecor {
                value: sol.value,
                support,
                adversary_plan: sol.adversary_plan,
                columns: columns.len(),
            });
        }
        let col = HybridColumn::from_pure(g, &br.plans)?;
        if find_duplicate(&columns, &col).is_some() {
            return Err(Error::SolverFailure(format!(
                "pricing returned an existing column with gain {}",
                (br.value - sol.value).as_f64()
            )));
        }
        joints.push(br.plans);
        columns.push(col);
    }
}

/// Team reach of every leaf under the mixture `Σ_k weights[k]·columns[k]`.
pub fn team_leaf_reach<T: Scalar>(
    g: &GameTree<T>,
    columns: &[HybridColumn<T>],
    weights: &[T],
) -> Vec<T> {
    (0..g.num_leaves())
        .map(|l| {
            columns
                .iter()
                .zip(weights)
                .fold(T::zero(), |acc, (c, &w)| acc + w * c.team_reach(g, l))
        })
        .collect()
}

/// `min_{r_n} U_T(mixture, r_n)` with the minimizing pure adversary plan,
/// by a bottom-up pass over the adversary's sequences.
pub fn adversary_best_response<T: Scalar>(
    g: &GameTree<T>,
    columns: &[HybridColumn<T>],
    weights: &[T],
) -> (T, PurePlan) {
    let adv = g.adversary();
    let reach = team_leaf_reach(g, columns, weights);
    let mut w = vec![T::zero(); g.num_sequences(adv)];
    for (l, leaf) in g.leaves().iter().enumerate() {
        w[g.leaf_seq(l, adv).0] += reach[l] * leaf.team_payoff * leaf.chance_reach;
    }
    sequence_best_response(g, adv, &w, false)
}

/// Whether the two team strategies reach every leaf with the same
/// probability.
pub fn check_realization_equivalence<T: Scalar>(
    g: &GameTree<T>,
    a: (&[HybridColumn<T>], &[T]),
    b: (&[HybridColumn<T>], &[T]),
) -> bool {
    let ra = team_leaf_reach(g, a.0, a.1);
    let rb = team_leaf_reach(g, b.0, b.1);
    let tol = T::tol(EQUIVALENCE_TOL);
    ra.iter().zip(&rb).all(|(&x, &y)| (x - y).abs() <= tol)
}

/// Splits a realization plan into a convex combination of pure plans with
/// the same realization. At most one pure plan per sequence.
pub fn decompose_realization_plan<T: Scalar>(
    g: &GameTree<T>,
    plan: &RealizationPlan<T>,
) -> Vec<(PurePlan, T)> {
    let tol = T::tol(1e-12);
    let mut rest = plan.probs.clone();
    let mut out = Vec::new();
    while rest[0] > tol {
        let mut active = vec![false; rest.len()];
        active[0] = true;
        for &id in g.player_infosets(plan.player) {
            let info = g.infoset(id);
            if !active[info.parent_sequence.0] {
                continue;
            }
            let pick = info
                .child_sequences()
                .fold(None, |best: Option<crate::game::SequenceId>, s| match best {
                    Some(b) if rest[b.0] >= rest[s.0] => Some(b),
                    _ => Some(s),
                })
                .expect("information sets have actions");
            active[pick.0] = true;
        }
        let lambda = (0..rest.len())
            .filter(|&s| active[s])
            .map(|s| rest[s])
            .fold(rest[0], |a, b| a.min_of(b));
        if lambda <= tol {
            break;
        }
        for s in 0..rest.len() {
            if active[s] {
                rest[s] -= lambda;
            }
        }
        out.push((
            PurePlan {
                player: plan.player,
                active,
            },
            lambda,
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploitabilityReport {
    /// Expected team utility of the certified profile.
    pub profile_value: f64,
    /// Team best-response value minus the profile value.
    pub team_gain: f64,
    /// Profile value minus the adversary's best-response value.
    pub adversary_gain: f64,
    pub certified_epsilon: f64,
    /// How the team best response was computed: "enumeration" or "milp".
    pub team_oracle: String,
}

/// Exploitability of the profile (team mixture, adversary plan). The team
/// best response is enumerated when the catalog fits `cap`, otherwise it
/// comes from the best-response MILP.
pub fn certify<T: Scalar>(
    g: &GameTree<T>,
    columns: &[HybridColumn<T>],
    weights: &[T],
    adversary_plan: &RealizationPlan<T>,
    cap: u128,
) -> Result<ExploitabilityReport> {
    if columns.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: columns.len(),
            got: weights.len(),
        });
    }
    let profile = columns
        .iter()
        .zip(weights)
        .fold(T::zero(), |acc, (c, &w)| acc + w * c.value_against(adversary_plan));
    let (team_best, oracle) = match brute_force_best_response(g, adversary_plan, cap) {
        Ok(br) => (br.value, "enumeration"),
        Err(Error::TooLarge { .. }) => (solve_bro(g, adversary_plan)?.value, "milp"),
        Err(e) => return Err(e),
    };
    let (adv_best, _) = adversary_best_response(g, columns, weights);
    let team_gain = (team_best - profile).as_f64();
    let adversary_gain = (profile - adv_best).as_f64();
    Ok(ExploitabilityReport {
        profile_value: profile.as_f64(),
        team_gain,
        adversary_gain,
        certified_epsilon: team_gain.max(adversary_gain),
        team_oracle: oracle.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::build_kuhn;
    use crate::game::fixtures::{pennies, toy3};

    #[test]
    fn reduced_strategy_counts() {
        let g: GameTree<f64> = build_kuhn(3, 3).unwrap();
        assert_eq!(count_reduced_strategies(&g, 0), 729);
        assert_eq!(count_reduced_strategies(&g, 1), 1000);
        assert_eq!(enumerate_reduced_strategies(&g, 0, DEFAULT_CAP).unwrap().len(), 729);
        let g4: GameTree<f64> = build_kuhn(3, 4).unwrap();
        assert_eq!(count_reduced_strategies(&g4, 0), 6561);
        assert!(matches!(
            NormalFormCatalog::new(&g4, g4.team(), DEFAULT_CAP),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn catalog_has_no_duplicates() {
        let g: GameTree<f64> = build_kuhn(3, 3).unwrap();
        let mut plans = enumerate_reduced_strategies(&g, 1, DEFAULT_CAP).unwrap();
        let n = plans.len();
        plans.sort();
        plans.dedup();
        assert_eq!(plans.len(), n);
    }

    #[test]
    fn joint_iterator_covers_the_product() {
        let g = toy3();
        let cat = NormalFormCatalog::new(&g, g.team(), DEFAULT_CAP).unwrap();
        assert_eq!(cat.joint().count() as u128, cat.joint_count());
        assert_eq!(cat.joint_count(), 4);
    }

    #[test]
    fn decomposed_and_exhaustive_best_responses_agree_on_toy() {
        let g = toy3();
        let r_n = RealizationPlan::uniform(&g, 2);
        let a = brute_force_best_response(&g, &r_n, DEFAULT_CAP).unwrap();
        let b = exhaustive_best_response(&g, &r_n, DEFAULT_CAP).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
        // (L,l): (3-1)/2, (L,r): 1, (R,l): -1/2, (R,r): 1/2
        assert!((a.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pennies_brute_force_value_is_zero() {
        let g = pennies();
        let bf = brute_force_tmecor(&g, DEFAULT_CAP).unwrap();
        assert!(bf.value.abs() < 1e-9);
        assert_eq!(bf.support.len(), 2);
    }

    #[test]
    fn toy_brute_force_matches_hand_value() {
        // team mixes (L,l) and (L,r)/(R,l)... solved by enumeration of the 4
        // joint strategies against the adversary's 4 pure plans
        let g = toy3();
        let bf = brute_force_tmecor(&g, DEFAULT_CAP).unwrap();
        let cat = NormalFormCatalog::new(&g, g.team(), DEFAULT_CAP).unwrap();
        let cols: Vec<HybridColumn<f64>> = cat
            .joint()
            .map(|j| {
                let owned: Vec<PurePlan> = j.into_iter().cloned().collect();
                HybridColumn::from_pure(&g, &owned).unwrap()
            })
            .collect();
        let full = solve_core_lp(&g, &cols).unwrap();
        assert!((bf.value - full.value).abs() < 1e-9);
    }

    #[test]
    fn adversary_best_response_against_one_column() {
        let g = toy3();
        let plans: Vec<PurePlan> = g.team().map(|p| PurePlan::first_actions(&g, p)).collect();
        let col = HybridColumn::from_pure(&g, &plans).unwrap();
        let (v, plan) = adversary_best_response(&g, &[col.clone()], &[1.0]);
        assert_eq!(v, -1.0);
        assert!(plan.active[2]);
        let (v2, _) = adversary_best_response(&g, &[col.clone(), col], &[0.5, 0.5]);
        assert_eq!(v2, v);
    }

    #[test]
    fn decomposition_reproduces_the_plan() {
        let g: GameTree<f64> = build_kuhn(3, 3).unwrap();
        let plan = RealizationPlan::uniform(&g, 0);
        let parts = decompose_realization_plan(&g, &plan);
        let total: f64 = parts.iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (s, &p) in plan.probs.iter().enumerate() {
            let back: f64 = parts.iter().filter(|x| x.0.active[s]).map(|x| x.1).sum();
            assert!((back - p).abs() < 1e-12);
        }
    }

    #[test]
    fn equivalence_is_reflexive_and_detects_differences() {
        let g = toy3();
        let a = HybridColumn::from_pure(
            &g,
            &[PurePlan::first_actions(&g, 0), PurePlan::first_actions(&g, 1)],
        )
        .unwrap();
        let mut p1 = PurePlan::first_actions(&g, 1);
        p1.active = vec![true, false, true];
        let b = HybridColumn::from_pure(&g, &[PurePlan::first_actions(&g, 0), p1]).unwrap();
        assert!(check_realization_equivalence(&g, (&[a.clone()], &[1.0]), (&[a.clone()], &[1.0])));
        assert!(!check_realization_equivalence(&g, (&[a], &[1.0]), (&[b], &[1.0])));
    }
}
