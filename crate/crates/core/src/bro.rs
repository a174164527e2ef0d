//! Team best-response oracles against a fixed adversary plan.
//!
//! The multilinear best-response problem is linearized exactly: every product
//! `Π_i r_i(σ_T(i))` of team realization probabilities becomes one variable
//! `w(σ_T)` tied to the `r` variables by the MR inequalities, and the
//! associated constraints carry the sequence-form flow equations over to the
//! `w` variables to tighten the relaxation. Player 0 stays continuous, the
//! other team members are binary.
//!
//! [`c18_oracle`] is the leaf-binary baseline used for cross-checks.

use std::collections::HashMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameTree, InfoSetId, SequenceId};
use crate::lp::{
    BuiltinBackend, Integrality, LinearModel, LpOptions, MilpBackend, MilpOptions, Relation, Sense, Status,
    VarId,
};
use crate::master::HybridColumn;
use crate::scalar::Scalar;
use crate::sequence::{repair_flow, PurePlan, RealizationPlan};

/// Largest accepted gap between the MILP objective and the value recomputed
/// from the reconstructed column.
pub const RECONSTRUCTION_TOL: f64 = 1e-6;
/// Largest distance of a binary from {0, 1} accepted on reconstruction.
pub const INTEGRALITY_TOL: f64 = 1e-6;

/// One sequence per team member, in player order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JointSequence(pub Vec<SequenceId>);

impl JointSequence {
    fn with(&self, player: usize, seq: SequenceId) -> Self {
        let mut v = self.0.clone();
        v[player] = seq;
        Self(v)
    }

    /// `a|b|c` with the team members' sequence labels.
    pub fn label<T: Scalar>(&self, g: &GameTree<T>) -> String {
        self.0
            .iter()
            .enumerate()
            .map(|(p, &s)| g.sequence_label(p, s))
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// Joint team sequences of the node, `(seq_0(h), …, seq_{n-2}(h))`.
fn node_joint<T: Scalar>(g: &GameTree<T>, node: crate::game::NodeId) -> JointSequence {
    JointSequence(g.team().map(|p| g.node_seq(node, p)).collect())
}

/// For every team information set, the distinct joint team sequences
/// leading to its nodes, in first-seen order.
pub fn enumerate_joint_sequences<T: Scalar>(
    g: &GameTree<T>,
) -> Vec<(InfoSetId, Vec<JointSequence>)> {
    let team = g.team();
    g.infosets()
        .iter()
        .filter(|info| team.contains(&info.owner))
        .map(|info| {
            let mut seen = std::collections::HashSet::new();
            let mut list = Vec::new();
            for &h in &info.members {
                let js = node_joint(g, h);
                if seen.insert(js.clone()) {
                    list.push(js);
                }
            }
            (info.id, list)
        })
        .collect()
}

/// Joint sequences that receive a `w` variable, with their indices.
#[derive(Debug, Clone, Default)]
pub struct WVariableTable {
    entries: Vec<JointSequence>,
    index: HashMap<JointSequence, usize>,
}

impl WVariableTable {
    fn insert(&mut self, js: JointSequence) -> usize {
        if let Some(&i) = self.index.get(&js) {
            return i;
        }
        let i = self.entries.len();
        self.index.insert(js.clone(), i);
        self.entries.push(js);
        i
    }

    pub fn get(&self, js: &JointSequence) -> Option<usize> {
        self.index.get(js).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[JointSequence] {
        &self.entries
    }

    /// Entries for every `σ_T ∈ Σ_T(I)`, their one-action extensions at `I`,
    /// and every leaf's joint sequence.
    pub fn build<T: Scalar>(g: &GameTree<T>, joint: &[(InfoSetId, Vec<JointSequence>)]) -> Self {
        let mut table = Self::default();
        for (id, list) in joint {
            let info = g.infoset(*id);
            for js in list {
                table.insert(js.clone());
                for s in info.child_sequences() {
                    table.insert(js.with(info.owner, s));
                }
            }
        }
        for leaf in g.leaves() {
            table.insert(node_joint(g, leaf.node));
        }
        table
    }
}

/// `w(σ_T) = Σ_a w(σ_T(i)a, σ_{T\i})`, by table index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociatedConstraint {
    pub infoset: InfoSetId,
    pub lhs: usize,
    pub rhs: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BroOptions {
    /// Emit the associated constraints (disabling them gives the plain MR
    /// formulation).
    pub associated_constraints: bool,
    pub milp: MilpOptions,
}

impl Default for BroOptions {
    fn default() -> Self {
        Self {
            associated_constraints: true,
            milp: MilpOptions::default(),
        }
    }
}

/// The linearized best-response MILP and the handles needed to read it.
#[derive(Debug, Clone)]
pub struct BroModel<T> {
    pub model: LinearModel<T>,
    /// `r_vars[p][σ]` for team player `p`.
    pub r_vars: Vec<Vec<VarId>>,
    pub table: WVariableTable,
    pub w_vars: Vec<VarId>,
    pub associated: Vec<AssociatedConstraint>,
}

impl<T: Scalar> BroModel<T> {
    pub fn num_binaries(&self) -> usize {
        self.model.num_binaries()
    }

    /// One line per associated constraint:
    /// `w(a|b|c) = w(a'|b|c) + w(a''|b|c)`.
    pub fn associated_dump(&self, g: &GameTree<T>) -> String {
        let mut out = String::new();
        let entries = self.table.entries();
        for c in &self.associated {
            let rhs: Vec<String> = c
                .rhs
                .iter()
                .map(|&k| format!("w({})", entries[k].label(g)))
                .collect();
            let _ = writeln!(out, "w({}) = {}", entries[c.lhs].label(g), rhs.join(" + "));
        }
        out
    }
}

fn check_adversary_plan<T: Scalar>(g: &GameTree<T>, r_n: &RealizationPlan<T>) -> Result<()> {
    let expected = g.num_sequences(g.adversary());
    if r_n.player != g.adversary() || r_n.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: r_n.len(),
        });
    }
    Ok(())
}

/// Sequence-form variables and flow rows for every team member. Player 0 is
/// continuous unless `all_binary`; the empty sequence is fixed at one.
fn team_plan_vars<T: Scalar>(
    g: &GameTree<T>,
    m: &mut LinearModel<T>,
    all_binary: bool,
) -> Vec<Vec<VarId>> {
    let mut r_vars = Vec::new();
    for p in g.team() {
        let vars: Vec<VarId> = g
            .sequences(p)
            .iter()
            .enumerate()
            .map(|(s, info)| {
                let name = format!("r{p}[{}]", info.label);
                let binary = p != 0 || all_binary;
                if s == 0 {
                    let kind = if binary {
                        Integrality::Binary
                    } else {
                        Integrality::Continuous
                    };
                    m.add_var(name, Some(T::one()), Some(T::one()), kind)
                } else if !binary {
                    m.add_continuous(name, T::zero(), T::one())
                } else {
                    m.add_binary(name)
                }
            })
            .collect();
        for &id in g.player_infosets(p) {
            let info = g.infoset(id);
            let mut coeffs = vec![(vars[info.parent_sequence.0], -T::one())];
            coeffs.extend(info.child_sequences().map(|s| (vars[s.0], T::one())));
            m.add_constraint(format!("flow{p}[{}]", info.label), coeffs, Relation::Eq, T::zero());
        }
        r_vars.push(vars);
    }
    r_vars
}

/// Builds the linearized best-response MILP against `r_n`.
pub fn build_bro_milp<T: Scalar>(
    g: &GameTree<T>,
    r_n: &RealizationPlan<T>,
    opts: &BroOptions,
) -> Result<BroModel<T>> {
    check_adversary_plan(g, r_n)?;
    let joint = enumerate_joint_sequences(g);
    let table = WVariableTable::build(g, &joint);
    let mut m = LinearModel::new(Sense::Maximize);
    let r_vars = team_plan_vars(g, &mut m, false);
    let team_size = g.team_size();
    let spare = T::from_count(team_size - 1);

    let w_vars: Vec<VarId> = table
        .entries()
        .iter()
        .map(|js| m.add_continuous(format!("w({})", js.label(g)), T::zero(), T::one()))
        .collect();
    for (k, js) in table.entries().iter().enumerate() {
        let w = w_vars[k];
        for i in 1..team_size {
            let s = js.0[i];
            if !s.is_empty() {
                m.add_constraint(
                    format!("mr_up{i}_{k}"),
                    vec![(w, T::one()), (r_vars[i][s.0], -T::one())],
                    Relation::Le,
                    T::zero(),
                );
            }
        }
        let r0 = r_vars[0][js.0[0].0];
        m.add_constraint(
            format!("mr_lo_{k}"),
            vec![(w, T::one()), (r0, -T::one())],
            Relation::Le,
            T::zero(),
        );
        let mut coeffs = vec![(r0, T::one()), (w, -T::one())];
        for i in 1..team_size {
            coeffs.push((r_vars[i][js.0[i].0], T::one()));
        }
        m.add_constraint(format!("mr_hi_{k}"), coeffs, Relation::Le, spare);
    }

    let mut associated = Vec::new();
    if opts.associated_constraints {
        for (id, list) in &joint {
            let info = g.infoset(*id);
            for js in list {
                let lhs = table.get(js).expect("table covers infoset joints");
                let rhs: Vec<usize> = info
                    .child_sequences()
                    .map(|s| table.get(&js.with(info.owner, s)).expect("table covers extensions"))
                    .collect();
                let mut coeffs = vec![(w_vars[lhs], T::one())];
                coeffs.extend(rhs.iter().map(|&k| (w_vars[k], -T::one())));
                m.add_constraint(
                    format!("assoc{}", associated.len()),
                    coeffs,
                    Relation::Eq,
                    T::zero(),
                );
                associated.push(AssociatedConstraint {
                    infoset: *id,
                    lhs,
                    rhs,
                });
            }
        }
    }

    let adv = g.adversary();
    let mut coef = vec![T::zero(); table.len()];
    for (l, leaf) in g.leaves().iter().enumerate() {
        let rn = r_n.get(g.leaf_seq(l, adv));
        if rn == T::zero() || leaf.team_payoff == T::zero() {
            continue;
        }
        let k = table.get(&node_joint(g, leaf.node)).expect("leaf joints tabled");
        coef[k] += leaf.team_payoff * leaf.chance_reach * rn;
    }
    let objective = coef
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != T::zero())
        .map(|(k, &c)| (w_vars[k], c))
        .collect();
    m.set_objective(Sense::Maximize, objective);
    Ok(BroModel {
        model: m,
        r_vars,
        table,
        w_vars,
        associated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BroSolution<T> {
    /// `U_T(column, r_n)`, recomputed from the reconstructed column.
    pub value: T,
    pub column: HybridColumn<T>,
    /// Objective reported by the MILP.
    pub milp_objective: T,
    pub nodes: usize,
    pub gap: T,
}

fn solve_or_fail<T: Scalar>(
    backend: &dyn MilpBackend<T>,
    m: &LinearModel<T>,
    opts: &MilpOptions,
) -> Result<crate::lp::SolveResult<T>> {
    let res = backend.solve_milp(m, opts)?;
    match res.status {
        Status::Optimal => Ok(res),
        other => Err(Error::SolverFailure(format!(
            "best-response MILP ended {other:?} after {} nodes",
            res.nodes
        ))),
    }
}

fn read_pure<T: Scalar>(
    res: &[T],
    vars: &[VarId],
    player: usize,
    g: &GameTree<T>,
) -> Result<PurePlan> {
    let plan = RealizationPlan::new(player, vars.iter().map(|v| res[v.0]).collect());
    let pure = PurePlan::from_realization(&plan, T::tol(INTEGRALITY_TOL)).ok_or_else(|| {
        Error::SolverFailure(format!("plan of player {player} is not integral"))
    })?;
    if !crate::sequence::validate_plan(&pure.to_realization::<T>(), g)? {
        return Err(Error::SolverFailure(format!(
            "plan of player {player} violates the flow constraints"
        )));
    }
    Ok(pure)
}

fn finish_solution<T: Scalar>(
    r_n: &RealizationPlan<T>,
    column: HybridColumn<T>,
    milp_objective: T,
    res: &crate::lp::SolveResult<T>,
) -> Result<BroSolution<T>> {
    let value = column.value_against(r_n);
    if (value - milp_objective).abs() > T::tol(RECONSTRUCTION_TOL) {
        return Err(Error::ReconstructionMismatch {
            milp: milp_objective.as_f64(),
            recomputed: value.as_f64(),
        });
    }
    Ok(BroSolution {
        value,
        column,
        milp_objective,
        nodes: res.nodes,
        gap: res.gap,
    })
}

/// Best hybrid team column against `r_n`.
pub fn solve_bro<T: Scalar>(g: &GameTree<T>, r_n: &RealizationPlan<T>) -> Result<BroSolution<T>> {
    solve_bro_with(g, r_n, &BroOptions::default(), &BuiltinBackend)
}

pub fn solve_bro_with<T: Scalar>(
    g: &GameTree<T>,
    r_n: &RealizationPlan<T>,
    opts: &BroOptions,
    backend: &dyn MilpBackend<T>,
) -> Result<BroSolution<T>> {
    let bro = build_bro_milp(g, r_n, opts)?;
    let res = solve_or_fail(backend, &bro.model, &opts.milp)?;
    let x = &res.primal;
    let mut r0 = RealizationPlan::new(
        0,
        bro.r_vars[0]
            .iter()
            .map(|v| x[v.0].max_of(T::zero()).min_of(T::one()))
            .collect(),
    );
    repair_flow(&mut r0, g);
    let pure_rest = (1..g.team_size())
        .map(|p| read_pure(x, &bro.r_vars[p], p, g))
        .collect::<Result<Vec<_>>>()?;
    let column = HybridColumn::new(g, r0, pure_rest)?;
    finish_solution(r_n, column, res.objective_value, &res)
}

/// The leaf-binary baseline MILP: every team plan binary and one binary
/// `y(l) ≤ r_i(seq_i(l))` per leaf. Utilities are shifted by
/// `C = 1 - min u` to make them positive; returns the model and `C`.
pub fn build_c18_milp<T: Scalar>(
    g: &GameTree<T>,
    r_n: &RealizationPlan<T>,
) -> Result<(LinearModel<T>, Vec<Vec<VarId>>, T)> {
    check_adversary_plan(g, r_n)?;
    let shift = T::one() - g.min_payoff();
    let mut m = LinearModel::new(Sense::Maximize);
    let r_vars = team_plan_vars(g, &mut m, true);
    let adv = g.adversary();
    let mut objective = Vec::new();
    for (l, leaf) in g.leaves().iter().enumerate() {
        let y = m.add_binary(format!("y{l}"));
        for (p, vars) in r_vars.iter().enumerate() {
            let s = g.leaf_seq(l, p);
            if !s.is_empty() {
                m.add_constraint(
                    format!("leaf{l}_{p}"),
                    vec![(y, T::one()), (vars[s.0], -T::one())],
                    Relation::Le,
                    T::zero(),
                );
            }
        }
        let c = (leaf.team_payoff + shift) * leaf.chance_reach * r_n.get(g.leaf_seq(l, adv));
        if c != T::zero() {
            objective.push((y, c));
        }
    }
    m.set_objective(Sense::Maximize, objective);
    Ok((m, r_vars, shift))
}

/// Best pure team strategy against `r_n` via the leaf-binary baseline.
pub fn c18_oracle<T: Scalar>(g: &GameTree<T>, r_n: &RealizationPlan<T>) -> Result<BroSolution<T>> {
    c18_oracle_with(g, r_n, &MilpOptions::default(), &BuiltinBackend)
}

pub fn c18_oracle_with<T: Scalar>(
    g: &GameTree<T>,
    r_n: &RealizationPlan<T>,
    opts: &MilpOptions,
    backend: &dyn MilpBackend<T>,
) -> Result<BroSolution<T>> {
    let (m, r_vars, shift) = build_c18_milp(g, r_n)?;
    let res = solve_or_fail(backend, &m, opts)?;
    let plans = g
        .team()
        .map(|p| read_pure(&res.primal, &r_vars[p], p, g))
        .collect::<Result<Vec<_>>>()?;
    let column = HybridColumn::from_pure(g, &plans)?;
    finish_solution(r_n, column, res.objective_value - shift, &res)
}

/// Default options for a run whose oracle must certify gains of `epsilon`.
pub fn options_for_epsilon(epsilon: f64) -> BroOptions {
    let mut o = BroOptions::default();
    if epsilon > 0.0 {
        o.milp.abs_gap = o.milp.abs_gap.min(epsilon / 4.0);
    }
    o
}

/// LP relaxation value of the best-response MILP (for diagnostics).
pub fn relaxation_value<T: Scalar>(bro: &BroModel<T>) -> Result<T> {
    let res = crate::lp::solve_lp_with(&bro.model, &LpOptions::default())?;
    match res.status {
        Status::Optimal => Ok(res.objective_value),
        other => Err(Error::SolverFailure(format!("relaxation ended {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::build_kuhn;
    use crate::game::fixtures::toy3;

    #[test]
    fn root_infoset_has_only_the_empty_joint() {
        let g: GameTree<f64> = build_kuhn(3, 3).unwrap();
        let joint = enumerate_joint_sequences(&g);
        let root_sets: Vec<_> = joint
            .iter()
            .filter(|(id, _)| {
                let info = g.infoset(*id);
                info.owner == 0 && info.parent_sequence.is_empty()
            })
            .collect();
        assert!(!root_sets.is_empty());
        for (_, list) in root_sets {
            assert_eq!(list, &vec![JointSequence(vec![SequenceId::EMPTY; 2])]);
        }
    }

    #[test]
    fn two_member_team_mr_row() {
        let g = toy3();
        let r_n = RealizationPlan::uniform(&g, 2);
        let bro = build_bro_milp(&g, &r_n, &BroOptions::default()).unwrap();
        let row = bro
            .model
            .constraints
            .iter()
            .find(|c| c.name.starts_with("mr_hi_"))
            .unwrap();
        // r_0 - w + r_1 <= 1
        assert_eq!(row.rhs, 1.0);
        assert_eq!(row.coeffs.len(), 3);
    }

    #[test]
    fn toy_best_response_against_pure_line() {
        let g = toy3();
        // adversary plays a after L and b after R
        let r_n = RealizationPlan::new(2, vec![1.0, 1.0, 0.0, 0.0, 1.0]);
        let sol = solve_bro(&g, &r_n).unwrap();
        // lines: (L,l)->3, (L,r)->0, (R,l)->1, (R,r)->-3
        assert!((sol.value - 3.0).abs() < 1e-9);
        let c18 = c18_oracle(&g, &r_n).unwrap();
        assert!((c18.value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn binary_counts_on_three_player_kuhn() {
        let g: GameTree<f64> = build_kuhn(3, 4).unwrap();
        let r_n = RealizationPlan::uniform(&g, 2);
        let bro = build_bro_milp(&g, &r_n, &BroOptions::default()).unwrap();
        assert_eq!(bro.num_binaries(), 33);
        let (m, _, _) = build_c18_milp(&g, &r_n).unwrap();
        let leaf_binaries = m.variables.iter().filter(|v| v.name.starts_with('y')).count();
        assert_eq!(leaf_binaries, 312);
    }

    #[test]
    fn disabling_associated_constraints_keeps_the_optimum() {
        let g: GameTree<f64> = build_kuhn(3, 3).unwrap();
        let r_n = RealizationPlan::uniform(&g, 2);
        let with = solve_bro(&g, &r_n).unwrap();
        let opts = BroOptions {
            associated_constraints: false,
            ..BroOptions::default()
        };
        let without = solve_bro_with(&g, &r_n, &opts, &BuiltinBackend).unwrap();
        assert!((with.value - without.value).abs() < 1e-7);
        assert!(build_bro_milp(&g, &r_n, &opts).unwrap().associated.is_empty());
    }

    #[test]
    fn epsilon_gap_option() {
        assert_eq!(options_for_epsilon(0.0).milp.abs_gap, 1e-8);
        assert_eq!(options_for_epsilon(0.06).milp.abs_gap, 1e-8);
        assert_eq!(options_for_epsilon(1e-8).milp.abs_gap, 2.5e-9);
    }
}
