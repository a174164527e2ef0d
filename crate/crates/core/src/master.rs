//! Restricted master problem over hybrid team columns.
//!
//! A column pairs a (possibly mixed) realization plan of team player 0 with
//! pure plans for the other team members. The master LP picks the team's
//! mixture over the columns against an adversary who best-responds inside
//! every information set; the duals of the per-sequence rows are the
//! adversary's realization plan.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameTree, InfoSetId};
use crate::lp::{BuiltinBackend, LinearModel, LpOptions, MilpBackend, Relation, Sense, VarId};
use crate::scalar::Scalar;
use crate::sequence::{flow_residual, validate_plan, PurePlan, RealizationPlan};

/// Slack above which extracted duals are rejected in favour of the explicit
/// adversary LP.
pub const DUAL_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridColumn<T> {
    /// Plan of team player 0, possibly mixed.
    pub r0: RealizationPlan<T>,
    /// Pure plans of team players `1..n-1`, in player order.
    pub pure_rest: Vec<PurePlan>,
    /// `U_T(f_T, σ)` for every adversary sequence `σ`.
    pub payoff_by_adv_seq: Vec<T>,
}

impl<T: Scalar> HybridColumn<T> {
    /// Validates the component plans and computes the payoff vector.
    pub fn new(g: &GameTree<T>, r0: RealizationPlan<T>, pure_rest: Vec<PurePlan>) -> Result<Self> {
        check_components(g, &r0, &pure_rest)?;
        let payoff_by_adv_seq = column_payoffs(g, &r0, &pure_rest);
        Ok(Self {
            r0,
            pure_rest,
            payoff_by_adv_seq,
        })
    }

    /// Column whose every team member plays a pure plan.
    pub fn from_pure(g: &GameTree<T>, plans: &[PurePlan]) -> Result<Self> {
        let (first, rest) = plans.split_first().ok_or_else(|| {
            Error::InvalidParams("a team column needs at least one plan".into())
        })?;
        Self::new(g, first.to_realization(), rest.to_vec())
    }

    /// `U_T(f_T, r_n)`.
    pub fn value_against(&self, adversary: &RealizationPlan<T>) -> T {
        dot(&self.payoff_by_adv_seq, &adversary.probs)
    }

    /// Team reach `r_0(seq_0(l)) · Π_i π_i(seq_i(l))` of leaf `l`.
    pub fn team_reach(&self, g: &GameTree<T>, leaf: usize) -> T {
        if self
            .pure_rest
            .iter()
            .any(|p| !p.get(g.leaf_seq(leaf, p.player)))
        {
            return T::zero();
        }
        self.r0.get(g.leaf_seq(leaf, self.r0.player))
    }
}

fn check_components<T: Scalar>(
    g: &GameTree<T>,
    r0: &RealizationPlan<T>,
    pure_rest: &[PurePlan],
) -> Result<()> {
    if r0.player != 0 || pure_rest.len() + 1 != g.team_size() {
        return Err(Error::InvalidParams(format!(
            "column must cover team players 0..{}, got r0 for player {} and {} pure plans",
            g.team_size(),
            r0.player,
            pure_rest.len()
        )));
    }
    if !validate_plan(r0, g)? {
        return Err(Error::InvalidParams("r0 violates the flow constraints".into()));
    }
    for (k, p) in pure_rest.iter().enumerate() {
        if p.player != k + 1 {
            return Err(Error::InvalidParams(format!(
                "pure plan {k} belongs to player {}, expected {}",
                p.player,
                k + 1
            )));
        }
        if !validate_plan(&p.to_realization::<T>(), g)? {
            return Err(Error::InvalidParams(format!(
                "pure plan of player {} violates the flow constraints",
                p.player
            )));
        }
    }
    Ok(())
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Per-adversary-sequence payoffs of the hybrid strategy `(r0, pure_rest)`:
/// one pass over the leaves.
pub fn column_payoffs<T: Scalar>(
    g: &GameTree<T>,
    r0: &RealizationPlan<T>,
    pure_rest: &[PurePlan],
) -> Vec<T> {
    let adv = g.adversary();
    let mut out = vec![T::zero(); g.num_sequences(adv)];
    'leaves: for (l, leaf) in g.leaves().iter().enumerate() {
        for p in pure_rest {
            if !p.get(g.leaf_seq(l, p.player)) {
                continue 'leaves;
            }
        }
        let reach = r0.get(g.leaf_seq(l, 0));
        if reach == T::zero() || leaf.team_payoff == T::zero() {
            continue;
        }
        out[g.leaf_seq(l, adv).0] += reach * leaf.team_payoff * leaf.chance_reach;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterSolution<T> {
    /// Restricted-game value, the lower bound of the column generation.
    pub value: T,
    /// Probability of each column.
    pub mixture: Vec<T>,
    pub adversary_plan: RealizationPlan<T>,
    /// Value variable of every adversary information set, in
    /// `player_infosets(adversary)` order.
    pub infoset_values: Vec<T>,
    /// Dual objective of the LP; equals `value` at optimality.
    pub dual_value: T,
    /// Whether the adversary plan came from the explicit adversary LP rather
    /// than the master duals.
    pub used_fallback: bool,
}

impl<T: Scalar> MasterSolution<T> {
    /// Mixture entries above `tol`.
    pub fn support(&self, tol: T) -> Vec<usize> {
        (0..self.mixture.len())
            .filter(|&k| self.mixture[k] > tol)
            .collect()
    }
}

/// Builds the master LP. Variables: one weight per column, then the root
/// value, then one value per adversary information set. Rows: one per
/// adversary sequence (the empty sequence first), then the simplex row.
pub fn build_core_lp<T: Scalar>(g: &GameTree<T>, columns: &[HybridColumn<T>]) -> LinearModel<T> {
    let adv = g.adversary();
    let mut m = LinearModel::new(Sense::Maximize);
    let xs: Vec<VarId> = (0..columns.len())
        .map(|k| m.add_nonneg(format!("x{k}")))
        .collect();
    let root = m.add_free("v_root");
    let infosets = g.player_infosets(adv);
    let mut vvar = vec![root; g.infosets().len()];
    for &id in infosets {
        vvar[id.0] = m.add_free(format!("v[{}]", g.infoset(id).label));
    }
    for (s, info) in g.sequences(adv).iter().enumerate() {
        let head = match info.infoset {
            None => root,
            Some(id) => vvar[id.0],
        };
        let mut coeffs = vec![(head, T::one())];
        for &next in g.infosets_after(adv, crate::game::SequenceId(s)) {
            coeffs.push((vvar[next.0], -T::one()));
        }
        for (k, col) in columns.iter().enumerate() {
            let u = col.payoff_by_adv_seq[s];
            if u != T::zero() {
                coeffs.push((xs[k], -u));
            }
        }
        m.add_constraint(format!("seq[{}]", info.label), coeffs, Relation::Le, T::zero());
    }
    m.add_constraint(
        "simplex",
        xs.iter().map(|&x| (x, T::one())).collect(),
        Relation::Eq,
        T::one(),
    );
    m.set_objective(Sense::Maximize, vec![(root, T::one())]);
    m
}

pub fn solve_core_lp<T: Scalar>(
    g: &GameTree<T>,
    columns: &[HybridColumn<T>],
) -> Result<MasterSolution<T>> {
    solve_core_lp_with(g, columns, &BuiltinBackend, &LpOptions::default())
}

pub fn solve_core_lp_with<T: Scalar>(
    g: &GameTree<T>,
    columns: &[HybridColumn<T>],
    backend: &dyn MilpBackend<T>,
    opts: &LpOptions,
) -> Result<MasterSolution<T>> {
    if columns.is_empty() {
        return Err(Error::InvalidParams("master LP needs at least one column".into()));
    }
    let adv = g.adversary();
    let nseq = g.num_sequences(adv);
    if let Some(bad) = columns.iter().find(|c| c.payoff_by_adv_seq.len() != nseq) {
        return Err(Error::DimensionMismatch {
            expected: nseq,
            got: bad.payoff_by_adv_seq.len(),
        });
    }
    let model = build_core_lp(g, columns);
    let res = backend.solve_lp(&model, opts)?;
    if !res.is_optimal() {
        return Err(Error::SolverFailure(format!("master LP ended {:?}", res.status)));
    }
    let k = columns.len();
    let mut mixture: Vec<T> = res.primal[..k]
        .iter()
        .map(|&x| x.max_of(T::zero()))
        .collect();
    let total = mixture.iter().fold(T::zero(), |a, &b| a + b);
    if total > T::zero() {
        mixture.iter_mut().for_each(|x| *x /= total);
    }
    let value = res.objective_value;
    let infoset_values = res.primal[k + 1..].to_vec();
    let dual_value = model
        .dual_objective(&res.duals, T::tol(opts.feas_tol.max(1e-9) * 100.0))
        .unwrap_or_else(|| T::from_f64_lossy(f64::INFINITY));

    let tol = T::tol(DUAL_TOL);
    let mut used_fallback = false;
    let adversary_plan = match plan_from_duals(g, &res.duals[..nseq], tol)? {
        Some(plan) => plan,
        None => {
            used_fallback = true;
            log::debug!("master duals rejected; solving the adversary LP");
            adversary_lp(g, columns, backend, opts)?.1
        }
    };
    Ok(MasterSolution {
        value,
        mixture,
        adversary_plan,
        infoset_values,
        dual_value,
        used_fallback,
    })
}

/// Renormalizes the sequence-row duals into an adversary realization plan,
/// or `None` if they are not a valid plan within `tol`.
fn plan_from_duals<T: Scalar>(
    g: &GameTree<T>,
    duals: &[T],
    tol: T,
) -> Result<Option<RealizationPlan<T>>> {
    let root = duals[0];
    if root <= tol || (root - T::one()).abs() > tol {
        return Ok(None);
    }
    let mut plan = RealizationPlan::new(g.adversary(), duals.iter().map(|&y| y / root).collect());
    if plan.probs.iter().any(|&p| p < -tol) {
        return Ok(None);
    }
    plan.clamp_negatives(tol);
    if flow_residual(&plan, g)? > tol {
        return Ok(None);
    }
    Ok(Some(plan))
}

/// The adversary's side of the restricted game, solved directly:
/// `min μ` subject to `μ ≥ U(f_k, r)` for every column and `r` a realization
/// plan. Returns `(μ, r)`.
pub fn adversary_lp<T: Scalar>(
    g: &GameTree<T>,
    columns: &[HybridColumn<T>],
    backend: &dyn MilpBackend<T>,
    opts: &LpOptions,
) -> Result<(T, RealizationPlan<T>)> {
    let adv = g.adversary();
    let nseq = g.num_sequences(adv);
    let mut m = LinearModel::new(Sense::Minimize);
    let mu = m.add_free("mu");
    let r: Vec<VarId> = g
        .sequences(adv)
        .iter()
        .map(|s| m.add_nonneg(format!("r[{}]", s.label)))
        .collect();
    m.add_constraint("root", vec![(r[0], T::one())], Relation::Eq, T::one());
    for &id in g.player_infosets(adv) {
        let info = g.infoset(id);
        let mut coeffs = vec![(r[info.parent_sequence.0], -T::one())];
        coeffs.extend(info.child_sequences().map(|s| (r[s.0], T::one())));
        m.add_constraint(format!("flow[{}]", info.label), coeffs, Relation::Eq, T::zero());
    }
    for (k, col) in columns.iter().enumerate() {
        let mut coeffs = vec![(mu, T::one())];
        for (s, &u) in col.payoff_by_adv_seq.iter().enumerate() {
            if u != T::zero() {
                coeffs.push((r[s], -u));
            }
        }
        m.add_constraint(format!("col{k}"), coeffs, Relation::Ge, T::zero());
    }
    m.set_objective(Sense::Minimize, vec![(mu, T::one())]);
    let res = backend.solve_lp(&m, opts)?;
    if !res.is_optimal() {
        return Err(Error::SolverFailure(format!("adversary LP ended {:?}", res.status)));
    }
    let mut plan = RealizationPlan::new(adv, res.primal[1..1 + nseq].to_vec());
    plan.clamp_negatives(T::tol(DUAL_TOL));
    Ok((res.objective_value, plan))
}

/// Value of the column set against its own extracted adversary plan:
/// `max_k U(f_k, r)`.
pub fn best_column_value<T: Scalar>(columns: &[HybridColumn<T>], plan: &RealizationPlan<T>) -> T {
    columns
        .iter()
        .map(|c| c.value_against(plan))
        .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.max_of(v))))
        .unwrap_or_else(T::zero)
}

/// Index of a column with exactly the same payoff vector, if any.
pub fn find_duplicate<T: Scalar>(columns: &[HybridColumn<T>], candidate: &HybridColumn<T>) -> Option<usize> {
    columns
        .iter()
        .position(|c| c.payoff_by_adv_seq == candidate.payoff_by_adv_seq)
}

/// Adversary information set owning each value in
/// [`MasterSolution::infoset_values`].
pub fn infoset_order<T: Scalar>(g: &GameTree<T>) -> &[InfoSetId] {
    g.player_infosets(g.adversary())
}
