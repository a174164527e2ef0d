//! Randomized property checks shared by the test suites. Each check returns
//! a [`CheckReport`] instead of panicking so callers can tabulate results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{check_realization_equivalence, decompose_realization_plan, team_leaf_reach};
use crate::bro::{build_bro_milp, BroModel, BroOptions};
use crate::error::Result;
use crate::game::GameTree;
use crate::master::{build_core_lp, HybridColumn};
use crate::lp::solve_lp;
use crate::sequence::{
    random_plan_with, random_pure_plan_with, validate_plan, PurePlan, RealizationPlan,
};

const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub cases: usize,
    pub violations: usize,
    /// Largest deviation seen.
    pub worst: f64,
}

impl CheckReport {
    fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            cases: 0,
            violations: 0,
            worst: 0.0,
        }
    }

    fn record(&mut self, deviation: f64, tol: f64) {
        self.cases += 1;
        self.worst = self.worst.max(deviation);
        if !(deviation <= tol) {
            self.violations += 1;
        }
    }

    fn record_bool(&mut self, ok: bool) {
        self.record(if ok { 0.0 } else { 1.0 }, 0.5);
    }

    pub fn passed(&self) -> bool {
        self.cases > 0 && self.violations == 0
    }
}

/// Team reach of every leaf under a mixture of joint pure strategies,
/// straight from the leaf sequences.
fn normal_form_reach(g: &GameTree<f64>, joints: &[(Vec<PurePlan>, f64)]) -> Vec<f64> {
    (0..g.num_leaves())
        .map(|l| {
            joints
                .iter()
                .filter(|(plans, _)| plans.iter().all(|p| p.get(g.leaf_seq(l, p.player))))
                .map(|(_, w)| w)
                .sum()
        })
        .collect()
}

/// `U_T(·, σ_n)` for every adversary sequence from leaf reach.
fn payoffs_from_reach(g: &GameTree<f64>, reach: &[f64]) -> Vec<f64> {
    let adv = g.adversary();
    let mut out = vec![0.0; g.num_sequences(adv)];
    for (l, leaf) in g.leaves().iter().enumerate() {
        out[g.leaf_seq(l, adv).0] += leaf.team_payoff * leaf.chance_reach * reach[l];
    }
    out
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Tightest interval for `w` implied by the MR rows with everything else
/// fixed at `x`.
fn mr_interval(bro: &BroModel<f64>, k: usize, x: &[f64]) -> (f64, f64) {
    let w = bro.w_vars[k];
    let var = &bro.model.variables[w.0];
    let mut lo = var.lower.unwrap_or(f64::NEG_INFINITY);
    let mut hi = var.upper.unwrap_or(f64::INFINITY);
    for c in bro.model.constraints.iter().filter(|c| c.name.starts_with("mr_")) {
        let Some(&(_, a)) = c.coeffs.iter().find(|(v, _)| *v == w) else {
            continue;
        };
        let rest: f64 = c
            .coeffs
            .iter()
            .filter(|(v, _)| *v != w)
            .map(|&(v, b)| b * x[v.0])
            .sum();
        let bound = (c.rhs - rest) / a;
        if a > 0.0 {
            hi = hi.min(bound);
        } else {
            lo = lo.max(bound);
        }
    }
    (lo, hi)
}

/// The MR rows collapse the interval of every `w` onto the product of its
/// components, for random assignments (continuous first member, binary
/// others). Counts one case per `(assignment, w)` pair.
pub fn mr_exactness(g: &GameTree<f64>, cases: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_n = RealizationPlan::uniform(g, g.adversary());
    let bro = build_bro_milp(g, &r_n, &BroOptions::default())?;
    let mut report = CheckReport::new("MR exactness");
    let mut x = vec![0.0; bro.model.num_vars()];
    while report.cases < cases {
        for (p, vars) in bro.r_vars.iter().enumerate() {
            for (s, v) in vars.iter().enumerate() {
                x[v.0] = match (s, p) {
                    (0, _) => 1.0,
                    (_, 0) => rng.gen::<f64>(),
                    _ => f64::from(rng.gen_range(0u8..2)),
                };
            }
        }
        for (k, js) in bro.table.entries().iter().enumerate() {
            if report.cases == cases {
                break;
            }
            let product: f64 = js
                .0
                .iter()
                .enumerate()
                .map(|(p, &s)| x[bro.r_vars[p][s.0].0])
                .product();
            let (lo, hi) = mr_interval(&bro, k, &x);
            report.record((lo - product).abs().max((hi - product).abs()), EXACT_TOL);
        }
    }
    Ok(report)
}

/// Every associated constraint holds when each `w` is the product of random
/// pure team plans, and the whole MILP accepts that assignment at the
/// column's true value.
pub fn associated_consistency(g: &GameTree<f64>, plans: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_n = random_plan_with(g, g.adversary(), &mut rng);
    let bro = build_bro_milp(g, &r_n, &BroOptions::default())?;
    let mut report = CheckReport::new("associated-constraint consistency");
    for _ in 0..plans {
        let pure: Vec<PurePlan> = g.team().map(|p| random_pure_plan_with(g, p, &mut rng)).collect();
        let mut x = vec![0.0; bro.model.num_vars()];
        for (p, vars) in bro.r_vars.iter().enumerate() {
            for (s, v) in vars.iter().enumerate() {
                x[v.0] = if pure[p].active[s] { 1.0 } else { 0.0 };
            }
        }
        for (k, js) in bro.table.entries().iter().enumerate() {
            let on = js.0.iter().enumerate().all(|(p, &s)| pure[p].get(s));
            x[bro.w_vars[k].0] = if on { 1.0 } else { 0.0 };
        }
        let mut worst = 0.0f64;
        for c in &bro.associated {
            let rhs: f64 = c.rhs.iter().map(|&k| x[bro.w_vars[k].0]).sum();
            worst = worst.max((x[bro.w_vars[c.lhs].0] - rhs).abs());
        }
        worst = worst.max(bro.model.max_violation(&x));
        let col = HybridColumn::from_pure(g, &pure)?;
        worst = worst.max((bro.model.evaluate(&x) - col.value_against(&r_n)).abs());
        report.record(worst, EXACT_TOL);
    }
    Ok(report)
}

/// Random joint pure strategies (support up to `max_support`) and their
/// hybrid counterparts reach every leaf equally and earn the same payoff
/// against every adversary sequence.
pub fn normal_form_to_hybrid(
    g: &GameTree<f64>,
    cases: usize,
    max_support: usize,
    seed: u64,
) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CheckReport::new("normal-form to hybrid equivalence");
    for _ in 0..cases {
        let k = rng.gen_range(1..=max_support);
        let raw: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let joints: Vec<(Vec<PurePlan>, f64)> = raw
            .iter()
            .map(|w| {
                let plans = g.team().map(|p| random_pure_plan_with(g, p, &mut rng)).collect();
                (plans, w / total)
            })
            .collect();
        let columns = joints
            .iter()
            .map(|(plans, _)| HybridColumn::from_pure(g, plans))
            .collect::<Result<Vec<_>>>()?;
        let weights: Vec<f64> = joints.iter().map(|j| j.1).collect();
        let nf = normal_form_reach(g, &joints);
        let hy = team_leaf_reach(g, &columns, &weights);
        let hy_payoffs = columns.iter().zip(&weights).fold(
            vec![0.0; g.num_sequences(g.adversary())],
            |mut acc, (c, w)| {
                for (a, p) in acc.iter_mut().zip(&c.payoff_by_adv_seq) {
                    *a += w * p;
                }
                acc
            },
        );
        let dev = max_diff(&nf, &hy)
            .max(max_diff(&payoffs_from_reach(g, &nf), &hy_payoffs))
            .max(if columns.len() == joints.len() { 0.0 } else { 1.0 });
        report.record(dev, super::EQUIVALENCE_TOL);
    }
    Ok(report)
}

/// Random hybrid columns and the normal-form mixtures obtained by splitting
/// the first member's plan into pure plans are realization-equivalent with
/// equal per-sequence payoffs.
pub fn hybrid_to_normal_form(g: &GameTree<f64>, cases: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CheckReport::new("hybrid to normal-form equivalence");
    for _ in 0..cases {
        let r0 = random_plan_with(g, 0, &mut rng);
        let rest: Vec<PurePlan> = (1..g.team_size())
            .map(|p| random_pure_plan_with(g, p, &mut rng))
            .collect();
        let col = HybridColumn::new(g, r0.clone(), rest.clone())?;
        let joints: Vec<(Vec<PurePlan>, f64)> = decompose_realization_plan(g, &r0)
            .into_iter()
            .map(|(p0, w)| {
                let mut plans = vec![p0];
                plans.extend(rest.iter().cloned());
                (plans, w)
            })
            .collect();
        let nf = normal_form_reach(g, &joints);
        let hy = team_leaf_reach(g, std::slice::from_ref(&col), &[1.0]);
        let pure_cols = joints
            .iter()
            .map(|(plans, _)| HybridColumn::from_pure(g, plans))
            .collect::<Result<Vec<_>>>()?;
        let weights: Vec<f64> = joints.iter().map(|j| j.1).collect();
        let same = check_realization_equivalence(g, (std::slice::from_ref(&col), &[1.0]), (&pure_cols, &weights));
        let dev = max_diff(&nf, &hy)
            .max(max_diff(&payoffs_from_reach(g, &nf), &col.payoff_by_adv_seq))
            .max(if same { 0.0 } else { 1.0 });
        report.record(dev, super::EQUIVALENCE_TOL);
    }
    Ok(report)
}

/// Random plans of every player satisfy the flow constraints, and a
/// perturbed copy of each is rejected. Two cases per plan.
pub fn flow_validation(g: &GameTree<f64>, plans: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CheckReport::new("flow-constraint validation");
    for k in 0..plans {
        let p = k % g.num_players();
        let plan: RealizationPlan<f64> = if k % 2 == 0 {
            random_plan_with(g, p, &mut rng)
        } else {
            random_pure_plan_with(g, p, &mut rng).to_realization()
        };
        report.record_bool(validate_plan(&plan, g)?);
        let mut bad = plan.clone();
        let s = rng.gen_range(1..bad.len());
        bad.probs[s] += 0.25;
        report.record_bool(!validate_plan(&bad, g)?);
    }
    Ok(report)
}

/// Solves the master LP over random pure columns and checks the returned
/// duals certify the optimum.
pub fn master_duality(g: &GameTree<f64>, cases: usize, max_columns: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CheckReport::new("master LP strong duality");
    for _ in 0..cases {
        let k = rng.gen_range(1..=max_columns);
        let columns = (0..k)
            .map(|_| {
                let plans: Vec<PurePlan> = g.team().map(|p| random_pure_plan_with(g, p, &mut rng)).collect();
                HybridColumn::from_pure(g, &plans)
            })
            .collect::<Result<Vec<_>>>()?;
        let model = build_core_lp(g, &columns);
        let res = solve_lp(&model, 1e-9)?;
        let dev = match model.dual_objective(&res.duals, 1e-7) {
            Some(d) if res.is_optimal() => (d - res.objective_value).abs(),
            _ => f64::INFINITY,
        };
        report.record(dev, 1e-6);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::build_kuhn;
    use crate::game::fixtures::toy3;

    #[test]
    fn checks_pass_on_small_games() {
        let g: GameTree<f64> = build_kuhn(3, 3).unwrap();
        for r in [
            mr_exactness(&g, 2000, 1).unwrap(),
            associated_consistency(&toy3(), 50, 2).unwrap(),
            normal_form_to_hybrid(&g, 30, 5, 3).unwrap(),
            hybrid_to_normal_form(&g, 30, 4).unwrap(),
            flow_validation(&g, 200, 5).unwrap(),
            master_duality(&g, 20, 6, 6).unwrap(),
        ] {
            assert!(r.passed(), "{r:?}");
        }
    }
}
