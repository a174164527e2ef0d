//! Depth-first branch-and-bound over binary variables.
//!
//! Nodes are re-optimized from the previous basis with the dual simplex.
//! Branching takes the most fractional binary (lowest index on ties); both
//! children are solved before descending so the better bound is explored
//! first.

use super::simplex::{finish, Outcome, Tableau};
use super::{LinearModel, MilpOptions, SolveResult, Status};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

struct Node<T> {
    fixes: Vec<(usize, bool)>,
    bound: T,
}

/// Sets every binary to its model bounds, narrowed by the node's fixings.
fn apply_fixes<T: Scalar>(
    tab: &mut Tableau<T>,
    bins: &[usize],
    base: &[(T, T)],
    fixes: &[(usize, bool)],
) {
    let mut want = base.to_vec();
    for &(k, up) in fixes {
        let v = if up { T::one() } else { T::zero() };
        want[k] = (v, v);
    }
    for (k, &j) in bins.iter().enumerate() {
        let (lo, hi) = want[k];
        if tab.bounds(j) != (Some(lo), Some(hi)) {
            tab.set_bounds(j, Some(lo), Some(hi));
        }
    }
}

/// Solves `model` to within `opts.abs_gap` of optimality.
pub fn branch_and_bound<T: Scalar>(
    model: &LinearModel<T>,
    opts: &MilpOptions,
) -> Result<SolveResult<T>> {
    model.check()?;
    let bins: Vec<usize> = model.binaries().map(|v| v.0).collect();
    let base: Vec<(T, T)> = bins
        .iter()
        .map(|&j| {
            let v = &model.variables[j];
            (
                v.lower.map_or(T::zero(), |l| l.max_of(T::zero())),
                v.upper.map_or(T::one(), |u| u.min_of(T::one())),
            )
        })
        .collect();
    let mut tab = Tableau::new(model, &opts.lp);
    let root = tab.solve();
    if bins.is_empty() || root != Outcome::Optimal {
        return finish(model, &opts.lp, &mut tab, root);
    }
    let gap = T::from_f64_lossy(opts.abs_gap);
    let int_tol = T::tol(opts.int_tol);
    let half = T::one() / (T::one() + T::one());
    let verify = T::tol(1e-7);

    let mut incumbent: Option<(T, Vec<T>)> = None;
    let mut pruned_bound: Option<T> = None;
    let mut stack = vec![Node {
        fixes: Vec::new(),
        bound: tab.max_objective(),
    }];
    let mut current: Vec<(usize, bool)> = Vec::new();
    let mut nodes = 0usize;
    let mut hit_limit = false;

    let solve_at = |tab: &mut Tableau<T>, fixes: &[(usize, bool)]| -> Result<Option<T>> {
        apply_fixes(tab, &bins, &base, fixes);
        match tab.dual() {
            Outcome::Optimal => Ok(Some(tab.max_objective())),
            Outcome::Infeasible => Ok(None),
            Outcome::Unbounded => Err(Error::SolverFailure(
                "unbounded relaxation inside branch-and-bound".into(),
            )),
            Outcome::IterationLimit => Err(Error::SolverFailure(
                "pivot limit inside branch-and-bound".into(),
            )),
        }
    };

    while let Some(node) = stack.pop() {
        if let Some((best, _)) = &incumbent {
            if node.bound <= *best + gap {
                pruned_bound = Some(pruned_bound.map_or(node.bound, |p: T| p.max_of(node.bound)));
                continue;
            }
        }
        if nodes >= opts.node_limit {
            stack.push(node);
            hit_limit = true;
            break;
        }
        nodes += 1;
        if current != node.fixes {
            let Some(_) = solve_at(&mut tab, &node.fixes)? else {
                current = node.fixes;
                continue;
            };
            current = node.fixes.clone();
        }
        let value = tab.max_objective();
        if let Some((best, _)) = &incumbent {
            if value <= *best + gap {
                pruned_bound = Some(pruned_bound.map_or(value, |p: T| p.max_of(value)));
                continue;
            }
        }
        let x = tab.primal();
        let mut branch: Option<(usize, T)> = None;
        for (k, &j) in bins.iter().enumerate() {
            let frac = x[j] - x[j].floor_of();
            let dist = frac.min_of(T::one() - frac);
            if dist > int_tol && branch.map_or(true, |(_, d)| dist > d) {
                branch = Some((k, dist));
            }
        }
        let Some((k, _)) = branch else {
            let mut snapped = x;
            for &j in &bins {
                snapped[j] = if snapped[j] >= half { T::one() } else { T::zero() };
            }
            let viol = model.max_violation(&snapped);
            if viol > verify {
                return Err(Error::SolverFailure(format!(
                    "numerical failure: integral node violates the model by {viol}"
                )));
            }
            incumbent = Some((value, snapped));
            continue;
        };
        let mut children = Vec::with_capacity(2);
        for up in [false, true] {
            let mut fixes = node.fixes.clone();
            fixes.push((k, up));
            if let Some(bound) = solve_at(&mut tab, &fixes)? {
                children.push(Node { fixes: fixes.clone(), bound });
            }
            current = fixes;
        }
        // better bound on top of the stack
        children.sort_by(|a, b| a.bound.partial_cmp(&b.bound).unwrap_or(std::cmp::Ordering::Equal));
        stack.extend(children);
    }

    let Some((best, x)) = incumbent else {
        let mut r = SolveResult::without_solution(if hit_limit {
            Status::IterationLimit
        } else {
            Status::Infeasible
        });
        r.nodes = nodes;
        r.pivots = tab.pivots;
        return Ok(r);
    };
    let mut open = pruned_bound.unwrap_or(best);
    if hit_limit {
        for n in &stack {
            open = open.max_of(n.bound);
        }
    }
    let sign = if model.sense == super::Sense::Minimize {
        -T::one()
    } else {
        T::one()
    };
    Ok(SolveResult {
        status: if hit_limit {
            Status::IterationLimit
        } else {
            Status::Optimal
        },
        objective_value: sign * best,
        primal: x,
        duals: Vec::new(),
        gap: (open - best).max_of(T::zero()),
        pivots: tab.pivots,
        nodes,
    })
}

trait FloorOf {
    fn floor_of(self) -> Self;
}

impl<T: Scalar> FloorOf for T {
    fn floor_of(self) -> Self {
        // binaries live in [0, 1]
        if self >= T::one() {
            T::one()
        } else if self < T::zero() {
            -T::one()
        } else {
            T::zero()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::*;

    fn knapsack() -> LinearModel<f64> {
        // max 5a + 4b + 3c, 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
        let mut m = LinearModel::<f64>::new(Sense::Maximize);
        let v: Vec<VarId> = (0..3).map(|i| m.add_binary(format!("x{i}"))).collect();
        m.add_constraint("r1", vec![(v[0], 2.0), (v[1], 3.0), (v[2], 1.0)], Relation::Le, 5.0);
        m.add_constraint("r2", vec![(v[0], 4.0), (v[1], 1.0), (v[2], 2.0)], Relation::Le, 11.0);
        m.add_constraint("r3", vec![(v[0], 3.0), (v[1], 4.0), (v[2], 2.0)], Relation::Le, 8.0);
        m.set_objective(Sense::Maximize, vec![(v[0], 5.0), (v[1], 4.0), (v[2], 3.0)]);
        m
    }

    #[test]
    fn small_knapsack() {
        let m = knapsack();
        let r = solve_milp(&m, 1e-8, 1000).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective_value - 9.0).abs() < 1e-9);
        assert_eq!(r.primal, vec![1.0, 1.0, 0.0]);
        assert!(r.gap <= 1e-8);
    }

    #[test]
    fn relaxation_dominates() {
        let mut m = LinearModel::<f64>::new(Sense::Maximize);
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        m.add_constraint("c", vec![(a, 2.0), (b, 2.0)], Relation::Le, 3.0);
        m.set_objective(Sense::Maximize, vec![(a, 1.0), (b, 1.0)]);
        let lp = solve_lp(&m, 1e-9).unwrap();
        let ip = solve_milp(&m, 1e-8, 100).unwrap();
        assert!((lp.objective_value - 1.5).abs() < 1e-9);
        assert!((ip.objective_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_milp() {
        let mut m = LinearModel::<f64>::new(Sense::Maximize);
        let a = m.add_binary("a");
        m.add_constraint("c", vec![(a, 2.0)], Relation::Eq, 1.0);
        assert_eq!(solve_milp(&m, 1e-8, 100).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn minimization_milp() {
        // min a + 2b + 3c, a + b >= 1, b + c >= 1
        let mut m = LinearModel::<f64>::new(Sense::Minimize);
        let v: Vec<VarId> = (0..3).map(|i| m.add_binary(format!("x{i}"))).collect();
        m.add_constraint("p", vec![(v[0], 1.0), (v[1], 1.0)], Relation::Ge, 1.0);
        m.add_constraint("q", vec![(v[1], 1.0), (v[2], 1.0)], Relation::Ge, 1.0);
        m.set_objective(Sense::Minimize, vec![(v[0], 1.0), (v[1], 2.0), (v[2], 3.0)]);
        let r = solve_milp(&m, 1e-8, 100).unwrap();
        assert!((r.objective_value - 2.0).abs() < 1e-9);
        assert_eq!(r.primal, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn deterministic() {
        let m = knapsack();
        let a = solve_milp(&m, 1e-8, 1000).unwrap();
        let b = solve_milp(&m, 1e-8, 1000).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn node_limit_reports_iteration_limit() {
        let mut m = LinearModel::<f64>::new(Sense::Maximize);
        let v: Vec<VarId> = (0..8).map(|i| m.add_binary(format!("x{i}"))).collect();
        m.add_constraint(
            "c",
            v.iter().map(|&x| (x, 2.0)).collect(),
            Relation::Le,
            7.0,
        );
        m.set_objective(Sense::Maximize, v.iter().map(|&x| (x, 1.0)).collect());
        let r = solve_milp(&m, 1e-8, 1).unwrap();
        assert_eq!(r.status, Status::IterationLimit);
        let full = solve_milp(&m, 1e-8, 10_000).unwrap();
        assert!((full.objective_value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn fixed_binaries_keep_their_bounds_across_nodes() {
        let mut m = LinearModel::<f64>::new(Sense::Maximize);
        let a = m.add_var("a", Some(1.0), Some(1.0), Integrality::Binary);
        let b = m.add_binary("b");
        let c = m.add_binary("c");
        m.add_constraint("bc", vec![(b, 1.0), (c, 1.0)], Relation::Le, 1.5);
        m.set_objective(Sense::Maximize, vec![(a, -1.0), (b, 1.0), (c, 1.0)]);
        let r = solve_milp(&m, 1e-8, 1000).unwrap();
        assert!(r.objective_value.abs() < 1e-9);
        assert_eq!(r.primal[0], 1.0);
        assert!(r.nodes > 1);
    }
}
