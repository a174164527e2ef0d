//! Solver-agnostic LP/MILP layer.
//!
//! [`LinearModel`] collects variables, rows and an objective. The built-in
//! backend solves LPs with a bounded-variable tableau simplex (primal for
//! cold starts, dual for re-optimization) and MILPs by depth-first
//! branch-and-bound over binary variables. Other engines plug in through
//! [`MilpBackend`].

mod bnb;
mod format;
mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use bnb::branch_and_bound;
pub use simplex::solve_lp_with;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Integrality {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable<T> {
    pub name: String,
    /// `None` means unbounded below.
    pub lower: Option<T>,
    /// `None` means unbounded above.
    pub upper: Option<T>,
    pub integrality: Integrality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub name: String,
    pub coeffs: Vec<(VarId, T)>,
    pub relation: Relation,
    pub rhs: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<T> {
    pub variables: Vec<Variable<T>>,
    pub constraints: Vec<Constraint<T>>,
    pub objective: Vec<(VarId, T)>,
    pub sense: Sense,
}

impl<T: Scalar> Default for LinearModel<T> {
    fn default() -> Self {
        Self::new(Sense::Maximize)
    }
}

impl<T: Scalar> LinearModel<T> {
    pub fn new(sense: Sense) -> Self {
        Self {
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            sense,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: Option<T>,
        upper: Option<T>,
        integrality: Integrality,
    ) -> VarId {
        let id = VarId(self.variables.len());
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            integrality,
        });
        id
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: T, upper: T) -> VarId {
        self.add_var(name, Some(lower), Some(upper), Integrality::Continuous)
    }

    pub fn add_nonneg(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, Some(T::zero()), None, Integrality::Continuous)
    }

    pub fn add_free(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, None, None, Integrality::Continuous)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, Some(T::zero()), Some(T::one()), Integrality::Binary)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, T)>,
        relation: Relation,
        rhs: T,
    ) -> RowId {
        let id = RowId(self.constraints.len());
        self.constraints.push(Constraint {
            name: name.into(),
            coeffs,
            relation,
            rhs,
        });
        id
    }

    pub fn set_objective(&mut self, sense: Sense, coeffs: Vec<(VarId, T)>) {
        self.sense = sense;
        self.objective = coeffs;
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.integrality == Integrality::Binary)
            .map(|(i, _)| VarId(i))
    }

    pub fn num_binaries(&self) -> usize {
        self.binaries().count()
    }

    /// Checks the structural invariants: rows reference declared variables,
    /// binaries live in `[0, 1]`, bounds are ordered.
    pub fn check(&self) -> Result<()> {
        let n = self.variables.len();
        for (i, v) in self.variables.iter().enumerate() {
            if let (Some(l), Some(u)) = (v.lower, v.upper) {
                if l > u {
                    return Err(Error::InvalidParams(format!(
                        "variable {i} ({}) has lower > upper",
                        v.name
                    )));
                }
            }
            if v.integrality == Integrality::Binary {
                let ok_lo = v.lower.is_some_and(|l| l >= T::zero());
                let ok_hi = v.upper.is_some_and(|u| u <= T::one());
                if !ok_lo || !ok_hi {
                    return Err(Error::InvalidParams(format!(
                        "binary variable {i} ({}) bounds outside [0, 1]",
                        v.name
                    )));
                }
            }
        }
        for (r, c) in self.constraints.iter().enumerate() {
            if let Some((v, _)) = c.coeffs.iter().find(|(v, _)| v.0 >= n) {
                return Err(Error::InvalidParams(format!(
                    "row {r} ({}) references undeclared variable {}",
                    c.name, v.0
                )));
            }
        }
        if let Some((v, _)) = self.objective.iter().find(|(v, _)| v.0 >= n) {
            return Err(Error::InvalidParams(format!(
                "objective references undeclared variable {}",
                v.0
            )));
        }
        Ok(())
    }

    /// Objective value of `x`.
    pub fn evaluate(&self, x: &[T]) -> T {
        self.objective
            .iter()
            .fold(T::zero(), |acc, &(v, c)| acc + c * x[v.0])
    }

    /// Row activity `a_i · x`.
    pub fn activity(&self, row: usize, x: &[T]) -> T {
        self.constraints[row]
            .coeffs
            .iter()
            .fold(T::zero(), |acc, &(v, c)| acc + c * x[v.0])
    }

    /// Largest violation of any row or bound by `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for (i, c) in self.constraints.iter().enumerate() {
            let a = self.activity(i, x);
            let v = match c.relation {
                Relation::Le => a - c.rhs,
                Relation::Ge => c.rhs - a,
                Relation::Eq => (a - c.rhs).abs(),
            };
            worst = worst.max_of(v);
        }
        for (j, var) in self.variables.iter().enumerate() {
            if let Some(l) = var.lower {
                worst = worst.max_of(l - x[j]);
            }
            if let Some(u) = var.upper {
                worst = worst.max_of(x[j] - u);
            }
        }
        worst
    }

    /// Dual objective of a row-dual vector `y` (shadow prices, `∂obj/∂rhs`),
    /// with variable-bound multipliers chosen optimally. Returns `None` when
    /// `y` has the wrong sign pattern or would need an infinite bound.
    ///
    /// For a maximization, any valid `y` bounds the optimum from above, so
    /// equality with the primal objective certifies optimality.
    pub fn dual_objective(&self, y: &[T], tol: T) -> Option<T> {
        let max = self.sense == Sense::Maximize;
        // Work in maximization form: multipliers of the negated objective.
        let flip = |v: T| if max { v } else { -v };
        let mut obj = T::zero();
        for (i, c) in self.constraints.iter().enumerate() {
            let yi = flip(y[i]);
            let ok = match c.relation {
                Relation::Le => yi >= -tol,
                Relation::Ge => yi <= tol,
                Relation::Eq => true,
            };
            if !ok {
                return None;
            }
            obj += yi * c.rhs;
        }
        let mut reduced: Vec<T> = vec![T::zero(); self.variables.len()];
        for &(v, c) in &self.objective {
            reduced[v.0] += flip(c);
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let yi = flip(y[i]);
            for &(v, a) in &c.coeffs {
                reduced[v.0] -= yi * a;
            }
        }
        for (j, var) in self.variables.iter().enumerate() {
            let r = reduced[j];
            if r > tol {
                obj += r * var.upper?;
            } else if r < -tol {
                obj += r * var.lower?;
            }
        }
        Some(flip(obj))
    }

    /// Model in LP text format (objective, rows, bounds, binaries) with a
    /// deterministic field order.
    pub fn to_lp_string(&self) -> String {
        format::write_lp(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<T> {
    pub status: Status,
    pub objective_value: T,
    pub primal: Vec<T>,
    /// Row shadow prices `∂objective/∂rhs` (LP solves only; empty for MILPs).
    pub duals: Vec<T>,
    /// `|best bound - incumbent|` for MILPs, zero for LPs.
    pub gap: T,
    /// Simplex pivots performed.
    pub pivots: usize,
    /// Branch-and-bound nodes explored.
    pub nodes: usize,
}

impl<T: Scalar> SolveResult<T> {
    pub(crate) fn without_solution(status: Status) -> Self {
        Self {
            status,
            objective_value: T::zero(),
            primal: Vec::new(),
            duals: Vec::new(),
            gap: T::zero(),
            pivots: 0,
            nodes: 0,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    pub feas_tol: f64,
    /// Reduced-cost optimality tolerance.
    pub opt_tol: f64,
    /// Smallest tableau entry accepted as a pivot.
    pub pivot_tol: f64,
    pub max_pivots: Option<usize>,
    /// Reinversions allowed when the final point fails verification.
    pub refactor_retries: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            pivot_tol: 1e-9,
            max_pivots: None,
            refactor_retries: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpOptions {
    pub lp: LpOptions,
    pub abs_gap: f64,
    pub int_tol: f64,
    pub node_limit: usize,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            lp: LpOptions::default(),
            abs_gap: 1e-8,
            int_tol: 1e-6,
            node_limit: 1_000_000,
        }
    }
}

/// Solves the LP relaxation (integrality marks ignored).
pub fn solve_lp<T: Scalar>(m: &LinearModel<T>, feas_tol: f64) -> Result<SolveResult<T>> {
    solve_lp_with(
        m,
        &LpOptions {
            feas_tol,
            ..LpOptions::default()
        },
    )
}

/// Solves a model with binary variables by branch-and-bound.
pub fn solve_milp<T: Scalar>(
    m: &LinearModel<T>,
    abs_gap: f64,
    node_limit: usize,
) -> Result<SolveResult<T>> {
    branch_and_bound(
        m,
        &MilpOptions {
            abs_gap,
            node_limit,
            ..MilpOptions::default()
        },
    )
}

/// An LP/MILP engine. The built-in engine is [`BuiltinBackend`].
pub trait MilpBackend<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;
    fn solve_lp(&self, m: &LinearModel<T>, opts: &LpOptions) -> Result<SolveResult<T>>;
    fn solve_milp(&self, m: &LinearModel<T>, opts: &MilpOptions) -> Result<SolveResult<T>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinBackend;

impl<T: Scalar> MilpBackend<T> for BuiltinBackend {
    fn name(&self) -> &str {
        "builtin"
    }

    fn solve_lp(&self, m: &LinearModel<T>, opts: &LpOptions) -> Result<SolveResult<T>> {
        solve_lp_with(m, opts)
    }

    fn solve_milp(&self, m: &LinearModel<T>, opts: &MilpOptions) -> Result<SolveResult<T>> {
        branch_and_bound(m, opts)
    }
}
