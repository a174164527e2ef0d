//! Column generation: the restricted master LP alternates with the team
//! best-response oracle until the two bounds meet.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bro::{c18_oracle_with, options_for_epsilon, solve_bro_with, BroSolution};
use crate::error::Error as CoreError;
use crate::game::GameTree;
use crate::lp::{BuiltinBackend, LpOptions, MilpBackend};
use crate::master::{find_duplicate, solve_core_lp_with, HybridColumn, MasterSolution};
use crate::scalar::Scalar;
use crate::sequence::{PurePlan, RealizationPlan};

/// Mixture entries above this count towards the support.
pub const SUPPORT_TOL: f64 = 1e-9;
/// Largest tolerated gap between the master's primal and dual objectives.
pub const DUALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    /// The linearized multilinear oracle.
    #[default]
    Art,
    /// The leaf-binary baseline; returns pure joint columns.
    C18,
}

impl std::str::FromStr for OracleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "art" => Ok(Self::Art),
            "c18" => Ok(Self::C18),
            other => Err(format!("unknown oracle `{other}` (expected art or c18)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmbConfig {
    /// Absolute utility gap accepted at termination; 0 asks for an exact
    /// equilibrium up to `convergence_tol`.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    pub oracle: OracleKind,
    /// Emit the associated constraints in the oracle MILP.
    pub associated_constraints: bool,
    /// Checked between iterations only.
    pub time_limit: Option<Duration>,
    pub node_limit: usize,
}

impl Default for CmbConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            max_iterations: 10_000,
            convergence_tol: 1e-7,
            oracle: OracleKind::Art,
            associated_constraints: true,
            time_limit: None,
            node_limit: 1_000_000,
        }
    }
}

impl CmbConfig {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn threshold(&self) -> f64 {
        self.epsilon.max(self.convergence_tol)
    }

    fn check(&self) -> Result<(), CoreError> {
        if !(self.epsilon >= 0.0) {
            return Err(CoreError::InvalidParams(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(CoreError::InvalidParams(format!(
                "convergence_tol must be > 0, got {}",
                self.convergence_tol
            )));
        }
        if self.max_iterations == 0 {
            return Err(CoreError::InvalidParams("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Seconds spent per phase.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub master: f64,
    pub oracle: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmbResult<T> {
    /// Master value of the last iteration (the lower bound).
    pub value: T,
    /// Upper bound from the last oracle call.
    pub upper_bound: T,
    pub columns: Vec<HybridColumn<T>>,
    pub mixture: Vec<T>,
    pub adversary_plan: RealizationPlan<T>,
    pub iterations: usize,
    pub support_size: usize,
    /// `(lower, upper)` per iteration.
    pub bound_trace: Vec<(T, T)>,
    /// Largest primal-dual gap seen over all master solves.
    pub max_duality_gap: f64,
    pub timings: Timings,
}

impl<T: Scalar> CmbResult<T> {
    pub fn gap(&self) -> T {
        self.upper_bound - self.value
    }
}

#[derive(Debug, Error)]
pub enum CmbError<T: Scalar> {
    #[error("no convergence after {} iterations (gap {})", .0.iterations, .0.gap())]
    DidNotConverge(Box<CmbResult<T>>),

    #[error("time limit reached after {} iterations (gap {})", .0.iterations, .0.gap())]
    TimeLimit(Box<CmbResult<T>>),

    #[error("oracle repeated column {duplicate_of} with gap {gap} still open")]
    NumericalStall {
        duplicate_of: usize,
        gap: f64,
        partial: Box<CmbResult<T>>,
    },

    #[error(transparent)]
    Solver(#[from] CoreError),
}

impl<T: Scalar> CmbError<T> {
    /// The best result available when the run stopped early.
    pub fn partial(&self) -> Option<&CmbResult<T>> {
        match self {
            Self::DidNotConverge(p) | Self::TimeLimit(p) => Some(p),
            Self::NumericalStall { partial, .. } => Some(partial),
            Self::Solver(_) => None,
        }
    }
}

/// Every team member plays the first action at every reachable
/// information set.
pub fn initial_column<T: Scalar>(g: &GameTree<T>) -> HybridColumn<T> {
    let plans: Vec<PurePlan> = g.team().map(|p| PurePlan::first_actions(g, p)).collect();
    HybridColumn::from_pure(g, &plans).expect("first-action plans are valid")
}

pub fn run_cmb<T: Scalar>(g: &GameTree<T>, cfg: &CmbConfig) -> Result<CmbResult<T>, CmbError<T>> {
    run_cmb_with(g, cfg, &BuiltinBackend)
}

fn call_oracle<T: Scalar>(
    g: &GameTree<T>,
    r_n: &RealizationPlan<T>,
    cfg: &CmbConfig,
    backend: &dyn MilpBackend<T>,
) -> Result<BroSolution<T>, CoreError> {
    let mut opts = options_for_epsilon(cfg.epsilon);
    opts.associated_constraints = cfg.associated_constraints;
    opts.milp.node_limit = cfg.node_limit;
    match cfg.oracle {
        OracleKind::Art => solve_bro_with(g, r_n, &opts, backend),
        OracleKind::C18 => c18_oracle_with(g, r_n, &opts.milp, backend),
    }
}

pub fn run_cmb_with<T: Scalar>(
    g: &GameTree<T>,
    cfg: &CmbConfig,
    backend: &dyn MilpBackend<T>,
) -> Result<CmbResult<T>, CmbError<T>> {
    cfg.check()?;
    if g.num_players() < 3 {
        return Err(CoreError::InvalidParams(format!(
            "column generation needs at least 3 players, got {}",
            g.num_players()
        ))
        .into());
    }
    let start = Instant::now();
    let threshold = T::from_f64_lossy(cfg.threshold());
    let mut columns = vec![initial_column(g)];
    let mut trace = Vec::new();
    let mut timings = Timings::default();
    let mut max_duality_gap = 0.0f64;

    loop {
        let t = Instant::now();
        let master = solve_core_lp_with(g, &columns, backend, &LpOptions::default())?;
        timings.master += t.elapsed().as_secs_f64();
        let dgap = (master.dual_value - master.value).abs().as_f64();
        max_duality_gap = max_duality_gap.max(dgap);
        if dgap > DUALITY_TOL {
            return Err(CoreError::SolverFailure(format!(
                "master LP duality gap {dgap} at iteration {}",
                trace.len() + 1
            ))
            .into());
        }

        let t = Instant::now();
        let br = call_oracle(g, &master.adversary_plan, cfg, backend)?;
        timings.oracle += t.elapsed().as_secs_f64();
        trace.push((master.value, br.value));
        log::debug!(
            "iteration {}: lower {} upper {}",
            trace.len(),
            master.value,
            br.value
        );

        let gap = br.value - master.value;
        let done = gap <= threshold;
        let snapshot = |columns: Vec<HybridColumn<T>>,
                        master: MasterSolution<T>,
                        trace: Vec<(T, T)>,
                        timings: Timings| {
            let mut timings = timings;
            timings.total = start.elapsed().as_secs_f64();
            let support_size = master
                .mixture
                .iter()
                .filter(|&&x| x > T::tol(SUPPORT_TOL))
                .count();
            CmbResult {
                value: master.value,
                upper_bound: br.value,
                columns,
                mixture: master.mixture,
                adversary_plan: master.adversary_plan,
                iterations: trace.len(),
                support_size,
                bound_trace: trace,
                max_duality_gap,
                timings,
            }
        };
        if done {
            return Ok(snapshot(columns, master, trace, timings));
        }
        if trace.len() >= cfg.max_iterations {
            return Err(CmbError::DidNotConverge(Box::new(snapshot(
                columns, master, trace, timings,
            ))));
        }
        if let Some(k) = find_duplicate(&columns, &br.column) {
            return Err(CmbError::NumericalStall {
                duplicate_of: k,
                gap: gap.as_f64(),
                partial: Box::new(snapshot(columns, master, trace, timings)),
            });
        }
        if cfg.time_limit.is_some_and(|lim| start.elapsed() >= lim) {
            return Err(CmbError::TimeLimit(Box::new(snapshot(
                columns, master, trace, timings,
            ))));
        }
        columns.push(br.column.clone());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::build_kuhn;
    use crate::game::fixtures::{pennies, toy3};
    use crate::sequence::validate_plan;

    #[test]
    fn initial_column_is_valid_and_deterministic() {
        let g: GameTree<f64> = build_kuhn(3, 3).unwrap();
        let a = initial_column(&g);
        assert_eq!(a, initial_column(&g));
        assert!(validate_plan(&a.r0, &g).unwrap());
        for p in &a.pure_rest {
            assert!(validate_plan(&p.to_realization::<f64>(), &g).unwrap());
        }
        let bound = g.leaves().iter().map(|l| l.team_payoff.abs()).fold(0.0, f64::max);
        assert!(a.payoff_by_adv_seq.iter().all(|v| v.is_finite() && v.abs() <= bound));
    }

    #[test]
    fn pennies_converges_to_zero() {
        let r = run_cmb(&pennies(), &CmbConfig::exact()).unwrap();
        assert!(r.value.abs() < 1e-9);
        assert_eq!(r.support_size, 2);
    }

    #[test]
    fn toy_converges_and_bounds_close() {
        let r = run_cmb(&toy3(), &CmbConfig::exact()).unwrap();
        let (lo, hi) = *r.bound_trace.last().unwrap();
        assert!(hi - lo <= 1e-7);
        assert!(r.columns.len() <= r.iterations + 1);
    }

    #[test]
    fn iteration_limit_returns_the_trace() {
        let g: GameTree<f64> = build_kuhn(3, 3).unwrap();
        let cfg = CmbConfig {
            max_iterations: 1,
            ..CmbConfig::exact()
        };
        match run_cmb(&g, &cfg) {
            Err(CmbError::DidNotConverge(p)) => {
                assert_eq!(p.iterations, 1);
                assert_eq!(p.bound_trace.len(), 1);
                assert!(p.gap() > 0.0);
            }
            other => panic!("expected DidNotConverge, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_config() {
        let g = toy3();
        let cfg = CmbConfig {
            epsilon: -1.0,
            ..CmbConfig::exact()
        };
        assert!(matches!(run_cmb(&g, &cfg), Err(CmbError::Solver(_))));
        let cfg = CmbConfig {
            convergence_tol: 0.0,
            ..CmbConfig::exact()
        };
        assert!(matches!(run_cmb(&g, &cfg), Err(CmbError::Solver(_))));
    }

    #[test]
    fn oracle_names_parse() {
        assert_eq!("art".parse::<OracleKind>().unwrap(), OracleKind::Art);
        assert_eq!("c18".parse::<OracleKind>().unwrap(), OracleKind::C18);
        assert!("x".parse::<OracleKind>().is_err());
    }
}
