//! Dense bounded-variable tableau simplex.
//!
//! Every row `i` gets a logical variable `s_i = a_i · x` whose bounds encode
//! the relation, so the system is `A x - s = 0` with bounds on all columns.
//! The tableau stores `B⁻¹ [A | -I]`; basic values satisfy
//! `x_B = -Σ_N T_j x_j`. Internally the objective is always maximized.

use super::{LinearModel, LpOptions, Relation, Sense, SolveResult, Status};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const NONBASIC: usize = usize::MAX;
/// Consecutive degenerate steps before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;
/// Largest primal violation accepted before reinverting.
const VERIFY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

pub(crate) struct Tableau<T> {
    m: usize,
    n: usize,
    w: usize,
    t: Vec<T>,
    d: Vec<T>,
    c: Vec<T>,
    lo: Vec<Option<T>>,
    hi: Vec<Option<T>>,
    x: Vec<T>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    cols: Vec<Vec<(usize, T)>>,
    ftol: T,
    otol: T,
    ptol: T,
    drop: T,
    tie: T,
    pub pivots: usize,
    max_pivots: usize,
    /// Pivot count at which the current solve gives up.
    limit_at: usize,
    bland: bool,
    degenerate: usize,
    minimize: bool,
}

struct Ratio<T> {
    step: T,
    row: Option<usize>,
    target: T,
}

impl<T: Scalar> Tableau<T> {
    pub fn new(model: &LinearModel<T>, opts: &LpOptions) -> Self {
        let m = model.num_rows();
        let n = model.num_vars();
        let w = n + m;
        let mut t = vec![T::zero(); m * w];
        let mut cols: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for (i, row) in model.constraints.iter().enumerate() {
            for &(v, a) in &row.coeffs {
                t[i * w + v.0] -= a;
            }
            for k in 0..n {
                let a = -t[i * w + k];
                if a != T::zero() && !cols[k].last().is_some_and(|&(r, _)| r == i) {
                    cols[k].push((i, a));
                }
            }
            t[i * w + n + i] = T::one();
        }
        let mut lo = Vec::with_capacity(w);
        let mut hi = Vec::with_capacity(w);
        for v in &model.variables {
            lo.push(v.lower);
            hi.push(v.upper);
        }
        for row in &model.constraints {
            let (l, u) = match row.relation {
                Relation::Le => (None, Some(row.rhs)),
                Relation::Ge => (Some(row.rhs), None),
                Relation::Eq => (Some(row.rhs), Some(row.rhs)),
            };
            lo.push(l);
            hi.push(u);
        }
        let minimize = model.sense == Sense::Minimize;
        let mut c = vec![T::zero(); w];
        for &(v, coef) in &model.objective {
            c[v.0] += if minimize { -coef } else { coef };
        }
        let mut x = vec![T::zero(); w];
        for j in 0..n {
            x[j] = lo[j].or(hi[j]).unwrap_or_else(T::zero);
        }
        for i in 0..m {
            x[n + i] = model.activity(i, &x[..n]);
        }
        let basis: Vec<usize> = (n..w).collect();
        let mut pos = vec![NONBASIC; w];
        for (i, &b) in basis.iter().enumerate() {
            pos[b] = i;
        }
        let d = c.clone();
        Self {
            m,
            n,
            w,
            t,
            d,
            c,
            lo,
            hi,
            x,
            basis,
            pos,
            cols,
            ftol: T::tol(opts.feas_tol),
            otol: T::tol(opts.opt_tol),
            ptol: T::tol(opts.pivot_tol),
            drop: T::tol(1e-14),
            tie: T::tol(1e-12),
            pivots: 0,
            max_pivots: opts.max_pivots.unwrap_or(50 * (w + 10) + 10_000),
            limit_at: opts.max_pivots.unwrap_or(50 * (w + 10) + 10_000),
            bland: false,
            degenerate: 0,
            minimize,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.t[i * self.w + j]
    }

    fn is_fixed(&self, j: usize) -> bool {
        matches!((self.lo[j], self.hi[j]), (Some(l), Some(u)) if l == u)
    }

    /// -1 below its lower bound, +1 above its upper bound, 0 otherwise.
    fn infeasibility(&self, j: usize) -> i8 {
        let v = self.x[j];
        if self.lo[j].is_some_and(|l| v < l - self.ftol) {
            -1
        } else if self.hi[j].is_some_and(|u| v > u + self.ftol) {
            1
        } else {
            0
        }
    }

    fn can_increase(&self, j: usize) -> bool {
        self.hi[j].map_or(true, |u| self.x[j] < u)
    }

    fn can_decrease(&self, j: usize) -> bool {
        self.lo[j].map_or(true, |l| self.x[j] > l)
    }

    /// Improving direction of nonbasic `j` under reduced cost `dj`.
    fn direction(&self, j: usize, dj: T) -> Option<T> {
        if self.is_fixed(j) {
            return None;
        }
        if dj > self.otol && self.can_increase(j) {
            Some(T::one())
        } else if dj < -self.otol && self.can_decrease(j) {
            Some(-T::one())
        } else {
            None
        }
    }

    fn choose_entering(&self, costs: &[T]) -> Option<(usize, T)> {
        let mut best: Option<(usize, T, T)> = None;
        for j in 0..self.w {
            if self.pos[j] != NONBASIC {
                continue;
            }
            let Some(dir) = self.direction(j, costs[j]) else {
                continue;
            };
            if self.bland {
                return Some((j, dir));
            }
            let score = costs[j].abs();
            if best.as_ref().map_or(true, |b| score > b.2) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn ratio_test(&self, j: usize, dir: T, phase1: bool) -> Option<Ratio<T>> {
        let mut best: Option<Ratio<T>> = match (dir > T::zero(), self.lo[j], self.hi[j]) {
            (true, Some(l), Some(u)) => Some(Ratio {
                step: u - self.x[j].max_of(l),
                row: None,
                target: u,
            }),
            (false, Some(l), Some(u)) => Some(Ratio {
                step: self.x[j].min_of(u) - l,
                row: None,
                target: l,
            }),
            (true, _, Some(u)) => Some(Ratio {
                step: (u - self.x[j]).max_of(T::zero()),
                row: None,
                target: u,
            }),
            (false, Some(l), _) => Some(Ratio {
                step: (self.x[j] - l).max_of(T::zero()),
                row: None,
                target: l,
            }),
            _ => None,
        };
        let mut best_alpha = T::zero();
        for i in 0..self.m {
            let alpha = self.at(i, j);
            if alpha.abs() <= self.ptol || alpha == T::zero() {
                continue;
            }
            let delta = -alpha * dir;
            let b = self.basis[i];
            let xv = self.x[b];
            let state = if phase1 { self.infeasibility(b) } else { 0 };
            let limit = match state {
                -1 if delta > T::zero() => self.lo[b].map(|l| ((l - xv) / delta, l)),
                -1 => None,
                1 if delta < T::zero() => self.hi[b].map(|u| ((xv - u) / -delta, u)),
                1 => None,
                _ if delta < T::zero() => self.lo[b].map(|l| ((xv - l).max_of(T::zero()) / -delta, l)),
                _ => self.hi[b].map(|u| ((u - xv).max_of(T::zero()) / delta, u)),
            };
            let Some((step, target)) = limit else {
                continue;
            };
            let replace = match &best {
                None => true,
                Some(cur) => {
                    if step < cur.step - self.tie {
                        true
                    } else if step <= cur.step + self.tie {
                        match cur.row {
                            None => false,
                            Some(r) => {
                                if self.bland {
                                    b < self.basis[r]
                                } else {
                                    alpha.abs() > best_alpha
                                }
                            }
                        }
                    } else {
                        false
                    }
                }
            };
            if replace {
                best = Some(Ratio {
                    step,
                    row: Some(i),
                    target,
                });
                best_alpha = alpha.abs();
            }
        }
        best
    }

    /// Moves nonbasic `j` by `dir * step`, updating the basic values.
    fn shift(&mut self, j: usize, amount: T) {
        if amount == T::zero() {
            return;
        }
        self.x[j] += amount;
        for i in 0..self.m {
            let alpha = self.at(i, j);
            if alpha != T::zero() {
                let b = self.basis[i];
                self.x[b] -= alpha * amount;
            }
        }
    }

    fn apply(&mut self, j: usize, dir: T, r: Ratio<T>) {
        if r.step > T::zero() {
            self.degenerate = 0;
            self.bland = false;
        } else {
            self.degenerate += 1;
            if self.degenerate > DEGENERATE_LIMIT {
                self.bland = true;
            }
        }
        self.shift(j, dir * r.step);
        match r.row {
            None => self.x[j] = r.target,
            Some(row) => {
                let leaving = self.basis[row];
                self.x[leaving] = r.target;
                self.pivot(row, j);
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let w = self.w;
        let inv = T::one() / self.at(r, j);
        let mut nz: Vec<(usize, T)> = Vec::new();
        for k in 0..w {
            let v = &mut self.t[r * w + k];
            if *v != T::zero() {
                *v *= inv;
                nz.push((k, *v));
            }
        }
        self.t[r * w + j] = T::one();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + j];
            if f == T::zero() {
                continue;
            }
            let row = &mut self.t[i * w..(i + 1) * w];
            for &(k, v) in &nz {
                let val = row[k] - f * v;
                row[k] = if val.abs() < self.drop { T::zero() } else { val };
            }
            row[j] = T::zero();
        }
        let f = self.d[j];
        if f != T::zero() {
            for &(k, v) in &nz {
                self.d[k] -= f * v;
            }
        }
        self.d[j] = T::zero();
        let leaving = self.basis[r];
        self.pos[leaving] = NONBASIC;
        self.basis[r] = j;
        self.pos[j] = r;
        self.pivots += 1;
    }

    /// Drives the basic variables into their bounds by minimizing the sum of
    /// infeasibilities.
    pub fn phase1(&mut self) -> Outcome {
        let mut costs = vec![T::zero(); self.w];
        loop {
            if self.pivots >= self.limit_at {
                return Outcome::IterationLimit;
            }
            costs.iter_mut().for_each(|c| *c = T::zero());
            let mut any = false;
            for i in 0..self.m {
                let s = self.infeasibility(self.basis[i]);
                if s == 0 {
                    continue;
                }
                any = true;
                // maximize sum of (+x for below, -x for above)
                let sign = if s < 0 { T::one() } else { -T::one() };
                let row = &self.t[i * self.w..(i + 1) * self.w];
                for (k, &a) in row.iter().enumerate() {
                    if a != T::zero() {
                        costs[k] -= sign * a;
                    }
                }
            }
            if !any {
                return Outcome::Optimal;
            }
            for i in 0..self.m {
                costs[self.basis[i]] = T::zero();
            }
            let Some((j, dir)) = self.choose_entering(&costs) else {
                return Outcome::Infeasible;
            };
            let Some(r) = self.ratio_test(j, dir, true) else {
                return Outcome::Infeasible;
            };
            self.apply(j, dir, r);
        }
    }

    pub fn phase2(&mut self) -> Outcome {
        loop {
            if self.pivots >= self.limit_at {
                return Outcome::IterationLimit;
            }
            let Some((j, dir)) = self.choose_entering(&self.d) else {
                return Outcome::Optimal;
            };
            let Some(r) = self.ratio_test(j, dir, false) else {
                return Outcome::Unbounded;
            };
            self.apply(j, dir, r);
        }
    }

    /// Dual simplex from a dual-feasible basis, then a primal clean-up pass.
    pub fn dual(&mut self) -> Outcome {
        self.limit_at = self.pivots + self.max_pivots;
        loop {
            if self.pivots >= self.limit_at {
                return Outcome::IterationLimit;
            }
            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.m {
                let b = self.basis[i];
                let s = self.infeasibility(b);
                if s == 0 {
                    continue;
                }
                let amount = if s < 0 {
                    self.lo[b].expect("below a lower bound") - self.x[b]
                } else {
                    self.x[b] - self.hi[b].expect("above an upper bound")
                };
                let better = match leave {
                    None => true,
                    Some((r, cur)) => {
                        if self.bland {
                            b < self.basis[r]
                        } else {
                            amount > cur
                        }
                    }
                };
                if better {
                    leave = Some((i, amount));
                }
            }
            let Some((r, _)) = leave else {
                return match self.phase2() {
                    Outcome::Optimal if self.primal_infeasible() => self.phase1_then_2(),
                    other => other,
                };
            };
            let b = self.basis[r];
            let below = self.infeasibility(b) < 0;
            let target = if below {
                self.lo[b].expect("bounded")
            } else {
                self.hi[b].expect("bounded")
            };
            let need = if below { T::one() } else { -T::one() };
            let mut best: Option<(usize, T, T, T)> = None;
            for j in 0..self.w {
                if self.pos[j] != NONBASIC || self.is_fixed(j) {
                    continue;
                }
                let alpha = self.at(r, j);
                if alpha.abs() <= self.ptol || alpha == T::zero() {
                    continue;
                }
                // x_b moves by -alpha * dir per unit of x_j
                let dir = if alpha < T::zero() { need } else { -need };
                let allowed = if dir > T::zero() {
                    self.can_increase(j)
                } else {
                    self.can_decrease(j)
                };
                if !allowed {
                    continue;
                }
                let ratio = self.d[j].abs() / alpha.abs();
                let better = match best {
                    None => true,
                    Some((_, _, br, ba)) => {
                        if ratio < br - self.tie {
                            true
                        } else if ratio <= br + self.tie {
                            !self.bland && alpha.abs() > ba
                        } else {
                            false
                        }
                    }
                };
                if better {
                    best = Some((j, dir, ratio, alpha.abs()));
                }
            }
            let Some((j, dir, ratio, _)) = best else {
                return Outcome::Infeasible;
            };
            if ratio > T::zero() {
                self.degenerate = 0;
                self.bland = false;
            } else {
                self.degenerate += 1;
                if self.degenerate > DEGENERATE_LIMIT {
                    self.bland = true;
                }
            }
            let alpha = self.at(r, j);
            let step = (target - self.x[b]).abs() / alpha.abs();
            self.shift(j, dir * step);
            self.x[b] = target;
            self.pivot(r, j);
        }
    }

    fn primal_infeasible(&self) -> bool {
        self.basis.iter().any(|&b| self.infeasibility(b) != 0)
    }

    fn phase1_then_2(&mut self) -> Outcome {
        match self.phase1() {
            Outcome::Optimal => self.phase2(),
            other => other,
        }
    }

    /// Cold solve: phase 1, phase 2.
    pub fn solve(&mut self) -> Outcome {
        self.limit_at = self.pivots + self.max_pivots;
        self.phase1_then_2()
    }

    /// Changes the bounds of column `j`, moving it if it is nonbasic so that
    /// the basis stays dual feasible.
    pub fn set_bounds(&mut self, j: usize, lo: Option<T>, hi: Option<T>) {
        self.lo[j] = lo;
        self.hi[j] = hi;
        if self.pos[j] != NONBASIC {
            return;
        }
        let dj = self.d[j];
        let cur = self.x[j];
        let target = if dj > self.otol {
            hi.or(lo)
        } else if dj < -self.otol {
            lo.or(hi)
        } else if lo.is_some_and(|l| cur < l) {
            lo
        } else if hi.is_some_and(|u| cur > u) {
            hi
        } else {
            Some(cur)
        };
        if let Some(v) = target {
            self.shift(j, v - cur);
            self.x[j] = v;
        }
    }

    pub fn bounds(&self, j: usize) -> (Option<T>, Option<T>) {
        (self.lo[j], self.hi[j])
    }

    /// Recomputes the tableau from the original columns for the current
    /// basis, then the basic values and reduced costs.
    pub fn reinvert(&mut self) -> Result<()> {
        let (m, w, n) = (self.m, self.w, self.n);
        // Gauss-Jordan on [B | A_full].
        let bw = m + w;
        let mut aug = vec![T::zero(); m * bw];
        let put_col = |aug: &mut Vec<T>, col: usize, j: usize, cols: &Vec<Vec<(usize, T)>>| {
            if j < n {
                for &(i, a) in &cols[j] {
                    aug[i * bw + col] = a;
                }
            } else {
                aug[(j - n) * bw + col] = -T::one();
            }
        };
        for (k, &b) in self.basis.iter().enumerate() {
            put_col(&mut aug, k, b, &self.cols);
        }
        for j in 0..w {
            put_col(&mut aug, m + j, j, &self.cols);
        }
        for k in 0..m {
            let p = (k..m)
                .max_by(|&a, &b| {
                    aug[a * bw + k]
                        .abs()
                        .partial_cmp(&aug[b * bw + k].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("nonempty");
            if aug[p * bw + k] == T::zero() || aug[p * bw + k].abs() <= self.drop {
                return Err(Error::SolverFailure("singular basis on reinversion".into()));
            }
            if p != k {
                for c in 0..bw {
                    aug.swap(p * bw + c, k * bw + c);
                }
            }
            let inv = T::one() / aug[k * bw + k];
            for c in 0..bw {
                aug[k * bw + c] *= inv;
            }
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = aug[i * bw + k];
                if f == T::zero() {
                    continue;
                }
                for c in 0..bw {
                    let v = aug[k * bw + c];
                    if v != T::zero() {
                        aug[i * bw + c] -= f * v;
                    }
                }
            }
        }
        for i in 0..m {
            self.t[i * w..(i + 1) * w].copy_from_slice(&aug[i * bw + m..(i + 1) * bw]);
        }
        for i in 0..m {
            let mut v = T::zero();
            for j in 0..w {
                if self.pos[j] == NONBASIC {
                    let a = self.at(i, j);
                    if a != T::zero() {
                        v -= a * self.x[j];
                    }
                }
            }
            let b = self.basis[i];
            self.x[b] = v;
        }
        for j in 0..w {
            let mut v = self.c[j];
            for i in 0..m {
                let a = self.at(i, j);
                if a != T::zero() {
                    v -= self.c[self.basis[i]] * a;
                }
            }
            self.d[j] = if self.pos[j] == NONBASIC { v } else { T::zero() };
        }
        Ok(())
    }

    pub fn primal(&self) -> Vec<T> {
        self.x[..self.n].to_vec()
    }

    /// Objective in the model's own sense.
    pub fn objective(&self) -> T {
        let z = (0..self.n).fold(T::zero(), |acc, j| acc + self.c[j] * self.x[j]);
        if self.minimize {
            -z
        } else {
            z
        }
    }

    /// Internal (maximization) objective.
    pub fn max_objective(&self) -> T {
        (0..self.n).fold(T::zero(), |acc, j| acc + self.c[j] * self.x[j])
    }

    /// Row shadow prices in the model's own sense.
    pub fn duals(&self) -> Vec<T> {
        (0..self.m)
            .map(|i| {
                let y = self.d[self.n + i];
                if self.minimize {
                    -y
                } else {
                    y
                }
            })
            .collect()
    }
}

/// Solves the LP relaxation of `model`.
pub fn solve_lp_with<T: Scalar>(model: &LinearModel<T>, opts: &LpOptions) -> Result<SolveResult<T>> {
    model.check()?;
    let mut tab = Tableau::new(model, opts);
    let outcome = tab.solve();
    finish(model, opts, &mut tab, outcome)
}

pub(crate) fn finish<T: Scalar>(
    model: &LinearModel<T>,
    opts: &LpOptions,
    tab: &mut Tableau<T>,
    mut outcome: Outcome,
) -> Result<SolveResult<T>> {
    let verify = T::tol(VERIFY_TOL);
    let mut retries = 0;
    loop {
        let status = match outcome {
            Outcome::Optimal => Status::Optimal,
            Outcome::Infeasible => Status::Infeasible,
            Outcome::Unbounded => Status::Unbounded,
            Outcome::IterationLimit => Status::IterationLimit,
        };
        if status != Status::Optimal {
            let mut r = SolveResult::without_solution(status);
            r.pivots = tab.pivots;
            return Ok(r);
        }
        let x = tab.primal();
        if model.max_violation(&x) <= verify {
            return Ok(SolveResult {
                status,
                objective_value: tab.objective(),
                primal: x,
                duals: tab.duals(),
                gap: T::zero(),
                pivots: tab.pivots,
                nodes: 0,
            });
        }
        if retries >= opts.refactor_retries {
            return Err(Error::SolverFailure(format!(
                "numerical failure: primal violation {} after {retries} reinversions",
                model.max_violation(&x)
            )));
        }
        retries += 1;
        log::debug!("reinverting after violation {}", model.max_violation(&x));
        tab.reinvert()?;
        outcome = tab.solve();
    }
}
