//! Bounded-variable revised simplex.
//!
//! Every row `lo <= a x <= hi` gets a logical variable `s = a x` carrying the
//! row bounds, so the working system is `[A | -I] (x, s) = 0` with boxed
//! variables. Cold starts use a composite primal simplex (phase 1 minimizes
//! the sum of bound violations, phase 2 the objective); warm starts from a
//! dual-feasible basis run the dual simplex, which is what branch-and-bound
//! needs after tightening variable bounds.

mod lu;

use crate::error::{Error, Result};
use crate::model::{MilpModel, Sense, VarKind};
use lu::Factor;

/// Tolerance used inside the ratio tests.
const PRIMAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LpOptions {
    pub max_iters: usize,
    /// Largest bound or row violation (after row scaling) accepted at an optimum.
    pub tol_feas: f64,
    /// Reduced-cost optimality tolerance.
    pub tol_opt: f64,
    pub refactor_every: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            tol_feas: 1e-7,
            tol_opt: 1e-9,
            refactor_every: 100,
            bland_after: 1_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

/// A simplex basis over structural and logical variables, reusable as a warm start.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    basic: Vec<usize>,
    status: Vec<VarStatus>,
}

impl Basis {
    pub fn num_rows(&self) -> usize {
        self.basic.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural variable values.
    pub values: Vec<f64>,
    pub objective: f64,
    /// Per row, `∂ objective / ∂ rhs`.
    pub dual_values: Vec<f64>,
    /// Per structural variable, `c_j - Σ_i y_i a_ij`.
    pub reduced_costs: Vec<f64>,
    pub basis: Basis,
    /// Pivots (including bound flips) performed by this solve.
    pub iterations: usize,
    /// Largest violation of a row or variable bound at the returned point,
    /// in scaled row units.
    pub primal_residual: f64,
}

/// Solves an LP with no binary variables.
pub fn solve_lp(model: &MilpModel, warm_start: Option<&Basis>) -> Result<LpSolution> {
    solve_lp_with(model, warm_start, LpOptions::default())
}

pub fn solve_lp_with(model: &MilpModel, warm_start: Option<&Basis>, options: LpOptions) -> Result<LpSolution> {
    if let Some(v) = model.variables.iter().find(|v| v.kind == VarKind::Binary) {
        return Err(Error::BinaryInLp(v.name.clone()));
    }
    let mut solver = LpSolver::new(model, options)?;
    Ok(solver.solve(warm_start))
}

/// Reusable solver state: bounds may be changed between solves and the
/// previous basis passed back in.
#[derive(Debug, Clone)]
pub struct LpSolver {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    row_scale: Vec<f64>,
    col_norm: Vec<f64>,
    obj_constant: f64,
    opts: LpOptions,

    status: Vec<VarStatus>,
    basic: Vec<usize>,
    x: Vec<f64>,
    factor: Factor,
    iters: usize,
}

impl LpSolver {
    /// Binaries are treated as continuous on their bounds.
    pub fn new(model: &MilpModel, opts: LpOptions) -> Result<Self> {
        model.validate()?;
        let n = model.num_vars();
        let m = model.constraints.len();

        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        for c in &model.constraints {
            let mut terms: Vec<(usize, f64)> = c.terms.iter().map(|&(v, a)| (v.0, a)).collect();
            terms.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
            for (j, a) in terms {
                match merged.last_mut() {
                    Some((lj, la)) if *lj == j => *la += a,
                    _ => merged.push((j, a)),
                }
            }
            merged.retain(|&(_, a)| a != 0.0);
            rows.push(merged);
        }
        // One pass of geometric-mean row equilibration.
        let row_scale: Vec<f64> = rows
            .iter()
            .map(|r| {
                let (lo, hi) = r.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &(_, a)| {
                    (lo.min(a.abs()), hi.max(a.abs()))
                });
                if r.is_empty() {
                    1.0
                } else {
                    1.0 / (lo * hi).sqrt()
                }
            })
            .collect();

        let mut cols = vec![Vec::new(); n];
        for (i, r) in rows.iter().enumerate() {
            for &(j, a) in r {
                cols[j].push((i, a * row_scale[i]));
            }
        }

        let mut cost = vec![0.0; n + m];
        for &(v, c) in &model.objective.terms {
            cost[v.0] += c;
        }
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        for v in &model.variables {
            lower.push(v.lower);
            upper.push(v.upper);
        }
        for (i, c) in model.constraints.iter().enumerate() {
            let s = row_scale[i];
            let (lo, hi) = match c.sense {
                Sense::Le => (f64::NEG_INFINITY, c.rhs * s),
                Sense::Ge => (c.rhs * s, f64::INFINITY),
                Sense::Eq => (c.rhs * s, c.rhs * s),
            };
            lower.push(lo);
            upper.push(hi);
        }
        let mut col_norm: Vec<f64> = cols
            .iter()
            .map(|c| c.iter().map(|&(_, a)| a * a).sum::<f64>().sqrt().max(1e-12))
            .collect();
        col_norm.extend(std::iter::repeat_n(1.0, m));

        let mut solver = Self {
            n,
            m,
            cols,
            cost,
            lower,
            upper,
            row_scale,
            col_norm,
            obj_constant: model.objective.constant,
            opts,
            status: Vec::new(),
            basic: Vec::new(),
            x: vec![0.0; n + m],
            factor: Factor::default(),
            iters: 0,
        };
        solver.slack_basis();
        Ok(solver)
    }

    pub fn num_structurals(&self) -> usize {
        self.n
    }

    pub fn var_bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    pub fn set_var_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        assert!(j < self.n, "structural index out of range");
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    fn slack_basis(&mut self) {
        self.basic = (self.n..self.n + self.m).collect();
        self.status = (0..self.n + self.m)
            .map(|j| if j >= self.n { VarStatus::Basic } else { self.nonbasic_status(j) })
            .collect();
    }

    fn nonbasic_status(&self, j: usize) -> VarStatus {
        if self.lower[j].is_finite() {
            VarStatus::AtLower
        } else if self.upper[j].is_finite() {
            VarStatus::AtUpper
        } else {
            VarStatus::Free
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => self.lower[j],
            VarStatus::AtUpper => self.upper[j],
            VarStatus::Free | VarStatus::Basic => 0.0,
        }
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n {
            self.cols[j].clone()
        } else {
            vec![(j - self.n, -1.0)]
        }
    }

    fn dot_column(&self, j: usize, v: &[f64]) -> f64 {
        if j < self.n {
            self.cols[j].iter().map(|&(i, a)| a * v[i]).sum()
        } else {
            -v[j - self.n]
        }
    }

    fn install_basis(&mut self, warm: Option<&Basis>) {
        match warm {
            Some(b) if b.basic.len() == self.m && b.status.len() == self.n + self.m => {
                self.basic = b.basic.clone();
                self.status = b.status.clone();
                for j in 0..self.n + self.m {
                    let st = self.status[j];
                    let ok = match st {
                        VarStatus::Basic => true,
                        VarStatus::AtLower => self.lower[j].is_finite(),
                        VarStatus::AtUpper => self.upper[j].is_finite(),
                        VarStatus::Free => !self.lower[j].is_finite() && !self.upper[j].is_finite(),
                    };
                    if !ok {
                        self.status[j] = self.nonbasic_status(j);
                    }
                }
            }
            _ => self.slack_basis(),
        }
        for j in 0..self.n + self.m {
            if self.status[j] != VarStatus::Basic {
                self.x[j] = self.nonbasic_value(j);
            }
        }
        self.refactor();
    }

    /// Refactorizes the basis, swapping dependent columns for logicals, and
    /// recomputes basic values.
    fn refactor(&mut self) {
        for _ in 0..3 {
            let cols: Vec<Vec<(usize, f64)>> = self.basic.iter().map(|&j| self.column(j)).collect();
            match Factor::new(self.m, &cols) {
                Ok(f) => {
                    self.factor = f;
                    self.compute_basic_values();
                    return;
                }
                Err(singular) => {
                    if singular.cols.len() != singular.rows.len() {
                        break;
                    }
                    for (&pos, &row) in singular.cols.iter().zip(&singular.rows) {
                        let out = self.basic[pos];
                        let logical = self.n + row;
                        self.basic[pos] = logical;
                        self.status[logical] = VarStatus::Basic;
                        self.status[out] = self.nonbasic_status(out);
                        self.x[out] = self.nonbasic_value(out);
                    }
                }
            }
        }
        self.slack_basis();
        for j in 0..self.n {
            self.x[j] = self.nonbasic_value(j);
        }
        let cols: Vec<Vec<(usize, f64)>> = self.basic.iter().map(|&j| self.column(j)).collect();
        self.factor = Factor::new(self.m, &cols).expect("slack basis is nonsingular");
        self.compute_basic_values();
    }

    fn compute_basic_values(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            if j < self.n {
                for &(i, a) in &self.cols[j] {
                    rhs[i] -= a * xj;
                }
            } else {
                rhs[j - self.n] += xj;
            }
        }
        self.factor.ftran(&mut rhs);
        for (pos, &j) in self.basic.iter().enumerate() {
            self.x[j] = rhs[pos];
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        (self.lower[j] - self.x[j]).max(self.x[j] - self.upper[j]).max(0.0)
    }

    fn max_basic_infeasibility(&self) -> f64 {
        self.basic.iter().map(|&j| self.infeasibility(j)).fold(0.0, f64::max)
    }

    fn duals(&self, phase_one: bool) -> Vec<f64> {
        let mut c: Vec<f64> = self
            .basic
            .iter()
            .map(|&j| {
                if phase_one {
                    if self.x[j] < self.lower[j] - PRIMAL_TOL {
                        -1.0
                    } else if self.x[j] > self.upper[j] + PRIMAL_TOL {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.cost[j]
                }
            })
            .collect();
        self.factor.btran(&mut c);
        c
    }

    fn can_increase(&self, j: usize) -> bool {
        matches!(self.status[j], VarStatus::AtLower | VarStatus::Free) && self.lower[j] < self.upper[j]
    }

    fn can_decrease(&self, j: usize) -> bool {
        matches!(self.status[j], VarStatus::AtUpper | VarStatus::Free) && self.lower[j] < self.upper[j]
    }

    pub fn solve(&mut self, warm: Option<&Basis>) -> LpSolution {
        self.iters = 0;
        self.install_basis(warm);
        let mut status = if warm.is_some() && self.make_dual_feasible() {
            self.dual()
        } else {
            LpStatus::Optimal
        };
        if status == LpStatus::Optimal {
            status = self.primal();
        }
        // Refresh from a new factorization and polish any drift.
        let mut rounds = 0;
        while status == LpStatus::Optimal && rounds < 3 {
            self.refactor();
            if self.max_basic_infeasibility() <= PRIMAL_TOL && self.is_dual_feasible() {
                break;
            }
            status = self.primal();
            rounds += 1;
        }
        self.solution(status)
    }

    fn is_dual_feasible(&self) -> bool {
        let y = self.duals(false);
        (0..self.n + self.m).all(|j| {
            if self.status[j] == VarStatus::Basic || self.lower[j] == self.upper[j] {
                return true;
            }
            let d = self.cost[j] - self.dot_column(j, &y);
            let tol = self.opts.tol_opt * 10.0;
            match self.status[j] {
                VarStatus::AtLower => d >= -tol,
                VarStatus::AtUpper => d <= tol,
                _ => d.abs() <= tol,
            }
        })
    }

    /// Moves boxed nonbasics to the bound their reduced cost prefers.
    /// Returns false if dual infeasibility cannot be repaired that way.
    fn make_dual_feasible(&mut self) -> bool {
        let y = self.duals(false);
        let mut flipped = false;
        for j in 0..self.n + self.m {
            if self.status[j] == VarStatus::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.cost[j] - self.dot_column(j, &y);
            match self.status[j] {
                VarStatus::AtLower if d < -self.opts.tol_opt => {
                    if !self.upper[j].is_finite() {
                        return false;
                    }
                    self.status[j] = VarStatus::AtUpper;
                    self.x[j] = self.upper[j];
                    flipped = true;
                }
                VarStatus::AtUpper if d > self.opts.tol_opt => {
                    if !self.lower[j].is_finite() {
                        return false;
                    }
                    self.status[j] = VarStatus::AtLower;
                    self.x[j] = self.lower[j];
                    flipped = true;
                }
                VarStatus::Free if d.abs() > self.opts.tol_opt => return false,
                _ => {}
            }
        }
        if flipped {
            self.compute_basic_values();
        }
        true
    }

    fn primal(&mut self) -> LpStatus {
        let mut degenerate = 0usize;
        let mut stalls = 0usize;
        loop {
            if self.iters >= self.opts.max_iters {
                return LpStatus::IterationLimit;
            }
            if self.factor.num_etas() >= self.opts.refactor_every {
                self.refactor();
            }
            let phase_one = self.max_basic_infeasibility() > PRIMAL_TOL;
            let y = self.duals(phase_one);
            let bland = degenerate >= self.opts.bland_after;

            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.n + self.m {
                if self.status[j] == VarStatus::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let c = if phase_one { 0.0 } else { self.cost[j] };
                let d = c - self.dot_column(j, &y);
                let dir = if d < -self.opts.tol_opt && self.can_increase(j) {
                    1.0
                } else if d > self.opts.tol_opt && self.can_decrease(j) {
                    -1.0
                } else {
                    continue;
                };
                let score = d.abs() / self.col_norm[j];
                if bland {
                    entering = Some((j, dir, score));
                    break;
                }
                if entering.is_none_or(|(_, _, s)| score > s) {
                    entering = Some((j, dir, score));
                }
            }
            let Some((q, dir, _)) = entering else {
                return if phase_one { LpStatus::Infeasible } else { LpStatus::Optimal };
            };

            let mut alpha = vec![0.0; self.m];
            for (i, a) in self.column(q) {
                alpha[i] = a;
            }
            self.factor.ftran(&mut alpha);

            // Harris two-pass ratio test on the rates of change of basics.
            let limit = |pos: usize, relax: f64| -> Option<(f64, bool)> {
                let rate = -dir * alpha[pos];
                if rate.abs() < PIVOT_TOL {
                    return None;
                }
                let j = self.basic[pos];
                let (xj, lj, uj) = (self.x[j], self.lower[j], self.upper[j]);
                if rate < 0.0 {
                    let bound = if phase_one && xj > uj + PRIMAL_TOL {
                        uj
                    } else if phase_one && xj < lj - PRIMAL_TOL {
                        return None;
                    } else {
                        lj
                    };
                    if !bound.is_finite() {
                        return None;
                    }
                    Some((((xj - bound + relax) / -rate).max(0.0), bound == uj && bound != lj))
                } else {
                    let bound = if phase_one && xj < lj - PRIMAL_TOL {
                        lj
                    } else if phase_one && xj > uj + PRIMAL_TOL {
                        return None;
                    } else {
                        uj
                    };
                    if !bound.is_finite() {
                        return None;
                    }
                    Some((((bound - xj + relax) / rate).max(0.0), bound == uj))
                }
            };
            let mut theta_max = f64::INFINITY;
            for pos in 0..self.m {
                if let Some((r, _)) = limit(pos, PRIMAL_TOL) {
                    theta_max = theta_max.min(r);
                }
            }
            let mut leaving: Option<(usize, f64, bool)> = None;
            if theta_max.is_finite() {
                let mut best_abs = 0.0;
                for pos in 0..self.m {
                    if let Some((r, to_upper)) = limit(pos, 0.0) {
                        if r <= theta_max {
                            let a = alpha[pos].abs();
                            let better = if bland {
                                leaving.is_none_or(|(lp, _, _)| self.basic[pos] < self.basic[lp])
                            } else {
                                a > best_abs
                            };
                            if better {
                                best_abs = a;
                                leaving = Some((pos, r, to_upper));
                            }
                        }
                    }
                }
            }

            let span = self.upper[q] - self.lower[q];
            let step = leaving.map_or(f64::INFINITY, |(_, r, _)| r);
            if span.is_finite() && span <= step {
                // Entering variable reaches its opposite bound first.
                let delta = dir * span;
                self.x[q] += delta;
                self.status[q] = if dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                self.x[q] = self.nonbasic_value(q);
                for pos in 0..self.m {
                    let j = self.basic[pos];
                    self.x[j] -= delta * alpha[pos];
                }
                self.iters += 1;
                degenerate = 0;
                continue;
            }
            let Some((r, theta, to_upper)) = leaving else {
                if phase_one {
                    // No breakpoint although infeasibility should fall: numerical trouble.
                    stalls += 1;
                    if stalls > 5 {
                        return LpStatus::Infeasible;
                    }
                    self.refactor();
                    continue;
                }
                return LpStatus::Unbounded;
            };

            let delta = dir * theta;
            self.x[q] += delta;
            for pos in 0..self.m {
                let j = self.basic[pos];
                self.x[j] -= delta * alpha[pos];
            }
            let out = self.basic[r];
            self.status[out] = if to_upper { VarStatus::AtUpper } else { VarStatus::AtLower };
            self.x[out] = self.nonbasic_value(out);
            self.basic[r] = q;
            self.status[q] = VarStatus::Basic;
            self.factor.update(r, &alpha);
            self.iters += 1;
            if theta < DEGENERATE_STEP {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
        }
    }

    fn dual(&mut self) -> LpStatus {
        loop {
            if self.iters >= self.opts.max_iters {
                return LpStatus::IterationLimit;
            }
            if self.factor.num_etas() >= self.opts.refactor_every {
                self.refactor();
            }
            let mut leave: Option<(usize, f64)> = None;
            for (pos, &j) in self.basic.iter().enumerate() {
                let v = self.infeasibility(j);
                if v > PRIMAL_TOL && leave.is_none_or(|(_, bv)| v > bv) {
                    leave = Some((pos, v));
                }
            }
            let Some((r, _)) = leave else {
                return LpStatus::Optimal;
            };
            let jr = self.basic[r];
            let below = self.x[jr] < self.lower[jr];
            let target = if below { self.lower[jr] } else { self.upper[jr] };

            let mut rho = vec![0.0; self.m];
            rho[r] = 1.0;
            self.factor.btran(&mut rho);
            let y = self.duals(false);

            let mut candidates: Vec<(usize, f64, f64)> = Vec::new();
            for j in 0..self.n + self.m {
                if self.status[j] == VarStatus::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let a = self.dot_column(j, &rho);
                if a.abs() < PIVOT_TOL {
                    continue;
                }
                let d = self.cost[j] - self.dot_column(j, &y);
                // x_r moves by -a per unit increase of x_j.
                let wants_increase = if below { a < 0.0 } else { a > 0.0 };
                let slack = match self.status[j] {
                    VarStatus::AtLower if wants_increase => d.max(0.0),
                    VarStatus::AtUpper if !wants_increase => (-d).max(0.0),
                    VarStatus::Free => d.abs(),
                    _ => continue,
                };
                candidates.push((j, a, slack));
            }
            if candidates.is_empty() {
                return LpStatus::Infeasible;
            }
            let theta_max = candidates
                .iter()
                .map(|&(_, a, s)| (s + self.opts.tol_opt) / a.abs())
                .fold(f64::INFINITY, f64::min);
            let mut best: Option<(usize, f64)> = None;
            for &(j, a, s) in &candidates {
                if s / a.abs() <= theta_max && best.is_none_or(|(_, ba)| a.abs() > ba) {
                    best = Some((j, a.abs()));
                }
            }
            let (q, _) = best.expect("theta_max selects at least one candidate");

            let mut alpha = vec![0.0; self.m];
            for (i, a) in self.column(q) {
                alpha[i] = a;
            }
            self.factor.ftran(&mut alpha);
            if alpha[r].abs() < PIVOT_TOL {
                self.refactor();
                continue;
            }
            let delta = (self.x[jr] - target) / alpha[r];
            self.x[q] += delta;
            for pos in 0..self.m {
                let j = self.basic[pos];
                self.x[j] -= delta * alpha[pos];
            }
            self.status[jr] = if below { VarStatus::AtLower } else { VarStatus::AtUpper };
            self.x[jr] = target;
            self.basic[r] = q;
            self.status[q] = VarStatus::Basic;
            self.factor.update(r, &alpha);
            self.iters += 1;
        }
    }

    fn solution(&self, status: LpStatus) -> LpSolution {
        let values: Vec<f64> = self.x[..self.n].to_vec();
        let objective = self.obj_constant
            + values
                .iter()
                .zip(&self.cost)
                .map(|(x, c)| x * c)
                .sum::<f64>();
        let y = self.duals(false);
        let dual_values = y.iter().zip(&self.row_scale).map(|(v, s)| v * s).collect();
        let reduced_costs = (0..self.n)
            .map(|j| self.cost[j] - self.dot_column(j, &y))
            .collect();
        let mut residual = (0..self.n + self.m)
            .map(|j| self.infeasibility(j))
            .fold(0.0, f64::max);
        // Logical values must also match the rows they stand for.
        let mut activity = vec![0.0; self.m];
        for j in 0..self.n {
            for &(i, a) in &self.cols[j] {
                activity[i] += a * self.x[j];
            }
        }
        for i in 0..self.m {
            let s = self.x[self.n + i];
            let v = (self.lower[self.n + i] - activity[i])
                .max(activity[i] - self.upper[self.n + i])
                .max(0.0);
            residual = residual.max(v).max(if s.is_finite() { 0.0 } else { f64::INFINITY });
        }
        let status = if status == LpStatus::Optimal && residual > self.opts.tol_feas {
            log::debug!("LP optimum rejected: residual {residual:e}");
            LpStatus::IterationLimit
        } else {
            status
        };
        LpSolution {
            status,
            values,
            objective,
            dual_values,
            reduced_costs,
            basis: Basis {
                basic: self.basic.clone(),
                status: self.status.clone(),
            },
            iterations: self.iters,
            primal_residual: residual,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinExpr, RowKind, VarId};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn minimize_with_lower_row() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 10.0);
        m.objective = LinExpr::new().term(x, 1.0);
        m.add_constraint("r", RowKind::Other, vec![(x, 1.0)], Sense::Ge, 3.0);
        let s = solve_lp(&m, None).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.values[0] - 3.0).abs() < 1e-9 && (s.objective - 3.0).abs() < 1e-9);
        assert!((s.dual_values[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn maximize_with_upper_row() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, f64::INFINITY);
        m.objective = LinExpr::new().term(x, -1.0);
        m.add_constraint("r", RowKind::Other, vec![(x, 1.0)], Sense::Le, 5.0);
        let s = solve_lp(&m, None).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.values[0] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 1.0);
        let y = m.add_continuous("y", 0.0, 1.0);
        m.add_constraint("r", RowKind::Other, vec![(x, 1.0), (y, 1.0)], Sense::Ge, 3.0);
        assert_eq!(solve_lp(&m, None).unwrap().status, LpStatus::Infeasible);

        let mut m = MilpModel::new();
        let x = m.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY);
        let y = m.add_continuous("y", 0.0, f64::INFINITY);
        m.objective = LinExpr::new().term(x, 1.0);
        m.add_constraint("r", RowKind::Other, vec![(x, 1.0), (y, -1.0)], Sense::Le, 0.0);
        assert_eq!(solve_lp(&m, None).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn rejects_binaries() {
        let mut m = MilpModel::new();
        m.add_binary("u");
        assert!(matches!(solve_lp(&m, None), Err(Error::BinaryInLp(_))));
    }

    #[test]
    fn free_variable_and_equalities() {
        // min z s.t. z >= 2x - 1, z >= -x, x + w = 1, w in [0, 0.5]
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY);
        let z = m.add_continuous("z", f64::NEG_INFINITY, f64::INFINITY);
        let w = m.add_continuous("w", 0.0, 0.5);
        m.objective = LinExpr::new().term(z, 1.0);
        m.add_constraint("a", RowKind::Other, vec![(z, 1.0), (x, -2.0)], Sense::Ge, -1.0);
        m.add_constraint("b", RowKind::Other, vec![(z, 1.0), (x, 1.0)], Sense::Ge, 0.0);
        m.add_constraint("c", RowKind::Other, vec![(x, 1.0), (w, 1.0)], Sense::Eq, 1.0);
        let s = solve_lp(&m, None).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        // x in [0.5, 1]; z = max(2x-1, -x) minimized at x = 0.5 -> z = 0 vs -0.5: z=max(0,-0.5)=0
        assert!((s.objective - 0.0).abs() < 1e-9, "{}", s.objective);
        assert!((s.values[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn warm_start_from_optimal_basis_takes_no_pivots() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 4.0);
        let y = m.add_continuous("y", 0.0, 4.0);
        m.objective = LinExpr::new().term(x, 1.0).term(y, 2.0);
        m.add_constraint("r", RowKind::Other, vec![(x, 1.0), (y, 1.0)], Sense::Ge, 5.0);
        let mut solver = LpSolver::new(&m, LpOptions::default()).unwrap();
        let first = solver.solve(None);
        assert_eq!(first.status, LpStatus::Optimal);
        let again = solver.solve(Some(&first.basis));
        assert_eq!(again.iterations, 0);
        assert!((again.objective - first.objective).abs() < 1e-12);
    }

    #[test]
    fn dual_simplex_after_bound_change() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 4.0);
        let y = m.add_continuous("y", 0.0, 4.0);
        m.objective = LinExpr::new().term(x, 1.0).term(y, 2.0);
        m.add_constraint("r", RowKind::Other, vec![(x, 1.0), (y, 1.0)], Sense::Ge, 5.0);
        let mut solver = LpSolver::new(&m, LpOptions::default()).unwrap();
        let first = solver.solve(None);
        assert!((first.objective - 6.0).abs() < 1e-9);
        solver.set_var_bounds(0, 0.0, 2.0);
        let second = solver.solve(Some(&first.basis));
        assert_eq!(second.status, LpStatus::Optimal);
        assert!((second.objective - 8.0).abs() < 1e-9);
        assert!((second.values[1] - 3.0).abs() < 1e-9);
        solver.set_var_bounds(0, 0.0, 0.5);
        let third = solver.solve(Some(&second.basis));
        assert_eq!(third.status, LpStatus::Infeasible);
    }


    /// Dense Gaussian elimination; None if singular.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
            if a[p][c].abs() < 1e-10 {
                return None;
            }
            a.swap(c, p);
            b.swap(c, p);
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for c in (0..n).rev() {
            let s: f64 = (c + 1..n).map(|k| a[c][k] * x[k]).sum();
            x[c] = (b[c] - s) / a[c][c];
        }
        Some(x)
    }

    fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
        fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
            if cur.len() == k {
                f(cur);
                return;
            }
            for i in start..n {
                if n - i < k - cur.len() {
                    break;
                }
                cur.push(i);
                rec(i + 1, n, k, cur, f);
                cur.pop();
            }
        }
        rec(0, n, k, &mut Vec::new(), f);
    }

    /// Minimum over all basic feasible solutions of a bounded LP.
    fn vertex_oracle(m: &MilpModel) -> Option<f64> {
        let n = m.num_vars();
        let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            planes.push((e.clone(), m.variables[j].lower));
            planes.push((e, m.variables[j].upper));
        }
        for c in &m.constraints {
            let mut a = vec![0.0; n];
            for &(v, coef) in &c.terms {
                a[v.0] += coef;
            }
            planes.push((a, c.rhs));
        }
        let mut best: Option<f64> = None;
        combinations(planes.len(), n, &mut |pick| {
            let a = pick.iter().map(|&k| planes[k].0.clone()).collect();
            let b = pick.iter().map(|&k| planes[k].1).collect();
            if let Some(x) = dense_solve(a, b) {
                if m.max_violation(&x) <= 1e-7 {
                    let obj = m.objective_value(&x);
                    best = Some(best.map_or(obj, |b: f64| b.min(obj)));
                }
            }
        });
        best
    }

    fn random_lp(rng: &mut ChaCha8Rng) -> MilpModel {
        let n = rng.gen_range(2..=8);
        let rows = rng.gen_range(1..=5);
        let mut m = MilpModel::new();
        let witness: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let vars: Vec<VarId> = (0..n)
            .map(|j| m.add_continuous(format!("x{j}"), rng.gen_range(-5.0..-2.0), rng.gen_range(2.0..5.0)))
            .collect();
        let mut obj = LinExpr::new();
        for &v in &vars {
            obj.add(v, rng.gen_range(-3.0..3.0));
        }
        m.objective = obj;
        for r in 0..rows {
            let mut terms: Vec<(VarId, f64)> = Vec::new();
            for &v in &vars {
                if rng.gen_bool(0.7) {
                    terms.push((v, rng.gen_range(-4.0..4.0)));
                }
            }
            let act: f64 = terms.iter().map(|&(v, a)| a * witness[v.0]).sum();
            let (sense, rhs) = match rng.gen_range(0..3) {
                0 => (Sense::Le, act + rng.gen_range(0.0..2.0)),
                1 => (Sense::Ge, act - rng.gen_range(0.0..2.0)),
                _ => (Sense::Eq, act),
            };
            m.add_constraint(format!("r{r}"), RowKind::Other, terms, sense, rhs);
        }
        m
    }


    #[test]
    fn random_lps_match_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..20 {
            let m = random_lp(&mut rng);
            let s = solve_lp(&m, None).unwrap();
            assert_eq!(s.status, LpStatus::Optimal, "case {case}");
            let oracle = vertex_oracle(&m).expect("feasible by construction");
            assert!((s.objective - oracle).abs() <= 1e-6 * (1.0 + oracle.abs()), "case {case}: {} vs {oracle}", s.objective);
            assert!(m.max_violation(&s.values) <= 1e-7);
        }
    }

    #[test]
    fn optimum_satisfies_strong_duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..50 {
            let m = random_lp(&mut rng);
            let s = solve_lp(&m, None).unwrap();
            assert_eq!(s.status, LpStatus::Optimal);
            let n = m.num_vars();
            // Stationarity: c_j = Σ_i y_i a_ij + d_j.
            let mut grad = vec![0.0; n];
            for &(v, c) in &m.objective.terms {
                grad[v.0] += c;
            }
            for (row, &y) in m.constraints.iter().zip(&s.dual_values) {
                match row.sense {
                    Sense::Ge => assert!(y >= -1e-9, "case {case}"),
                    Sense::Le => assert!(y <= 1e-9, "case {case}"),
                    Sense::Eq => {}
                }
                for &(v, a) in &row.terms {
                    grad[v.0] -= y * a;
                }
            }
            let mut dual_obj = m.objective.constant;
            for (row, &y) in m.constraints.iter().zip(&s.dual_values) {
                dual_obj += y * row.rhs;
            }
            for j in 0..n {
                let d = s.reduced_costs[j];
                assert!((grad[j] - d).abs() < 1e-8, "case {case} var {j}");
                let v = &m.variables[j];
                if d > 1e-9 {
                    dual_obj += d * v.lower;
                } else if d < -1e-9 {
                    dual_obj += d * v.upper;
                }
            }
            let rel = (dual_obj - s.objective).abs() / s.objective.abs().max(1.0);
            assert!(rel < 1e-6, "case {case}: primal {} dual {dual_obj}", s.objective);
        }
    }

    #[test]
    fn warm_restarts_match_cold_solves_after_bound_changes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let m = random_lp(&mut rng);
            let mut solver = LpSolver::new(&m, LpOptions::default()).unwrap();
            let first = solver.solve(None);
            let j = rng.gen_range(0..m.num_vars());
            let x = first.values[j];
            let (lo, hi) = solver.var_bounds(j);
            let (nlo, nhi) = if rng.gen_bool(0.5) { (lo, (x - 0.5).max(lo)) } else { ((x + 0.5).min(hi), hi) };
            solver.set_var_bounds(j, nlo, nhi);
            let warm = solver.solve(Some(&first.basis));
            let mut changed = m.clone();
            changed.variables[j].lower = nlo;
            changed.variables[j].upper = nhi;
            let cold = solve_lp(&changed, None).unwrap();
            assert_eq!(warm.status, cold.status);
            if cold.status == LpStatus::Optimal {
                assert!((warm.objective - cold.objective).abs() < 1e-7 * (1.0 + cold.objective.abs()));
            }
        }
    }
}
