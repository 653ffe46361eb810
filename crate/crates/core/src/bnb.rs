//! Best-bound branch-and-bound over the binary variables of a [`MilpModel`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::rc::Rc;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{lp_relaxation, MilpModel, VarId, VarMap};
use crate::simplex::{Basis, LpOptions, LpSolution, LpSolver, LpStatus};

/// Binary values closer than this to 0 or 1 count as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct MilpConfig {
    /// Relative optimality gap at which the search stops.
    pub gap: f64,
    pub time_limit_s: f64,
    pub node_limit: Option<usize>,
    /// Keep a per-node log in the solution.
    pub record_log: bool,
    /// Run the rounding heuristic every this many nodes (and at the root).
    pub heuristic_every: usize,
    pub lp: LpOptions,
}

impl Default for MilpConfig {
    fn default() -> Self {
        Self {
            gap: 1e-4,
            time_limit_s: 300.0,
            node_limit: None,
            record_log: false,
            heuristic_every: 20,
            lp: LpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MilpStatus {
    OptimalWithinGap,
    FeasibleTimeLimit,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeLogEntry {
    pub node: usize,
    pub depth: usize,
    /// Global lower bound when the node was processed.
    pub bound: f64,
    pub incumbent: Option<f64>,
}

impl fmt::Display for NodeLogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node={} depth={} bound={:.6}", self.node, self.depth, self.bound)?;
        match self.incumbent {
            Some(v) => write!(f, " incumbent={v:.6}"),
            None => write!(f, " incumbent=none"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Incumbent values; empty when no incumbent was found.
    pub values: Vec<f64>,
    /// Incumbent objective, `+inf` without an incumbent.
    pub objective: f64,
    pub best_bound: f64,
    pub rel_gap: f64,
    pub nodes_explored: usize,
    pub wall_time: f64,
    /// A time or node limit stopped the search.
    pub limit_hit: bool,
    pub log: Vec<NodeLogEntry>,
}

pub fn relative_gap(objective: f64, bound: f64) -> f64 {
    if !objective.is_finite() {
        return f64::INFINITY;
    }
    (objective - bound).abs() / objective.abs().max(1e-10)
}

/// For each selection group, fixes the binary with the largest value to 1 and
/// the rest to 0. Ties go to the lowest segment index.
pub fn rounding_fixings(values: &[f64], varmap: &VarMap) -> Vec<(VarId, f64)> {
    let groups: Vec<Vec<VarId>> = varmap.selection_groups().into_iter().map(<[VarId]>::to_vec).collect();
    group_fixings(values, &groups)
}

fn group_fixings(values: &[f64], groups: &[Vec<VarId>]) -> Vec<(VarId, f64)> {
    let mut out = Vec::new();
    for g in groups {
        if let [only] = g.as_slice() {
            out.push((*only, if values[only.0] >= 0.5 { 1.0 } else { 0.0 }));
            continue;
        }
        let mut best = 0;
        for (k, v) in g.iter().enumerate() {
            if values[v.0] > values[g[best].0] {
                best = k;
            }
        }
        out.extend(g.iter().enumerate().map(|(k, &v)| (v, if k == best { 1.0 } else { 0.0 })));
    }
    out
}

/// Fixes binaries by [`rounding_fixings`] and solves the remaining LP.
/// Returns `(objective, values)` when that LP is feasible.
pub fn rounding_heuristic(model: &MilpModel, node_values: &[f64], varmap: &VarMap) -> Result<Option<(f64, Vec<f64>)>> {
    let mut fixed = lp_relaxation(model);
    for (v, x) in rounding_fixings(node_values, varmap) {
        fixed.variables[v.0].lower = x;
        fixed.variables[v.0].upper = x;
    }
    let lp = crate::simplex::solve_lp(&fixed, None)?;
    Ok((lp.status == LpStatus::Optimal).then_some((lp.objective, lp.values)))
}

#[derive(Debug)]
struct Node {
    id: usize,
    depth: usize,
    /// LP bound of the parent.
    bound: f64,
    fixings: Vec<(usize, f64)>,
    basis: Option<Rc<Basis>>,
}

struct Queued(Node);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // Reversed so the max-heap pops the smallest (bound, id).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .bound
            .total_cmp(&self.0.bound)
            .then_with(|| other.0.id.cmp(&self.0.id))
    }
}

struct Search<'a> {
    solver: LpSolver,
    binaries: Vec<usize>,
    root_bounds: Vec<(f64, f64)>,
    groups: Vec<Vec<VarId>>,
    config: &'a MilpConfig,
    incumbent: Option<(f64, Vec<f64>)>,
}

impl Search<'_> {
    fn apply(&mut self, fixings: &[(usize, f64)]) {
        for &j in &self.binaries {
            let (lo, hi) = self.root_bounds[j];
            self.solver.set_var_bounds(j, lo, hi);
        }
        for &(j, v) in fixings {
            self.solver.set_var_bounds(j, v, v);
        }
    }

    fn solve(&mut self, basis: Option<&Basis>) -> Result<LpSolution> {
        let lp = self.solver.solve(basis);
        match lp.status {
            LpStatus::IterationLimit if basis.is_some() => {
                log::debug!("warm-started node LP stalled; retrying cold");
                let cold = self.solver.solve(None);
                match cold.status {
                    LpStatus::IterationLimit => Err(Error::IterationLimit(cold.iterations)),
                    LpStatus::Unbounded => Err(Error::Unbounded),
                    _ => Ok(cold),
                }
            }
            LpStatus::IterationLimit => Err(Error::IterationLimit(lp.iterations)),
            LpStatus::Unbounded => Err(Error::Unbounded),
            _ => Ok(lp),
        }
    }

    fn threshold(&self) -> f64 {
        match &self.incumbent {
            Some((v, _)) => v - self.config.gap * v.abs(),
            None => f64::INFINITY,
        }
    }

    /// Offers an integral point; returns true if it became the incumbent.
    fn offer(&mut self, objective: f64, values: Vec<f64>) -> bool {
        if self.incumbent.as_ref().is_none_or(|(v, _)| objective < *v) {
            self.incumbent = Some((objective, values));
            true
        } else {
            false
        }
    }

    /// Re-solves with every binary fixed to its rounded value.
    fn polish(&mut self, values: &[f64], fixings: &[(usize, f64)], basis: &Basis) -> Result<Option<(f64, Vec<f64>)>> {
        let all: Vec<(usize, f64)> = self.binaries.iter().map(|&j| (j, values[j].round())).collect();
        self.apply(&all);
        let lp = self.solve(Some(basis))?;
        self.apply(fixings);
        Ok((lp.status == LpStatus::Optimal).then_some((lp.objective, lp.values)))
    }

    fn heuristic(&mut self, values: &[f64], fixings: &[(usize, f64)], basis: &Basis) -> Result<bool> {
        let fix: Vec<(usize, f64)> = group_fixings(values, &self.groups).into_iter().map(|(v, x)| (v.0, x)).collect();
        self.apply(&fix);
        let lp = self.solve(Some(basis))?;
        self.apply(fixings);
        if lp.status == LpStatus::Optimal {
            return Ok(self.offer(lp.objective, lp.values));
        }
        Ok(false)
    }
}

/// Solves `model` by LP-based branch-and-bound. `varmap` supplies the
/// segment-selection groups for the rounding heuristic; without it every
/// binary is rounded on its own.
pub fn solve_milp(model: &MilpModel, varmap: Option<&VarMap>, config: &MilpConfig) -> Result<MilpSolution> {
    let start = Instant::now();
    model.validate()?;
    let relaxed = lp_relaxation(model);
    let solver = LpSolver::new(&relaxed, config.lp.clone())?;
    let binaries: Vec<usize> = model.binaries().into_iter().map(|v| v.0).collect();
    let groups = match varmap {
        Some(vm) => vm.selection_groups().into_iter().map(<[VarId]>::to_vec).collect(),
        None => binaries.iter().map(|&j| vec![VarId(j)]).collect(),
    };
    let mut s = Search {
        root_bounds: (0..model.num_vars()).map(|j| solver.var_bounds(j)).collect(),
        solver,
        binaries,
        groups,
        config,
        incumbent: None,
    };

    let mut heap: BinaryHeap<Queued> = BinaryHeap::new();
    let mut stack: Vec<Node> = Vec::new();
    let mut next_id = 1usize;
    let mut nodes = 0usize;
    let mut pruned_floor = f64::INFINITY;
    let mut best_bound = f64::NEG_INFINITY;
    let mut log = Vec::new();
    let mut limit_hit = false;
    // Dive from the root until a first incumbent exists.
    let mut plunging = true;

    stack.push(Node {
        id: 0,
        depth: 0,
        bound: f64::NEG_INFINITY,
        fixings: Vec::new(),
        basis: None,
    });

    loop {
        let inc = s.incumbent.as_ref().map_or(f64::INFINITY, |(v, _)| *v);
        let global = global_floor(&heap, &stack, pruned_floor, inc);
        if global < f64::INFINITY {
            best_bound = best_bound.max(global);
        }

        let node = if let Some(n) = stack.pop() {
            n
        } else if let Some(q) = heap.pop() {
            plunging = false;
            q.0
        } else {
            break;
        };
        if node.bound >= s.threshold() {
            pruned_floor = pruned_floor.min(node.bound);
            continue;
        }
        if start.elapsed().as_secs_f64() >= config.time_limit_s || config.node_limit.is_some_and(|lim| nodes >= lim) {
            limit_hit = true;
            heap.push(Queued(node));
            break;
        }

        nodes += 1;
        s.apply(&node.fixings);
        let lp = s.solve(node.basis.as_deref())?;
        if config.record_log {
            log.push(NodeLogEntry {
                node: node.id,
                depth: node.depth,
                bound: best_bound,
                incumbent: s.incumbent.as_ref().map(|(v, _)| *v),
            });
        }
        if lp.status == LpStatus::Infeasible {
            continue;
        }
        let bound = lp.objective.max(node.bound);
        if bound >= s.threshold() {
            pruned_floor = pruned_floor.min(bound);
            continue;
        }

        let mut branch: Option<(usize, f64)> = None;
        for &j in &s.binaries {
            let frac = lp.values[j].min(1.0 - lp.values[j]);
            if frac > INTEGRALITY_TOL && branch.is_none_or(|(_, bf)| frac > bf) {
                branch = Some((j, frac));
            }
        }

        let Some((j, _)) = branch else {
            if let Some((obj, values)) = s.polish(&lp.values, &node.fixings, &lp.basis)? {
                if s.offer(obj, values) {
                    plunging = true;
                }
            }
            continue;
        };

        if (nodes == 1 || nodes.is_multiple_of(config.heuristic_every.max(1))) && s.heuristic(&lp.values, &node.fixings, &lp.basis)? {
            plunging = true;
        }

        let basis = Rc::new(lp.basis);
        let up_first = lp.values[j] >= 0.5;
        let child = |value: f64, id: usize| {
            let mut fixings = node.fixings.clone();
            fixings.push((j, value));
            Node {
                id,
                depth: node.depth + 1,
                bound,
                fixings,
                basis: Some(Rc::clone(&basis)),
            }
        };
        let (pref, other) = if up_first { (1.0, 0.0) } else { (0.0, 1.0) };
        let preferred = child(pref, next_id);
        let second = child(other, next_id + 1);
        next_id += 2;
        heap.push(Queued(second));
        if plunging {
            stack.push(preferred);
        } else {
            heap.push(Queued(preferred));
        }
    }

    let (status, objective, values) = match s.incumbent.take() {
        Some((obj, values)) if !limit_hit => (MilpStatus::OptimalWithinGap, obj, values),
        Some((obj, values)) => (MilpStatus::FeasibleTimeLimit, obj, values),
        None => (MilpStatus::Infeasible, f64::INFINITY, Vec::new()),
    };
    if !limit_hit {
        // Tree exhausted: everything left was pruned against the incumbent.
        best_bound = best_bound.max(pruned_floor.min(objective));
    }
    let best_bound = best_bound.min(objective);
    Ok(MilpSolution {
        status,
        values,
        objective,
        best_bound,
        rel_gap: relative_gap(objective, best_bound),
        nodes_explored: nodes,
        wall_time: start.elapsed().as_secs_f64(),
        limit_hit,
        log,
    })
}

/// Smallest bound over open nodes, nodes pruned by bound and the incumbent.
fn global_floor(heap: &BinaryHeap<Queued>, stack: &[Node], pruned_floor: f64, inc: f64) -> f64 {
    heap.peek()
        .map(|q| q.0.bound)
        .into_iter()
        .chain(stack.iter().map(|n| n.bound))
        .fold(pruned_floor.min(inc), f64::min)
}
