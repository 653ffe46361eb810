//! Lossless dispatch by a single MILP solve, and the iterative loop that
//! re-linearizes network losses around averaged previous solutions.

use std::time::Instant;

use serde::Serialize;

use crate::bnb::{solve_milp, MilpConfig, MilpSolution, MilpStatus, NodeLogEntry};
use crate::error::{Error, Result};
use crate::instance::{evaluate_cost, evaluate_violations, FeasibilityReport, Schedule, SystemInstance};
use crate::model::{build_milp1, build_milp2, perspective_gap_bound, MilpModel, VarMap, DEFAULT_TANGENTS};

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub tangents: usize,
    pub gap: f64,
    pub time_limit_s: f64,
    pub node_limit: Option<usize>,
    pub record_log: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tangents: DEFAULT_TANGENTS,
            gap: 1e-4,
            time_limit_s: 300.0,
            node_limit: None,
            record_log: false,
        }
    }
}

impl SolveConfig {
    fn milp(&self) -> MilpConfig {
        MilpConfig {
            gap: self.gap,
            time_limit_s: self.time_limit_s,
            node_limit: self.node_limit,
            record_log: self.record_log,
            ..MilpConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.tangents == 0 {
            return Err(Error::validation("tangents", "must be at least 1"));
        }
        if !(self.gap >= 0.0 && self.gap.is_finite()) {
            return Err(Error::validation("gap", "must be non-negative"));
        }
        if !(self.time_limit_s > 0.0) {
            return Err(Error::validation("time_limit_s", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IaConfig {
    /// Balance violation threshold, MW.
    pub epsilon: f64,
    pub iter_max: usize,
    pub solve: SolveConfig,
}

impl Default for IaConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            iter_max: 5,
            solve: SolveConfig::default(),
        }
    }
}

impl IaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::validation("epsilon", "must be positive"));
        }
        if self.iter_max == 0 {
            return Err(Error::validation("iter_max", "must be at least 1"));
        }
        self.solve.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Epsilon,
    IterMax,
}

/// One MILP solve of the loop.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub anchor: String,
    pub objective: f64,
    pub max_violation: f64,
    pub total_violation: f64,
    pub solve_time_s: f64,
    pub nodes: usize,
    pub status: MilpStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub total_s: f64,
    pub milp_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DispatchReport {
    pub mode: String,
    pub schedule: Schedule,
    /// Exact quadratic cost of `schedule`.
    pub cost: f64,
    /// Objective of the MILP that produced `schedule`.
    pub surrogate_objective: f64,
    /// Upper bound on `cost - surrogate_objective` from the tangent spacing.
    pub perspective_gap_bound: f64,
    pub losses: Vec<f64>,
    /// `E_t`, MW.
    pub violations: Vec<f64>,
    pub max_violation: f64,
    pub total_violation: f64,
    pub feasibility: FeasibilityReport,
    pub milp_status: MilpStatus,
    pub best_bound: f64,
    pub rel_gap: f64,
    pub nodes: usize,
    /// Some MILP solve stopped at a time or node limit.
    pub limit_hit: bool,
    /// Solves that produce the first two iterates (k = 1, 2).
    pub warmup: Vec<IterationRecord>,
    /// Anchored re-solves, one per pass (k = 3, 4, ...).
    pub iterations: Vec<IterationRecord>,
    /// Iterate the schedule was taken from.
    pub selected_k: usize,
    pub terminated_by: Option<Termination>,
    pub timings: Timings,
    #[serde(skip)]
    pub node_log: Vec<NodeLogEntry>,
}

struct Solved {
    milp: MilpSolution,
    schedule: Schedule,
    audit: FeasibilityReport,
}

fn run(instance: &SystemInstance, model: &MilpModel, varmap: &VarMap, config: &SolveConfig) -> Result<Option<Solved>> {
    let milp = solve_milp(model, Some(varmap), &config.milp())?;
    match milp.status {
        MilpStatus::Infeasible if milp.limit_hit => {
            return Err(Error::NoIncumbent {
                nodes: milp.nodes_explored,
            })
        }
        MilpStatus::Infeasible => return Ok(None),
        _ => {}
    }
    let schedule = varmap.schedule(&milp.values);
    let audit = evaluate_violations(instance, &schedule)?;
    if !audit.linear_constraints_ok() {
        log::warn!("MILP schedule fails the feasibility audit at tolerance {}", audit.tolerance);
    }
    Ok(Some(Solved { milp, schedule, audit }))
}

fn record(k: usize, anchor: &str, s: &Solved) -> IterationRecord {
    IterationRecord {
        k,
        anchor: anchor.to_string(),
        objective: s.milp.objective,
        max_violation: s.audit.max_violation,
        total_violation: s.audit.balance_violation.iter().sum(),
        solve_time_s: s.milp.wall_time,
        nodes: s.milp.nodes_explored,
        status: s.milp.status,
    }
}

fn lossless(instance: &SystemInstance) -> SystemInstance {
    SystemInstance {
        loss_model: None,
        ..instance.clone()
    }
}

/// Names the first period whose data rules out any schedule, if one can be
/// found from capacity, reserve and ramp arithmetic alone.
pub fn diagnose_infeasibility(instance: &SystemInstance) -> String {
    let n = instance.num_units();
    let mut lo: Vec<f64> = Vec::with_capacity(n);
    let mut hi: Vec<f64> = Vec::with_capacity(n);
    for (t, (&d, &r)) in instance.demand.iter().zip(&instance.reserve).enumerate() {
        let tt = t + 1;
        let cap: f64 = instance.units.iter().map(|u| u.p_max).sum();
        let floor: f64 = instance.units.iter().map(|u| u.p_min).sum();
        if d > cap {
            return format!("period {tt}: demand {d} MW exceeds total capacity {cap} MW");
        }
        if d < floor {
            return format!("period {tt}: demand {d} MW is below total minimum output {floor} MW");
        }
        let reserve_cap: f64 = instance.units.iter().map(|u| u.ramp_up.min(u.p_max - u.p_min)).sum::<f64>();
        if d + r > cap || r > reserve_cap {
            return format!("period {tt}: demand {d} MW plus reserve {r} MW cannot be covered by available headroom");
        }
        // Reachable output windows under ramp limits, ignoring zones.
        for (i, u) in instance.units.iter().enumerate() {
            let (l, h) = if t == 0 {
                match u.p_initial {
                    Some(p0) => ((p0 - u.ramp_down).max(u.p_min), (p0 + u.ramp_up).min(u.p_max)),
                    None => (u.p_min, u.p_max),
                }
            } else {
                ((lo[i] - u.ramp_down).max(u.p_min), (hi[i] + u.ramp_up).min(u.p_max))
            };
            if t == 0 {
                lo.push(l);
                hi.push(h);
            } else {
                lo[i] = l;
                hi[i] = h;
            }
        }
        let (reach_lo, reach_hi): (f64, f64) = (lo.iter().sum(), hi.iter().sum());
        if d > reach_hi || d < reach_lo {
            return format!(
                "period {tt}: demand {d} MW outside the ramp-reachable range [{reach_lo}, {reach_hi}] MW"
            );
        }
    }
    "no segment assignment satisfies the prohibited zones together with ramp, balance and reserve rows".into()
}

fn report(
    mode: &str,
    instance: &SystemInstance,
    solved: Solved,
    tangents: usize,
    warmup: Vec<IterationRecord>,
    iterations: Vec<IterationRecord>,
    selected_k: usize,
    terminated_by: Option<Termination>,
    limit_hit: bool,
    timings: Timings,
) -> Result<DispatchReport> {
    let Solved { milp, schedule, audit } = solved;
    let cost = evaluate_cost(instance, &schedule)?;
    let gap_bound = perspective_gap_bound(instance, &schedule, tangents)?;
    Ok(DispatchReport {
        mode: mode.to_string(),
        cost,
        surrogate_objective: milp.objective,
        perspective_gap_bound: gap_bound,
        losses: audit.losses.clone(),
        violations: audit.balance_violation.clone(),
        max_violation: audit.max_violation,
        total_violation: audit.balance_violation.iter().sum(),
        milp_status: milp.status,
        best_bound: milp.best_bound,
        rel_gap: milp.rel_gap,
        nodes: milp.nodes_explored,
        limit_hit: limit_hit || milp.limit_hit,
        feasibility: audit,
        schedule,
        warmup,
        iterations,
        selected_k,
        terminated_by,
        timings,
        node_log: milp.log,
    })
}

/// Solves the lossless problem. A loss model on `instance` is ignored and
/// violations are audited with zero loss.
pub fn solve_ded_no_loss(instance: &SystemInstance, config: &SolveConfig) -> Result<DispatchReport> {
    let start = Instant::now();
    config.validate()?;
    let instance = lossless(instance);
    let (model, varmap) = build_milp1(&instance, config.tangents)?;
    let Some(solved) = run(&instance, &model, &varmap, config)? else {
        return Err(Error::Infeasible {
            diagnosis: diagnose_infeasibility(&instance),
        });
    };
    let milp_s = solved.milp.wall_time;
    let rec = record(1, "none", &solved);
    report(
        "milp1",
        &instance,
        solved,
        config.tangents,
        vec![rec],
        Vec::new(),
        1,
        None,
        false,
        Timings {
            total_s: start.elapsed().as_secs_f64(),
            milp_s,
        },
    )
}

/// Elementwise mean of two `[t][i]` output matrices.
pub fn midpoint_anchor(p_a: &[Vec<f64>], p_b: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if p_a.len() != p_b.len() {
        return Err(Error::DimensionMismatch {
            context: "anchor periods",
            expected: p_a.len(),
            actual: p_b.len(),
        });
    }
    p_a.iter()
        .zip(p_b)
        .map(|(a, b)| {
            if a.len() != b.len() {
                return Err(Error::DimensionMismatch {
                    context: "anchor units",
                    expected: a.len(),
                    actual: b.len(),
                });
            }
            Ok(a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect())
        })
        .collect()
}

/// Iterative loss handling: a lossless solve, one solve linearized at its
/// outputs, then solves linearized at the mean of the two latest iterates
/// until every period's balance violation is below `epsilon` or `iter_max`
/// passes have run.
pub fn solve_ded_with_loss(instance: &SystemInstance, config: &IaConfig) -> Result<DispatchReport> {
    let start = Instant::now();
    config.validate()?;
    instance.validate()?;
    if instance.loss_model.is_none() {
        return Err(Error::MissingLossModel);
    }
    let sc = &config.solve;
    let mut milp_s = 0.0;
    let mut limit_hit = false;

    let (model, varmap) = build_milp1(instance, sc.tangents)?;
    let first = run(instance, &model, &varmap, sc)?.ok_or(Error::IterationInfeasible { k: 1 })?;
    milp_s += first.milp.wall_time;
    limit_hit |= first.milp.limit_hit;

    let (model, varmap) = build_milp2(instance, sc.tangents, &first.schedule.p)?;
    let second = run(instance, &model, &varmap, sc)?.ok_or(Error::IterationInfeasible { k: 2 })?;
    milp_s += second.milp.wall_time;
    limit_hit |= second.milp.limit_hit;

    let warmup = vec![record(1, "none", &first), record(2, "P(1)", &second)];
    let mut previous = first.schedule.p.clone();
    let mut latest = second.schedule.p.clone();

    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut best: Option<(usize, Solved)> = None;
    let mut terminated_by = Termination::IterMax;
    for iter in 1..=config.iter_max {
        let k = iter + 2;
        let anchor = midpoint_anchor(&previous, &latest)?;
        let (model, varmap) = build_milp2(instance, sc.tangents, &anchor)?;
        let solved = run(instance, &model, &varmap, sc)?.ok_or(Error::IterationInfeasible { k })?;
        milp_s += solved.milp.wall_time;
        limit_hit |= solved.milp.limit_hit;
        iterations.push(record(k, &format!("(P({})+P({}))/2", k - 2, k - 1), &solved));
        log::info!("iteration k={k}: max E_t = {:.6} MW", solved.audit.max_violation);

        let converged = solved.audit.balance_violation.iter().all(|&e| e < config.epsilon);
        previous = std::mem::replace(&mut latest, solved.schedule.p.clone());
        if converged {
            best = Some((k, solved));
            terminated_by = Termination::Epsilon;
            break;
        }
        let better = best
            .as_ref()
            .is_none_or(|(_, b)| solved.audit.max_violation < b.audit.max_violation);
        if better {
            best = Some((k, solved));
        }
    }
    let (selected_k, chosen) = best.expect("iter_max >= 1 guarantees one pass");
    report(
        "milp-ia",
        instance,
        chosen,
        sc.tangents,
        warmup,
        iterations,
        selected_k,
        Some(terminated_by),
        limit_hit,
        Timings {
            total_s: start.elapsed().as_secs_f64(),
            milp_s,
        },
    )
}
