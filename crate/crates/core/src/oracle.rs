//! Brute-force reference solvers for tiny lossless instances.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::instance::{Schedule, SystemInstance};

pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 16;

pub const DP_MAX_UNITS: usize = 3;
pub const DP_MAX_PERIODS: usize = 6;
/// Grid intervals allowed per unit, summed over its segments.
pub const DP_MAX_INTERVALS: usize = 200;

/// Every segment assignment of an instance, as `[t][i]` 1-based segment
/// indices, in lexicographic order of the flattened `(t, i)` tensor.
#[derive(Debug, Clone)]
pub struct Assignments {
    radix: Vec<usize>,
    current: Option<Vec<usize>>,
    units: usize,
}

impl Iterator for Assignments {
    type Item = Vec<Vec<usize>>;

    fn next(&mut self) -> Option<Self::Item> {
        let cur = self.current.as_mut()?;
        let item = cur.chunks(self.units).map(|c| c.iter().map(|j| j + 1).collect()).collect();
        let mut k = cur.len();
        loop {
            if k == 0 {
                self.current = None;
                break;
            }
            k -= 1;
            cur[k] += 1;
            if cur[k] < self.radix[k] {
                break;
            }
            cur[k] = 0;
        }
        Some(item)
    }
}

/// Number of segment assignments, `Π_i (n_i + 1)^T`, saturating at `u128::MAX`.
pub fn assignment_count(instance: &SystemInstance) -> u128 {
    let per_period = instance
        .units
        .iter()
        .fold(1u128, |acc, u| acc.saturating_mul(u.prohibited_zones.len() as u128 + 1));
    (0..instance.num_periods()).fold(1u128, |acc, _| acc.saturating_mul(per_period))
}

pub fn enumerate_assignments(instance: &SystemInstance, cap: u128) -> Result<Assignments> {
    instance.validate()?;
    let size = assignment_count(instance);
    if size > cap {
        return Err(Error::EnumerationCap { size, cap });
    }
    let units = instance.num_units();
    let radix: Vec<usize> = (0..instance.num_periods())
        .flat_map(|_| instance.units.iter().map(|u| u.prohibited_zones.len() + 1))
        .collect();
    Ok(Assignments {
        current: Some(vec![0; radix.len()]),
        radix,
        units,
    })
}

/// `L_f · N · T · delta` with `L_f = max_i (beta_i + 2 gamma_i p_max,i)`:
/// the distance the grid optimum may sit from the true optimum.
pub fn dp_error_bound(instance: &SystemInstance, delta: f64) -> f64 {
    let lf = instance
        .units
        .iter()
        .map(|u| u.beta + 2.0 * u.gamma * u.p_max)
        .fold(0.0, f64::max);
    lf * instance.num_units() as f64 * instance.num_periods() as f64 * delta
}

fn unit_grid(instance: &SystemInstance, i: usize, delta: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    for seg in &instance.segments()[i] {
        let steps = ((seg.hi - seg.lo) / delta + 1e-9).floor() as usize;
        for k in 0..=steps {
            grid.push(seg.lo + k as f64 * delta);
        }
        if seg.hi - grid[grid.len() - 1] > 1e-9 {
            grid.push(seg.hi);
        } else {
            let last = grid.len() - 1;
            grid[last] = seg.hi;
        }
    }
    grid
}

/// For each current grid index, the contiguous range of previous indices
/// whose output is within the ramp window.
fn ramp_windows(grid: &[f64], ramp_up: f64, ramp_down: f64) -> Vec<(usize, usize)> {
    const TOL: f64 = 1e-9;
    grid.iter()
        .map(|&p| {
            let a = grid.partition_point(|&q| q < p - ramp_up - TOL);
            let b = grid.partition_point(|&q| q <= p + ramp_down + TOL);
            (a, b)
        })
        .collect()
}

/// Exact dispatch on a grid of step `delta` by dynamic programming over the
/// joint output state. Balance and reserve are enforced within `N·delta/2`
/// MW; the result is within [`dp_error_bound`] of the true optimum.
pub fn dp_exact_dispatch(instance: &SystemInstance, delta: f64) -> Result<(f64, Schedule)> {
    instance.validate()?;
    let (n, periods) = (instance.num_units(), instance.num_periods());
    if instance.loss_model.as_ref().is_some_and(|l| !l.is_zero()) {
        return Err(Error::OraclePrecondition("instance must be lossless".into()));
    }
    if n > DP_MAX_UNITS || periods > DP_MAX_PERIODS {
        return Err(Error::OraclePrecondition(format!(
            "at most {DP_MAX_UNITS} units and {DP_MAX_PERIODS} periods, got {n} and {periods}"
        )));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::OraclePrecondition("delta must be positive".into()));
    }
    let grids: Vec<Vec<f64>> = (0..n).map(|i| unit_grid(instance, i, delta)).collect();
    for (i, g) in grids.iter().enumerate() {
        let intervals = g.len() - instance.segments()[i].len();
        if intervals > DP_MAX_INTERVALS {
            return Err(Error::OraclePrecondition(format!(
                "unit {} needs {intervals} grid intervals (limit {DP_MAX_INTERVALS})",
                i + 1
            )));
        }
    }
    let dims: Vec<usize> = grids.iter().map(Vec::len).collect();
    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let states: usize = dims.iter().product();
    let coords = |s: usize, i: usize| (s / strides[i]) % dims[i];
    let windows: Vec<Vec<(usize, usize)>> = instance
        .units
        .iter()
        .zip(&grids)
        .map(|(u, g)| ramp_windows(g, u.ramp_up, u.ramp_down))
        .collect();
    let unit_cost: Vec<Vec<f64>> = instance
        .units
        .iter()
        .zip(&grids)
        .map(|(u, g)| g.iter().map(|&p| u.cost(p)).collect())
        .collect();
    let headroom: Vec<Vec<f64>> = instance
        .units
        .iter()
        .zip(&grids)
        .map(|(u, g)| g.iter().map(|&p| u.reserve_headroom(p).max(0.0)).collect())
        .collect();
    let tol = n as f64 * delta / 2.0;

    let mut value = vec![f64::INFINITY; states];
    let mut back: Vec<Vec<u32>> = Vec::with_capacity(periods);
    for t in 0..periods {
        // Best predecessor value over the ramp box of each state.
        let mut carried: Vec<(f64, u32)> = if t == 0 {
            vec![(0.0, u32::MAX); states]
        } else {
            let mut cur: Vec<(f64, u32)> = value.iter().enumerate().map(|(s, &v)| (v, s as u32)).collect();
            for i in 0..n {
                cur = window_min_along(&cur, dims[i], strides[i], &windows[i]);
            }
            cur
        };
        let (d, r) = (instance.demand[t], instance.reserve[t]);
        for (s, slot) in carried.iter_mut().enumerate() {
            let mut total = 0.0;
            let mut cost = 0.0;
            let mut reserve = 0.0;
            let mut ok = true;
            for i in 0..n {
                let k = coords(s, i);
                let p = grids[i][k];
                if t == 0 {
                    if let Some(p0) = instance.units[i].p_initial {
                        let u = &instance.units[i];
                        if p - p0 > u.ramp_up + 1e-9 || p0 - p > u.ramp_down + 1e-9 {
                            ok = false;
                            break;
                        }
                    }
                }
                total += p;
                cost += unit_cost[i][k];
                reserve += headroom[i][k];
            }
            if !ok || (total - d).abs() > tol + 1e-9 || reserve < r - tol - 1e-9 {
                slot.0 = f64::INFINITY;
            } else {
                slot.0 += cost;
            }
        }
        value = carried.iter().map(|&(v, _)| v).collect();
        back.push(carried.into_iter().map(|(_, b)| b).collect());
    }

    let mut best: Option<usize> = None;
    for (s, &v) in value.iter().enumerate() {
        if v < best.map_or(f64::INFINITY, |b| value[b]) {
            best = Some(s);
        }
    }
    let Some(mut s) = best else {
        return Err(Error::Infeasible {
            diagnosis: "no feasible path on the output grid".into(),
        });
    };
    let cost = value[s];
    let mut p = vec![Vec::new(); periods];
    for t in (0..periods).rev() {
        p[t] = (0..n).map(|i| grids[i][coords(s, i)]).collect();
        if t > 0 {
            s = back[t][s] as usize;
        }
    }
    Ok((cost, Schedule::with_max_reserve(instance, p)))
}

/// Sliding-window minimum along one axis of the flattened state array,
/// keeping the origin of each minimum. Ties keep the earliest index.
fn window_min_along(values: &[(f64, u32)], dim: usize, stride: usize, windows: &[(usize, usize)]) -> Vec<(f64, u32)> {
    let mut out = vec![(f64::INFINITY, u32::MAX); values.len()];
    let mut deque: VecDeque<usize> = VecDeque::with_capacity(dim);
    for base in 0..values.len() {
        if !(base / stride).is_multiple_of(dim) {
            continue;
        }
        deque.clear();
        let at = |k: usize| values[base + k * stride];
        let mut pushed = 0usize;
        for (k, &(a, b)) in windows.iter().enumerate() {
            while pushed < b {
                let v = at(pushed).0;
                while deque.back().is_some_and(|&q| at(q).0 > v) {
                    deque.pop_back();
                }
                deque.push_back(pushed);
                pushed += 1;
            }
            while deque.front().is_some_and(|&q| q < a) {
                deque.pop_front();
            }
            if let Some(&q) = deque.front() {
                if a < b {
                    out[base + k * stride] = at(q);
                }
            }
        }
    }
    out
}
