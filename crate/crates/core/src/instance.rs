//! Problem data for dynamic economic dispatch with prohibited operating zones,
//! plus exact evaluators for cost, Kron losses and constraint feasibility.
//!
//! Conventions: outputs are in MW, one row of a schedule per period. Ramp
//! limits are stored as non-negative magnitudes, so a feasible move satisfies
//! `-ramp_down <= P[t] - P[t-1] <= ramp_up`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance (MW) for bounds, zone membership, ramp and reserve checks.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Default MVA base for per-unit loss coefficients.
pub const DEFAULT_BASE_MVA: f64 = 100.0;

/// A closed output band `[lo, hi]` the unit may not operate strictly inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProhibitedZone {
    pub lo: f64,
    pub hi: f64,
}

impl ProhibitedZone {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingUnit {
    pub id: usize,
    /// Fixed cost, $/h.
    pub alpha: f64,
    /// Linear cost, $/MWh.
    pub beta: f64,
    /// Quadratic cost, $/MW²h.
    pub gamma: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub ramp_up: f64,
    /// Magnitude of the largest allowed decrease per period.
    pub ramp_down: f64,
    pub prohibited_zones: Vec<ProhibitedZone>,
    /// Output before the first period; when absent period 1 is not ramp-limited.
    pub p_initial: Option<f64>,
}

impl GeneratingUnit {
    /// Exact hourly cost `alpha + beta p + gamma p²`.
    pub fn cost(&self, p: f64) -> f64 {
        self.alpha + self.beta * p + self.gamma * p * p
    }

    /// Largest reserve the unit can hold at output `p`: `min(p_max - p, ramp_up)`.
    pub fn reserve_headroom(&self, p: f64) -> f64 {
        (self.p_max - p).min(self.ramp_up)
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let fields = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("p_min", self.p_min),
            ("p_max", self.p_max),
            ("ramp_up", self.ramp_up),
            ("ramp_down", self.ramp_down),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(Error::validation(format!("{path}.{name}"), "must be finite"));
            }
        }
        if !(self.p_min < self.p_max) {
            return Err(Error::validation(
                format!("{path}.p_max"),
                format!("p_min ({}) must be below p_max ({})", self.p_min, self.p_max),
            ));
        }
        if self.gamma < 0.0 {
            return Err(Error::validation(
                format!("{path}.gamma"),
                "quadratic cost coefficient must be non-negative",
            ));
        }
        if self.ramp_up <= 0.0 {
            return Err(Error::validation(format!("{path}.ramp_up"), "must be positive"));
        }
        if self.ramp_down <= 0.0 {
            return Err(Error::validation(
                format!("{path}.ramp_down"),
                "must be positive (stored as a magnitude)",
            ));
        }
        if let Some(p0) = self.p_initial {
            if !p0.is_finite() {
                return Err(Error::validation(format!("{path}.p_initial"), "must be finite"));
            }
        }
        let mut prev_hi = self.p_min;
        for (k, zone) in self.prohibited_zones.iter().enumerate() {
            let zpath = format!("{path}.prohibited_zones[{k}]");
            if !zone.lo.is_finite() || !zone.hi.is_finite() {
                return Err(Error::validation(zpath, "zone bounds must be finite"));
            }
            if !(zone.lo < zone.hi) {
                return Err(Error::validation(
                    zpath,
                    format!("zone lower bound {} must be below upper bound {}", zone.lo, zone.hi),
                ));
            }
            if !(zone.lo > self.p_min && zone.hi < self.p_max) {
                return Err(Error::validation(
                    zpath,
                    format!(
                        "zone [{}, {}] must lie strictly inside ({}, {})",
                        zone.lo, zone.hi, self.p_min, self.p_max
                    ),
                ));
            }
            if k > 0 && !(zone.lo > prev_hi) {
                return Err(Error::validation(
                    zpath,
                    format!("zone {k} overlaps or is not sorted after zone {}", k - 1),
                ));
            }
            prev_hi = zone.hi;
        }
        Ok(())
    }
}

/// One allowed output interval of a unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingSegment {
    /// 1-based segment index.
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
}

impl OperatingSegment {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, p: f64, tol: f64) -> bool {
        p >= self.lo - tol && p <= self.hi + tol
    }

    /// Positive inside the segment, negative distance outside.
    pub fn slack(&self, p: f64) -> f64 {
        (p - self.lo).min(self.hi - p)
    }
}

/// Splits `[p_min, p_max]` into the `n + 1` segments left between the
/// unit's `n` prohibited zones.
pub fn derive_segments(unit: &GeneratingUnit) -> Result<Vec<OperatingSegment>> {
    unit.validate(&format!("units[{}]", unit.id))?;
    Ok(segments_unchecked(unit))
}

pub(crate) fn segments_unchecked(unit: &GeneratingUnit) -> Vec<OperatingSegment> {
    let mut segments = Vec::with_capacity(unit.prohibited_zones.len() + 1);
    let mut lo = unit.p_min;
    for (k, zone) in unit.prohibited_zones.iter().enumerate() {
        segments.push(OperatingSegment {
            index: k + 1,
            lo,
            hi: zone.lo,
        });
        lo = zone.hi;
    }
    segments.push(OperatingSegment {
        index: unit.prohibited_zones.len() + 1,
        lo,
        hi: unit.p_max,
    });
    segments
}

/// Kron loss coefficients in per unit on `base_mva`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossModel {
    pub b00: f64,
    pub b0: Vec<f64>,
    pub b_matrix: Vec<Vec<f64>>,
    pub base_mva: f64,
}

impl LossModel {
    pub fn zero(n: usize) -> Self {
        Self {
            b00: 0.0,
            b0: vec![0.0; n],
            b_matrix: vec![vec![0.0; n]; n],
            base_mva: DEFAULT_BASE_MVA,
        }
    }

    pub fn num_units(&self) -> usize {
        self.b0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.b00 == 0.0
            && self.b0.iter().all(|&v| v == 0.0)
            && self.b_matrix.iter().flatten().all(|&v| v == 0.0)
    }

    /// Checks shape, symmetry and finiteness. Returns `Ok(false)` when the
    /// matrix is valid but not positive semidefinite; the caller decides
    /// whether to warn.
    pub fn validate(&self, n: usize) -> Result<bool> {
        if self.b0.len() != n {
            return Err(Error::validation(
                "loss.b0",
                format!("expected {n} entries, got {}", self.b0.len()),
            ));
        }
        if self.b_matrix.len() != n {
            return Err(Error::validation(
                "loss.b",
                format!("expected {n} rows, got {}", self.b_matrix.len()),
            ));
        }
        if !(self.base_mva.is_finite() && self.base_mva > 0.0) {
            return Err(Error::validation("loss.base_mva", "must be positive"));
        }
        if !self.b00.is_finite() {
            return Err(Error::validation("loss.b00", "must be finite"));
        }
        for (i, v) in self.b0.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::validation(format!("loss.b0[{i}]"), "must be finite"));
            }
        }
        for (i, row) in self.b_matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::validation(
                    format!("loss.b[{i}]"),
                    format!("expected {n} columns, got {}", row.len()),
                ));
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::validation(format!("loss.b[{i}][{j}]"), "must be finite"));
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (self.b_matrix[i][j], self.b_matrix[j][i]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::validation(
                        format!("loss.b[{i}][{j}]"),
                        format!("matrix is not symmetric ({a} vs {b})"),
                    ));
                }
            }
        }
        Ok(is_positive_semidefinite(&self.b_matrix))
    }

    /// `B P / base` for `P` in MW, i.e. the MW-scaled matrix-vector product.
    pub(crate) fn scaled_b_times(&self, p: &[f64]) -> Vec<f64> {
        self.b_matrix
            .iter()
            .map(|row| row.iter().zip(p).map(|(b, x)| b * x).sum::<f64>() / self.base_mva)
            .collect()
    }

    /// Quadratic part of the loss in MW: `(P/base)ᵀ B (P/base) · base`.
    pub fn quadratic_loss_mw(&self, p: &[f64]) -> f64 {
        let bp = self.scaled_b_times(p);
        bp.iter().zip(p).map(|(a, b)| a * b).sum()
    }
}

/// Symmetric LDLᵀ without pivoting; a negative pivot beyond roundoff, or a
/// zero pivot with a non-zero remainder, means indefinite.
fn is_positive_semidefinite(b: &[Vec<f64>]) -> bool {
    let n = b.len();
    let scale = b
        .iter()
        .flatten()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale * n as f64;
    let mut a: Vec<Vec<f64>> = b.to_vec();
    for k in 0..n {
        let d = a[k][k];
        if d < -tol {
            return false;
        }
        if d <= tol {
            if (k + 1..n).any(|i| a[i][k].abs() > tol.sqrt() * scale.sqrt()) {
                return false;
            }
            continue;
        }
        for i in k + 1..n {
            let f = a[i][k] / d;
            for j in k + 1..n {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemInstance {
    pub units: Vec<GeneratingUnit>,
    /// Load demand per period, MW.
    pub demand: Vec<f64>,
    /// Spinning reserve requirement per period, MW.
    pub reserve: Vec<f64>,
    pub loss_model: Option<LossModel>,
}

impl SystemInstance {
    pub fn num_units(&self) -> usize {
        self.units.len()
    }

    pub fn num_periods(&self) -> usize {
        self.demand.len()
    }

    /// Validates every invariant. Logs a warning for an indefinite loss matrix.
    pub fn validate(&self) -> Result<()> {
        if self.units.is_empty() {
            return Err(Error::validation("units", "at least one unit is required"));
        }
        if self.demand.is_empty() {
            return Err(Error::validation("demand", "at least one period is required"));
        }
        for (i, unit) in self.units.iter().enumerate() {
            unit.validate(&format!("units[{i}]"))?;
        }
        for (t, &d) in self.demand.iter().enumerate() {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::validation(format!("demand[{t}]"), "must be positive and finite"));
            }
        }
        if self.reserve.len() != self.demand.len() {
            return Err(Error::validation(
                "reserve",
                format!(
                    "expected {} entries, got {}",
                    self.demand.len(),
                    self.reserve.len()
                ),
            ));
        }
        for (t, &r) in self.reserve.iter().enumerate() {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::validation(
                    format!("reserve[{t}]"),
                    "must be non-negative and finite",
                ));
            }
        }
        if let Some(loss) = &self.loss_model {
            if !loss.validate(self.units.len())? {
                log::warn!("loss coefficient matrix B is not positive semidefinite");
            }
        }
        Ok(())
    }

    pub fn segments(&self) -> Vec<Vec<OperatingSegment>> {
        self.units.iter().map(segments_unchecked).collect()
    }

    /// Total fixed cost `Σ_t Σ_i alpha_i`.
    pub fn total_fixed_cost(&self) -> f64 {
        self.units.iter().map(|u| u.alpha).sum::<f64>() * self.num_periods() as f64
    }
}

/// Per-period outputs and reserve allocations, indexed `[t][i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub p: Vec<Vec<f64>>,
    pub sr: Vec<Vec<f64>>,
}

impl Schedule {
    pub fn new(p: Vec<Vec<f64>>, sr: Vec<Vec<f64>>) -> Self {
        Self { p, sr }
    }

    /// Outputs with each unit assigned its full reserve headroom
    /// `max(0, min(p_max - P, ramp_up))`. Used when only outputs are known.
    pub fn with_max_reserve(instance: &SystemInstance, p: Vec<Vec<f64>>) -> Self {
        let sr = p
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&instance.units)
                    .map(|(&pi, u)| u.reserve_headroom(pi).max(0.0))
                    .collect()
            })
            .collect();
        Self { p, sr }
    }

    pub fn num_periods(&self) -> usize {
        self.p.len()
    }

    pub fn check_dims(&self, instance: &SystemInstance) -> Result<()> {
        let (t, n) = (instance.num_periods(), instance.num_units());
        for (name, m) in [("schedule outputs", &self.p), ("schedule reserves", &self.sr)] {
            if m.len() != t {
                return Err(Error::DimensionMismatch {
                    context: name,
                    expected: t,
                    actual: m.len(),
                });
            }
            if let Some(row) = m.iter().find(|row| row.len() != n) {
                return Err(Error::DimensionMismatch {
                    context: name,
                    expected: n,
                    actual: row.len(),
                });
            }
        }
        Ok(())
    }
}

/// Total generation cost `Σ_t Σ_i (alpha + beta P + gamma P²)`.
pub fn evaluate_cost(instance: &SystemInstance, schedule: &Schedule) -> Result<f64> {
    schedule.check_dims(instance)?;
    Ok(schedule
        .p
        .iter()
        .map(|row| {
            row.iter()
                .zip(&instance.units)
                .map(|(&p, u)| u.cost(p))
                .sum::<f64>()
        })
        .sum())
}

/// Network loss in MW for outputs `p_t` (MW):
/// `[B00 + B0ᵀ(p/base) + (p/base)ᵀ B (p/base)] · base`.
pub fn evaluate_loss_mw(loss: &LossModel, p_t: &[f64]) -> Result<f64> {
    if p_t.len() != loss.num_units() {
        return Err(Error::DimensionMismatch {
            context: "loss evaluation",
            expected: loss.num_units(),
            actual: p_t.len(),
        });
    }
    let linear: f64 = loss.b0.iter().zip(p_t).map(|(b, p)| b * p).sum();
    Ok(loss.b00 * loss.base_mva + linear + loss.quadratic_loss_mw(p_t))
}

/// Slack of one (period, unit) check; negative means violated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlackEntry {
    /// 1-based period.
    pub t: usize,
    /// 1-based unit, 0 for system-wide rows.
    pub unit: usize,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `E_t = |Σ_i P_{i,t} - D_t - loss_t|` per period, MW.
    pub balance_violation: Vec<f64>,
    pub max_violation: f64,
    pub losses: Vec<f64>,
    pub tolerance: f64,
    pub bounds_ok: bool,
    pub poz_ok: bool,
    pub ramp_ok: bool,
    pub reserve_ok: bool,
    pub bounds_slack: Vec<SlackEntry>,
    pub poz_slack: Vec<SlackEntry>,
    pub ramp_slack: Vec<SlackEntry>,
    /// Per unit: `min(SR, min(p_max - P, RU) - SR)`.
    pub reserve_unit_slack: Vec<SlackEntry>,
    /// Per period: `Σ_i SR - R_t`.
    pub reserve_system_slack: Vec<SlackEntry>,
}

impl FeasibilityReport {
    /// Bounds, zones, ramps and reserve all hold; balance is not included.
    pub fn linear_constraints_ok(&self) -> bool {
        self.bounds_ok && self.poz_ok && self.ramp_ok && self.reserve_ok
    }
}

/// Audits a schedule at [`FEASIBILITY_TOL`].
pub fn evaluate_violations(instance: &SystemInstance, schedule: &Schedule) -> Result<FeasibilityReport> {
    evaluate_violations_with_tol(instance, schedule, FEASIBILITY_TOL)
}

pub fn evaluate_violations_with_tol(
    instance: &SystemInstance,
    schedule: &Schedule,
    tol: f64,
) -> Result<FeasibilityReport> {
    schedule.check_dims(instance)?;
    let segments = instance.segments();
    let mut losses = Vec::with_capacity(instance.num_periods());
    let mut balance = Vec::with_capacity(instance.num_periods());
    let mut bounds_slack = Vec::new();
    let mut poz_slack = Vec::new();
    let mut ramp_slack = Vec::new();
    let mut reserve_unit_slack = Vec::new();
    let mut reserve_system_slack = Vec::new();

    for (t, row) in schedule.p.iter().enumerate() {
        let loss = match &instance.loss_model {
            Some(lm) => evaluate_loss_mw(lm, row)?,
            None => 0.0,
        };
        let generated: f64 = row.iter().sum();
        balance.push((generated - instance.demand[t] - loss).abs());
        losses.push(loss);

        for (i, (&p, unit)) in row.iter().zip(&instance.units).enumerate() {
            let entry = |slack| SlackEntry { t: t + 1, unit: i + 1, slack };
            bounds_slack.push(entry((p - unit.p_min).min(unit.p_max - p)));
            let seg_slack = segments[i]
                .iter()
                .map(|s| s.slack(p))
                .fold(f64::NEG_INFINITY, f64::max);
            poz_slack.push(entry(seg_slack));

            let previous = if t == 0 {
                unit.p_initial
            } else {
                Some(schedule.p[t - 1][i])
            };
            if let Some(prev) = previous {
                let delta = p - prev;
                ramp_slack.push(entry((unit.ramp_up - delta).min(delta + unit.ramp_down)));
            }

            let sr = schedule.sr[t][i];
            reserve_unit_slack.push(entry(sr.min(unit.reserve_headroom(p) - sr)));
        }
        let total_sr: f64 = schedule.sr[t].iter().sum();
        reserve_system_slack.push(SlackEntry {
            t: t + 1,
            unit: 0,
            slack: total_sr - instance.reserve[t],
        });
    }

    let all_ok = |v: &[SlackEntry]| v.iter().all(|e| e.slack >= -tol);
    let max_violation = balance.iter().copied().fold(0.0, f64::max);
    Ok(FeasibilityReport {
        max_violation,
        bounds_ok: all_ok(&bounds_slack),
        poz_ok: all_ok(&poz_slack),
        ramp_ok: all_ok(&ramp_slack),
        reserve_ok: all_ok(&reserve_unit_slack) && all_ok(&reserve_system_slack),
        balance_violation: balance,
        losses,
        tolerance: tol,
        bounds_slack,
        poz_slack,
        ramp_slack,
        reserve_unit_slack,
        reserve_system_slack,
    })
}
