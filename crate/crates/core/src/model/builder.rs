//! Builders for the perspective-cut MILP (lossless) and its Taylor-linearized
//! loss extension.
//!
//! Every row is expressed in MW; per-unit loss coefficients are rescaled by
//! the MVA base while the rows are assembled. Fixed costs never become
//! variables: they are folded into the objective constant.

use super::{MilpModel, RowKind, Sense, VarId};
use crate::error::{Error, Result};
use crate::instance::{OperatingSegment, Schedule, SystemInstance};

pub const DEFAULT_TANGENTS: usize = 4;

/// Coefficients of the tangent cut `z >= coef_p * p + coef_u * u` of the
/// perspective of `beta p + gamma p²` at `p_bar`.
pub fn tangent_cut(beta: f64, gamma: f64, p_bar: f64) -> (f64, f64) {
    (2.0 * gamma * p_bar + beta, -gamma * p_bar * p_bar)
}

/// Tangent points per unit and segment: `lo + l (hi - lo) / L` for `l = 0..=L`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentPlan {
    pub tangents: usize,
    /// Indexed `[unit][segment][l]`.
    pub points: Vec<Vec<Vec<f64>>>,
}

impl TangentPlan {
    pub fn new(instance: &SystemInstance, tangents: usize) -> Result<Self> {
        if tangents == 0 {
            return Err(Error::validation("tangents", "L must be at least 1"));
        }
        let points = instance
            .segments()
            .iter()
            .map(|segs| segs.iter().map(|s| Self::segment_points(s, tangents)).collect())
            .collect();
        Ok(Self { tangents, points })
    }

    fn segment_points(seg: &OperatingSegment, tangents: usize) -> Vec<f64> {
        let step = (seg.hi - seg.lo) / tangents as f64;
        (0..=tangents)
            .map(|l| if l == tangents { seg.hi } else { seg.lo + l as f64 * step })
            .collect()
    }
}

/// Maps domain quantities to model variables. Outer indices are `[unit][period]`,
/// segment indices are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct VarMap {
    pub p_total: Vec<Vec<VarId>>,
    pub p_seg: Vec<Vec<Vec<VarId>>>,
    pub u_seg: Vec<Vec<Vec<VarId>>>,
    pub z_seg: Vec<Vec<Vec<VarId>>>,
    pub sr: Vec<Vec<VarId>>,
    /// Linearized quadratic loss per period (loss models only).
    pub c_loss: Option<Vec<VarId>>,
    pub alpha_constant: f64,
}

impl VarMap {
    pub fn num_units(&self) -> usize {
        self.p_total.len()
    }

    pub fn num_periods(&self) -> usize {
        self.p_total.first().map_or(0, Vec::len)
    }

    /// Extracts outputs and reserves as a `[t][i]` schedule.
    pub fn schedule(&self, values: &[f64]) -> Schedule {
        let (n, t) = (self.num_units(), self.num_periods());
        let pick = |m: &Vec<Vec<VarId>>| -> Vec<Vec<f64>> {
            (0..t).map(|tt| (0..n).map(|i| values[m[i][tt].0]).collect()).collect()
        };
        Schedule::new(pick(&self.p_total), pick(&self.sr))
    }

    /// Binaries of each `(unit, period)` in `Σ_j u = 1` order, unit-major.
    pub fn selection_groups(&self) -> Vec<&[VarId]> {
        self.u_seg
            .iter()
            .flat_map(|per_unit| per_unit.iter().map(Vec::as_slice))
            .collect()
    }
}

/// MILP for the lossless problem: zone disjunction by segment binaries,
/// objective approximated from below by `L + 1` perspective cuts per segment.
pub fn build_milp1(instance: &SystemInstance, tangents: usize) -> Result<(MilpModel, VarMap)> {
    instance.validate()?;
    build(instance, tangents, None)
}

/// MILP with losses: balance includes `B00·base + B0ᵀP + c_t`, and `c_t` is
/// bounded below by the first-order Taylor cut of the quadratic loss at
/// `anchors[t]` (MW, indexed `[t][i]`).
pub fn build_milp2(
    instance: &SystemInstance,
    tangents: usize,
    anchors: &[Vec<f64>],
) -> Result<(MilpModel, VarMap)> {
    instance.validate()?;
    if instance.loss_model.is_none() {
        return Err(Error::MissingLossModel);
    }
    if anchors.len() != instance.num_periods() {
        return Err(Error::DimensionMismatch {
            context: "anchor periods",
            expected: instance.num_periods(),
            actual: anchors.len(),
        });
    }
    for row in anchors {
        if row.len() != instance.num_units() {
            return Err(Error::DimensionMismatch {
                context: "anchor units",
                expected: instance.num_units(),
                actual: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("anchors", "must be finite"));
        }
    }
    build(instance, tangents, Some(anchors))
}

fn build(
    instance: &SystemInstance,
    tangents: usize,
    anchors: Option<&[Vec<f64>]>,
) -> Result<(MilpModel, VarMap)> {
    let plan = TangentPlan::new(instance, tangents)?;
    let segments = instance.segments();
    let (n, periods) = (instance.num_units(), instance.num_periods());
    let mut m = MilpModel::new();

    let mut p_total = vec![Vec::with_capacity(periods); n];
    let mut sr = vec![Vec::with_capacity(periods); n];
    let mut p_seg = vec![Vec::with_capacity(periods); n];
    let mut u_seg = vec![Vec::with_capacity(periods); n];
    let mut z_seg = vec![Vec::with_capacity(periods); n];
    for (i, unit) in instance.units.iter().enumerate() {
        for t in 0..periods {
            let (ui, tt) = (i + 1, t + 1);
            p_total[i].push(m.add_continuous(format!("P_{ui}_{tt}"), unit.p_min, unit.p_max));
            sr[i].push(m.add_continuous(format!("SR_{ui}_{tt}"), 0.0, unit.ramp_up));
            let (mut ps, mut us, mut zs) = (Vec::new(), Vec::new(), Vec::new());
            for seg in &segments[i] {
                let j = seg.index;
                ps.push(m.add_continuous(format!("Pseg_{ui}_{tt}_{j}"), 0.0, seg.hi));
                us.push(m.add_binary(format!("u_{ui}_{tt}_{j}")));
                zs.push(m.add_continuous(
                    format!("z_{ui}_{tt}_{j}"),
                    f64::NEG_INFINITY,
                    f64::INFINITY,
                ));
            }
            p_seg[i].push(ps);
            u_seg[i].push(us);
            z_seg[i].push(zs);
        }
    }
    let c_loss = anchors.map(|_| {
        (0..periods)
            .map(|t| m.add_continuous(format!("c_{}", t + 1), f64::NEG_INFINITY, f64::INFINITY))
            .collect::<Vec<_>>()
    });

    for per_unit in &z_seg {
        for zs in per_unit {
            for &z in zs {
                m.objective.add(z, 1.0);
            }
        }
    }
    let alpha_constant = instance.total_fixed_cost();
    m.objective.constant = alpha_constant;

    // Rows are appended block by block so the model reads in a fixed order.
    for (i, segs) in segments.iter().enumerate() {
        for t in 0..periods {
            for (j, seg) in segs.iter().enumerate() {
                let (p, u) = (p_seg[i][t][j], u_seg[i][t][j]);
                let tag = format!("{}_{}_{}", i + 1, t + 1, seg.index);
                m.add_constraint(
                    format!("poz_lo_{tag}"),
                    RowKind::Poz,
                    vec![(p, 1.0), (u, -seg.lo)],
                    Sense::Ge,
                    0.0,
                );
                m.add_constraint(
                    format!("poz_hi_{tag}"),
                    RowKind::Poz,
                    vec![(p, 1.0), (u, -seg.hi)],
                    Sense::Le,
                    0.0,
                );
            }
        }
    }
    for i in 0..n {
        for t in 0..periods {
            let mut terms: Vec<(VarId, f64)> = p_seg[i][t].iter().map(|&v| (v, 1.0)).collect();
            terms.push((p_total[i][t], -1.0));
            m.add_constraint(format!("link_{}_{}", i + 1, t + 1), RowKind::Linking, terms, Sense::Eq, 0.0);
        }
    }
    for i in 0..n {
        for t in 0..periods {
            let terms = u_seg[i][t].iter().map(|&v| (v, 1.0)).collect();
            m.add_constraint(format!("sel_{}_{}", i + 1, t + 1), RowKind::Selection, terms, Sense::Eq, 1.0);
        }
    }
    for (i, unit) in instance.units.iter().enumerate() {
        for t in 0..periods {
            for (j, seg) in segments[i].iter().enumerate() {
                for (l, &p_bar) in plan.points[i][j].iter().enumerate() {
                    let (coef_p, coef_u) = tangent_cut(unit.beta, unit.gamma, p_bar);
                    let mut terms = vec![(z_seg[i][t][j], 1.0), (p_seg[i][t][j], -coef_p)];
                    if coef_u != 0.0 {
                        terms.push((u_seg[i][t][j], -coef_u));
                    }
                    m.add_constraint(
                        format!("cut_{}_{}_{}_{}", i + 1, t + 1, seg.index, l),
                        RowKind::Cuts,
                        terms,
                        Sense::Ge,
                        0.0,
                    );
                }
            }
        }
    }
    if let (Some(anchors), Some(c_loss), Some(loss)) = (anchors, &c_loss, &instance.loss_model) {
        // c_t >= 2 aᵀ(B/base) P - aᵀ(B/base) a
        for t in 0..periods {
            let ba = loss.scaled_b_times(&anchors[t]);
            let offset: f64 = ba.iter().zip(&anchors[t]).map(|(x, y)| x * y).sum();
            let mut terms = vec![(c_loss[t], 1.0)];
            for i in 0..n {
                if ba[i] != 0.0 {
                    terms.push((p_total[i][t], -2.0 * ba[i]));
                }
            }
            m.add_constraint(format!("taylor_{}", t + 1), RowKind::Cuts, terms, Sense::Ge, -offset);
        }
    }
    for t in 0..periods {
        let mut terms = Vec::with_capacity(n + 1);
        let mut rhs = instance.demand[t];
        if let (Some(loss), Some(c_loss)) = (&instance.loss_model, &c_loss) {
            for i in 0..n {
                terms.push((p_total[i][t], 1.0 - loss.b0[i]));
            }
            terms.push((c_loss[t], -1.0));
            rhs += loss.b00 * loss.base_mva;
        } else {
            terms.extend((0..n).map(|i| (p_total[i][t], 1.0)));
        }
        m.add_constraint(format!("bal_{}", t + 1), RowKind::Balance, terms, Sense::Eq, rhs);
    }
    for (i, unit) in instance.units.iter().enumerate() {
        for t in 0..periods {
            let tag = format!("{}_{}", i + 1, t + 1);
            if t == 0 {
                if let Some(p0) = unit.p_initial {
                    let p = p_total[i][0];
                    m.add_constraint(format!("ramp_up_{tag}"), RowKind::Ramp, vec![(p, 1.0)], Sense::Le, p0 + unit.ramp_up);
                    m.add_constraint(format!("ramp_dn_{tag}"), RowKind::Ramp, vec![(p, 1.0)], Sense::Ge, p0 - unit.ramp_down);
                }
                continue;
            }
            let terms = vec![(p_total[i][t], 1.0), (p_total[i][t - 1], -1.0)];
            m.add_constraint(format!("ramp_up_{tag}"), RowKind::Ramp, terms.clone(), Sense::Le, unit.ramp_up);
            m.add_constraint(format!("ramp_dn_{tag}"), RowKind::Ramp, terms, Sense::Ge, -unit.ramp_down);
        }
    }
    for (i, unit) in instance.units.iter().enumerate() {
        for t in 0..periods {
            m.add_constraint(
                format!("sr_head_{}_{}", i + 1, t + 1),
                RowKind::Reserve,
                vec![(sr[i][t], 1.0), (p_total[i][t], 1.0)],
                Sense::Le,
                unit.p_max,
            );
        }
    }
    for t in 0..periods {
        let terms = (0..n).map(|i| (sr[i][t], 1.0)).collect();
        m.add_constraint(format!("sr_req_{}", t + 1), RowKind::Reserve, terms, Sense::Ge, instance.reserve[t]);
    }

    let varmap = VarMap {
        p_total,
        p_seg,
        u_seg,
        z_seg,
        sr,
        c_loss,
        alpha_constant,
    };
    Ok((m, varmap))
}

fn containing_segment(segments: &[OperatingSegment], p: f64) -> &OperatingSegment {
    segments
        .iter()
        .max_by(|a, b| a.slack(p).total_cmp(&b.slack(p)))
        .expect("a unit always has at least one segment")
}

/// Value of the cut-based objective at a schedule: fixed costs plus, for each
/// `(i, t)`, the largest tangent of the segment containing the output.
pub fn surrogate_cost(instance: &SystemInstance, schedule: &Schedule, tangents: usize) -> Result<f64> {
    schedule.check_dims(instance)?;
    let plan = TangentPlan::new(instance, tangents)?;
    let segments = instance.segments();
    let mut total = instance.total_fixed_cost();
    for row in &schedule.p {
        for (i, (&p, unit)) in row.iter().zip(&instance.units).enumerate() {
            let seg = containing_segment(&segments[i], p);
            total += plan.points[i][seg.index - 1]
                .iter()
                .map(|&p_bar| {
                    let (a, b) = tangent_cut(unit.beta, unit.gamma, p_bar);
                    a * p + b
                })
                .fold(f64::NEG_INFINITY, f64::max);
        }
    }
    Ok(total)
}

/// Upper bound on exact cost minus cut objective:
/// `Σ_{i,t} gamma_i (w / L)² / 4` with `w` the width of the active segment.
pub fn perspective_gap_bound(instance: &SystemInstance, schedule: &Schedule, tangents: usize) -> Result<f64> {
    schedule.check_dims(instance)?;
    if tangents == 0 {
        return Err(Error::validation("tangents", "L must be at least 1"));
    }
    let segments = instance.segments();
    let mut total = 0.0;
    for row in &schedule.p {
        for (i, (&p, unit)) in row.iter().zip(&instance.units).enumerate() {
            let h = containing_segment(&segments[i], p).width() / tangents as f64;
            total += unit.gamma * h * h / 4.0;
        }
    }
    Ok(total)
}
