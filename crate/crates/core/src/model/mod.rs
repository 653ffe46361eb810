//! Generic MILP representation and the dispatch formulations built on it.

mod builder;
mod lp_format;

pub use builder::{
    build_milp1, build_milp2, perspective_gap_bound, surrogate_cost, tangent_cut, TangentPlan,
    VarMap, DEFAULT_TANGENTS,
};
pub use lp_format::write_lp;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn term(mut self, var: VarId, coef: f64) -> Self {
        self.terms.push((var, coef));
        self
    }

    pub fn add(&mut self, var: VarId, coef: f64) {
        self.terms.push((var, coef));
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// Which block of the dispatch formulation a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RowKind {
    Bounds,
    Poz,
    Linking,
    Selection,
    Cuts,
    Balance,
    Ramp,
    Reserve,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub kind: RowKind,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violate the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// Minimize `objective` subject to `constraints` and variable bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpModel {
    pub variables: Vec<Variable>,
    pub objective: LinExpr,
    pub constraints: Vec<Constraint>,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Binary => (0.0, 1.0),
            VarKind::Continuous => (lower, upper),
        };
        self.variables.push(Variable {
            name: name.into(),
            kind,
            lower,
            upper,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        kind: RowKind,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        self.constraints.push(Constraint {
            name: name.into(),
            kind,
            terms,
            sense,
            rhs,
        });
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn binaries(&self) -> Vec<VarId> {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(j, _)| VarId(j))
            .collect()
    }

    pub fn count_rows(&self, kind: RowKind) -> usize {
        self.constraints.iter().filter(|c| c.kind == kind).count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.eval(values)
    }

    /// Largest bound or row violation at `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let bounds = self
            .variables
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0))
            .fold(0.0, f64::max);
        self.constraints
            .iter()
            .map(|c| c.violation(values))
            .fold(bounds, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.variables.len();
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(Error::InvalidModel(format!(
                    "variable `{}` has bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(Error::InvalidModel(format!(
                    "binary `{}` has bounds outside [0, 1]",
                    v.name
                )));
            }
        }
        let check_terms = |terms: &[(VarId, f64)], owner: &str| -> Result<()> {
            for &(var, coef) in terms {
                if var.0 >= n {
                    return Err(Error::InvalidModel(format!(
                        "{owner} references unknown variable {}",
                        var.0
                    )));
                }
                if !coef.is_finite() {
                    return Err(Error::InvalidModel(format!("{owner} has a non-finite coefficient")));
                }
            }
            Ok(())
        };
        check_terms(&self.objective.terms, "objective")?;
        if !self.objective.constant.is_finite() {
            return Err(Error::InvalidModel("objective constant is not finite".into()));
        }
        for c in &self.constraints {
            check_terms(&c.terms, &format!("row `{}`", c.name))?;
            if !c.rhs.is_finite() {
                return Err(Error::InvalidModel(format!("row `{}` has a non-finite rhs", c.name)));
            }
        }
        Ok(())
    }
}

/// The same model with every binary replaced by a continuous variable on `[0, 1]`.
pub fn lp_relaxation(model: &MilpModel) -> MilpModel {
    let mut relaxed = model.clone();
    for v in &mut relaxed.variables {
        if v.kind == VarKind::Binary {
            v.kind = VarKind::Continuous;
            v.lower = v.lower.max(0.0);
            v.upper = v.upper.min(1.0);
        }
    }
    relaxed
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_binaries() -> MilpModel {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 4.0);
        let bs: Vec<VarId> = (0..3).map(|k| m.add_binary(format!("b{k}"))).collect();
        m.objective = LinExpr::new().term(x, 1.0).term(bs[0], 2.0);
        m.add_constraint("r", RowKind::Other, vec![(x, 1.0), (bs[1], 1.0)], Sense::Ge, 1.0);
        m
    }

    #[test]
    fn relaxation_replaces_binaries() {
        let m = three_binaries();
        assert_eq!(m.num_binaries(), 3);
        let r = lp_relaxation(&m);
        assert_eq!(r.num_binaries(), 0);
        for v in &r.variables[1..] {
            assert_eq!((v.kind, v.lower, v.upper), (VarKind::Continuous, 0.0, 1.0));
        }
        assert_eq!(r.constraints, m.constraints);
        assert_eq!(r.objective, m.objective);
    }

    #[test]
    fn relaxation_fixpoint_without_binaries() {
        let r = lp_relaxation(&three_binaries());
        assert_eq!(lp_relaxation(&r), r);
    }

    #[test]
    fn validate_rejects_dangling_reference() {
        let mut m = three_binaries();
        assert!(m.validate().is_ok());
        m.add_constraint("bad", RowKind::Other, vec![(VarId(99), 1.0)], Sense::Le, 0.0);
        assert!(m.validate().is_err());
    }

    #[test]
    fn violation_by_sense() {
        let c = Constraint {
            name: "c".into(),
            kind: RowKind::Other,
            terms: vec![(VarId(0), 2.0)],
            sense: Sense::Eq,
            rhs: 3.0,
        };
        assert_eq!(c.violation(&[1.0]), 1.0);
        assert_eq!(c.violation(&[1.5]), 0.0);
    }
}
