use std::io::{self, Write};

use super::{MilpModel, Sense, VarKind};

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn write_terms<W: Write>(w: &mut W, model: &MilpModel, terms: &[(super::VarId, f64)]) -> io::Result<()> {
    if terms.is_empty() {
        return write!(w, " 0");
    }
    for &(var, coef) in terms {
        let sign = if coef < 0.0 { '-' } else { '+' };
        write!(w, " {sign} {} {}", fmt_num(coef.abs()), model.variables[var.0].name)?;
    }
    Ok(())
}

/// Writes the model in CPLEX LP text format. Rows appear in model order,
/// which for the dispatch builders is zone, linking, selection, cut,
/// balance, ramp and reserve blocks.
pub fn write_lp<W: Write>(model: &MilpModel, w: &mut W) -> io::Result<()> {
    writeln!(w, "\\ objective constant: {}", fmt_num(model.objective.constant))?;
    writeln!(w, "Minimize")?;
    write!(w, " obj:")?;
    write_terms(w, model, &model.objective.terms)?;
    if model.objective.constant != 0.0 {
        let c = model.objective.constant;
        write!(w, " {} {}", if c < 0.0 { '-' } else { '+' }, fmt_num(c.abs()))?;
    }
    writeln!(w)?;
    writeln!(w, "Subject To")?;
    for row in &model.constraints {
        write!(w, " {}:", row.name)?;
        write_terms(w, model, &row.terms)?;
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        writeln!(w, " {op} {}", fmt_num(row.rhs))?;
    }
    writeln!(w, "Bounds")?;
    for v in model.variables.iter().filter(|v| v.kind == VarKind::Continuous) {
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => writeln!(w, " {} free", v.name)?,
            _ => writeln!(w, " {} <= {} <= {}", fmt_num(v.lower), v.name, fmt_num(v.upper))?,
        }
    }
    let binaries: Vec<&str> = model
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        writeln!(w, "Binaries")?;
        for chunk in binaries.chunks(8) {
            writeln!(w, " {}", chunk.join(" "))?;
        }
    }
    writeln!(w, "End")
}
