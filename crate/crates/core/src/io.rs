//! JSON instance files, CSV schedules and JSON reports.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dispatch::DispatchReport;
use crate::error::{Error, Result};
use crate::instance::{
    evaluate_loss_mw, GeneratingUnit, LossModel, ProhibitedZone, Schedule, SystemInstance, DEFAULT_BASE_MVA,
};

/// Decimal places written for CSV outputs.
pub const CSV_DECIMALS: usize = 6;
/// Audit tolerance (MW) for schedules re-read from CSV, absorbing print rounding.
pub const CSV_AUDIT_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitFile {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    #[serde(default)]
    pub prohibited_zones: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_initial: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum ReserveFile {
    /// `R_t = value · D_t`.
    Fraction { value: f64 },
    Absolute { values: Vec<f64> },
}

fn default_base_mva() -> f64 {
    DEFAULT_BASE_MVA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossFile {
    pub b00: f64,
    pub b0: Vec<f64>,
    pub b: Vec<Vec<f64>>,
    #[serde(default = "default_base_mva")]
    pub base_mva: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub units: Vec<UnitFile>,
    pub demand: Vec<f64>,
    pub reserve: ReserveFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossFile>,
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<SystemInstance> {
        let units = self
            .units
            .into_iter()
            .enumerate()
            .map(|(i, u)| GeneratingUnit {
                id: i + 1,
                alpha: u.alpha,
                beta: u.beta,
                gamma: u.gamma,
                p_min: u.p_min,
                p_max: u.p_max,
                ramp_up: u.ramp_up,
                ramp_down: u.ramp_down,
                prohibited_zones: u.prohibited_zones.iter().map(|&[lo, hi]| ProhibitedZone::new(lo, hi)).collect(),
                p_initial: u.p_initial,
            })
            .collect();
        let reserve = match self.reserve {
            ReserveFile::Fraction { value } => {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(Error::validation("reserve.value", "must be a non-negative fraction"));
                }
                self.demand.iter().map(|d| value * d).collect()
            }
            ReserveFile::Absolute { values } => values,
        };
        let instance = SystemInstance {
            units,
            demand: self.demand,
            reserve,
            loss_model: self.loss.map(|l| LossModel {
                b00: l.b00,
                b0: l.b0,
                b_matrix: l.b,
                base_mva: l.base_mva,
            }),
        };
        instance.validate()?;
        Ok(instance)
    }

    /// File form of an instance; reserves are written as absolute values.
    pub fn from_instance(instance: &SystemInstance) -> Self {
        Self {
            units: instance
                .units
                .iter()
                .map(|u| UnitFile {
                    alpha: u.alpha,
                    beta: u.beta,
                    gamma: u.gamma,
                    p_min: u.p_min,
                    p_max: u.p_max,
                    ramp_up: u.ramp_up,
                    ramp_down: u.ramp_down,
                    prohibited_zones: u.prohibited_zones.iter().map(|z| [z.lo, z.hi]).collect(),
                    p_initial: u.p_initial,
                })
                .collect(),
            demand: instance.demand.clone(),
            reserve: ReserveFile::Absolute {
                values: instance.reserve.clone(),
            },
            loss: instance.loss_model.as_ref().map(|l| LossFile {
                b00: l.b00,
                b0: l.b0.clone(),
                b: l.b_matrix.clone(),
                base_mva: l.base_mva,
            }),
        }
    }
}

pub fn parse_instance(text: &str) -> Result<SystemInstance> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: InstanceFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse(format!("at `{path}`: {}", e.into_inner()))
    })?;
    file.into_instance()
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<SystemInstance> {
    parse_instance(&fs::read_to_string(path)?)
}

pub fn instance_to_json(instance: &SystemInstance) -> Result<String> {
    Ok(serde_json::to_string_pretty(&InstanceFile::from_instance(instance))?)
}

pub fn save_instance(instance: &SystemInstance, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, instance_to_json(instance)? + "\n")?;
    Ok(())
}

/// The system repeated `factor` times, with demand and reserve scaled by
/// `factor`. The loss model is kept for `factor == 1` and dropped otherwise.
pub fn duplicate_system(instance: &SystemInstance, factor: usize) -> Result<SystemInstance> {
    if factor == 0 {
        return Err(Error::validation("factor", "must be at least 1"));
    }
    let n = instance.num_units();
    let units = (0..factor)
        .flat_map(|copy| {
            instance.units.iter().enumerate().map(move |(i, u)| GeneratingUnit {
                id: copy * n + i + 1,
                ..u.clone()
            })
        })
        .collect();
    let f = factor as f64;
    Ok(SystemInstance {
        units,
        demand: instance.demand.iter().map(|d| d * f).collect(),
        reserve: instance.reserve.iter().map(|r| r * f).collect(),
        loss_model: if factor == 1 { instance.loss_model.clone() } else { None },
    })
}

/// CPU time normalized to a reference clock: `given_speed / base_speed · time`.
pub fn scaled_cpu_time(given_speed_ghz: f64, base_speed_ghz: f64, given_time_s: f64) -> Result<f64> {
    if !(given_speed_ghz > 0.0 && base_speed_ghz > 0.0) {
        return Err(Error::validation("cpu speed", "must be positive"));
    }
    Ok(given_speed_ghz / base_speed_ghz * given_time_s)
}

/// Writes `t,unit_1,...,unit_N,loss_mw` rows.
pub fn write_schedule_csv<W: Write>(writer: W, instance: &SystemInstance, schedule: &Schedule) -> Result<()> {
    schedule.check_dims(instance)?;
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=instance.num_units()).map(|i| format!("unit_{i}")));
    header.push("loss_mw".into());
    w.write_record(&header)?;
    for (t, row) in schedule.p.iter().enumerate() {
        let loss = match &instance.loss_model {
            Some(l) => evaluate_loss_mw(l, row)?,
            None => 0.0,
        };
        let mut rec = vec![(t + 1).to_string()];
        rec.extend(row.iter().map(|p| format!("{p:.CSV_DECIMALS$}")));
        rec.push(format!("{loss:.CSV_DECIMALS$}"));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads outputs from a schedule CSV. The `loss_mw` column is ignored.
pub fn read_schedule_csv<R: Read>(reader: R, instance: &SystemInstance) -> Result<Vec<Vec<f64>>> {
    let n = instance.num_units();
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let expected: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("unit_{i}")))
        .collect();
    if header.len() < n + 1 || header.iter().take(n + 1).ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse(format!(
            "schedule header must start with `{}`",
            expected.join(",")
        )));
    }
    let mut p = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row: Vec<f64> = (1..=n)
            .map(|k| {
                let field = rec.get(k).unwrap_or("");
                field.trim().parse::<f64>().map_err(|_| {
                    Error::Parse(format!("schedule row {}: column {} is not a number: `{field}`", line + 1, k + 1))
                })
            })
            .collect::<Result<_>>()?;
        p.push(row);
    }
    if p.len() != instance.num_periods() {
        return Err(Error::DimensionMismatch {
            context: "schedule rows",
            expected: instance.num_periods(),
            actual: p.len(),
        });
    }
    Ok(p)
}

pub fn write_report_json<W: Write>(writer: W, report: &DispatchReport) -> Result<()> {
    serde_json::to_writer_pretty(writer, report)?;
    Ok(())
}
