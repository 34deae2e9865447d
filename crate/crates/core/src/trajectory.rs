//! Time-indexed closed-loop logs and their CSV form.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::kinematics::{Control, State};
use crate::potential::AmplitudeVector;

pub const TRAJECTORY_HEADER: [&str; 11] =
    ["t", "x1", "x2", "x3", "u1", "u2", "a1", "a2", "a12", "V", "saturated"];

/// Significant digits for floating columns.
const SIGNIFICANT_DIGITS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub state: State,
    pub control: Control,
    pub amplitude: AmplitudeVector,
    pub potential: f64,
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GoalReached,
    HorizonExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub termination: Termination,
    pub convergence_time: Option<f64>,
    /// Control updates at which clamping changed the command.
    pub saturation_count: u64,
    /// Number of control updates, logged or not.
    pub control_updates: u64,
    pub max_abs_u1: f64,
    pub max_abs_u2: f64,
}

impl Trajectory {
    pub(crate) fn empty() -> Self {
        Trajectory {
            rows: Vec::new(),
            termination: Termination::HorizonExhausted,
            convergence_time: None,
            saturation_count: 0,
            control_updates: 0,
            max_abs_u1: 0.0,
            max_abs_u2: 0.0,
        }
    }

    pub fn first(&self) -> Option<&TrajectoryRow> {
        self.rows.first()
    }

    pub fn last(&self) -> Option<&TrajectoryRow> {
        self.rows.last()
    }

    pub fn final_state(&self) -> Option<State> {
        self.last().map(|r| r.state)
    }

    /// State at time `t` by linear interpolation; `None` outside the logged range.
    pub fn state_at(&self, t: f64) -> Option<State> {
        let (first, last) = (self.rows.first()?, self.rows.last()?);
        if t < first.t || t > last.t {
            return None;
        }
        let i = self.rows.partition_point(|r| r.t <= t);
        if i == 0 {
            return Some(first.state);
        }
        let lo = &self.rows[i - 1];
        if i == self.rows.len() || lo.t == t {
            return Some(lo.state);
        }
        let hi = &self.rows[i];
        let w = (t - lo.t) / (hi.t - lo.t);
        let (a, b) = (lo.state.to_array(), hi.state.to_array());
        Some(State::from([0, 1, 2].map(|k| a[k] + w * (b[k] - a[k]))))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(TRAJECTORY_HEADER)?;
        for r in &self.rows {
            let floats = [
                r.t,
                r.state.x1,
                r.state.x2,
                r.state.x3,
                r.control.u1,
                r.control.u2,
                r.amplitude.a1,
                r.amplitude.a2,
                r.amplitude.a12,
                r.potential,
            ];
            let mut record: Vec<String> =
                floats.iter().map(|v| format_significant(*v, SIGNIFICANT_DIGITS)).collect();
            record.push(if r.saturated { "1" } else { "0" }.to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads rows back from CSV. Columns are located by header name, so extra
    /// columns are ignored; every column of the trajectory header is required.
    pub fn read_csv<R: Read>(input: R) -> Result<Vec<TrajectoryRow>> {
        let mut reader = csv::ReaderBuilder::new().from_reader(input);
        let headers = reader.headers()?.clone();
        let mut idx = [0usize; 11];
        for (slot, name) in idx.iter_mut().zip(TRAJECTORY_HEADER) {
            *slot = headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Csv(format!("missing column `{name}`")))?;
        }
        let mut rows = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let field = |k: usize| -> Result<f64> {
                let raw = record.get(idx[k]).unwrap_or("").trim();
                raw.parse::<f64>().map_err(|_| {
                    Error::Csv(format!(
                        "row {}: column `{}` is not a number: {raw:?}",
                        line + 1,
                        TRAJECTORY_HEADER[k]
                    ))
                })
            };
            let saturated = match record.get(idx[10]).map(str::trim) {
                Some("0") => false,
                Some("1") => true,
                other => {
                    return Err(Error::Csv(format!(
                        "row {}: `saturated` must be 0 or 1, got {other:?}",
                        line + 1
                    )))
                }
            };
            rows.push(TrajectoryRow {
                t: field(0)?,
                state: State::new(field(1)?, field(2)?, field(3)?),
                control: Control::new(field(4)?, field(5)?),
                amplitude: AmplitudeVector {
                    a1: field(6)?,
                    a2: field(7)?,
                    a12: field(8)?,
                },
                potential: field(9)?,
                saturated,
            });
        }
        if rows.is_empty() {
            return Err(Error::Csv("no data rows".into()));
        }
        Ok(rows)
    }
}

/// `%g`-style formatting with `digits` significant digits.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{exp}", trim_zeros(mantissa))
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
