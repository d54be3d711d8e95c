//! Time series recorded by a simulated flight and its CSV form.

use std::io::Write;

use crate::params::ParamBounds;

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The final point of the plan was reached.
    Completed,
    /// SoC hit zero before the final point.
    BatteryExhausted,
    MaxTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub stage: usize,
    /// Power reading, watts.
    pub upsilon_w: f64,
    /// Filtered power estimate, watts.
    pub y_hat_w: f64,
    pub soc: f64,
    pub c1: f64,
    pub c2: f64,
    pub t_b: f64,
    pub t_r: f64,
    pub solver_iters: usize,
    pub infeasible: bool,
    pub q: Vec<f64>,
}

/// A SoC drop as actually applied (clamped at zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppliedDrop {
    pub t: f64,
    pub drop: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Telemetry {
    pub rows: Vec<TelemetryRow>,
    pub termination: Termination,
    pub drops: Vec<AppliedDrop>,
    pub soc_final: f64,
    /// Number of stages in the plan when the run ended.
    pub final_stage_count: usize,
    /// Period estimates as `(time, seconds)`, one per block after the first.
    pub periods: Vec<(f64, f64)>,
    /// Number of state columns `q0..q{m-1}`.
    pub m: usize,
}

pub const BASE_COLUMNS: [&str; 14] = [
    "t",
    "x",
    "y",
    "heading",
    "stage",
    "upsilon_w",
    "y_hat_w",
    "soc",
    "c1",
    "c2",
    "t_b",
    "t_r",
    "solver_iters",
    "infeasible_flag",
];

pub const REPLAN_COLUMNS: [&str; 8] = ["t", "soc", "c1", "c2", "t_b", "t_r", "solver_iters", "infeasible_flag"];

impl Telemetry {
    pub fn header(&self) -> Vec<String> {
        BASE_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain((0..self.m).map(|i| format!("q{i}")))
            .collect()
    }

    /// Full telemetry; floats use the shortest round-trip form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for r in &self.rows {
            let mut rec = vec![
                r.t.to_string(),
                r.x.to_string(),
                r.y.to_string(),
                r.heading.to_string(),
                r.stage.to_string(),
                r.upsilon_w.to_string(),
                r.y_hat_w.to_string(),
                r.soc.to_string(),
                r.c1.to_string(),
                r.c2.to_string(),
                r.t_b.to_string(),
                r.t_r.to_string(),
                r.solver_iters.to_string(),
                u8::from(r.infeasible).to_string(),
            ];
            rec.extend(r.q.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Only the re-planning columns.
    pub fn write_replan_csv<W: Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(REPLAN_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.t.to_string(),
                r.soc.to_string(),
                r.c1.to_string(),
                r.c2.to_string(),
                r.t_b.to_string(),
                r.t_r.to_string(),
                r.solver_iters.to_string(),
                u8::from(r.infeasible).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Row-averaged `sum_j w_j * normalized c_j`.
    pub fn mean_normalized(&self, bounds: &ParamBounds, weights: &[f64]) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let (b1, b2) = (&bounds.path[0], &bounds.compute[0]);
        let total: f64 = self
            .rows
            .iter()
            .map(|r| weights[0] * b1.normalize(r.c1) + weights[1] * b2.normalize(r.c2))
            .sum();
        total / self.rows.len() as f64
    }
}

/// Time-averaged weighted normalized parameters divided by the final SoC, both
/// as percentages. Undefined when the battery ended empty.
pub fn performance_metric(
    telemetry: &Telemetry,
    bounds: &ParamBounds,
    weights: &[f64],
    soc_final: f64,
) -> Result<f64, SimError> {
    if !(soc_final > 0.0) {
        return Err(SimError::ZeroSoc);
    }
    Ok(telemetry.mean_normalized(bounds, weights) / soc_final)
}
