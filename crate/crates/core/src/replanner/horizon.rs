//! Time until the battery is drained under a predicted load.

use nalgebra::DVector;

use crate::battery::{soc_rate, BatteryParams, BatteryState};
use crate::energy_model::EnergyModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrainHorizon {
    /// Seconds from now until SoC reaches zero.
    pub t_b: f64,
    /// SoC was still positive at the lookahead limit; `t_b` is that limit.
    pub capped: bool,
}

/// Drains the battery along `y_pred` (one value per step of `h`), then keeps
/// propagating the model from `q_end` with zero input.
///
/// With a constant internal voltage the SoC rate depends on the load only, so
/// beyond the horizon whole periods are skipped at their per-period drain.
pub fn battery_time_horizon(
    model: &EnergyModel,
    y_pred: &[f64],
    q_end: &DVector<f64>,
    battery: &BatteryParams,
    state: BatteryState,
    h: f64,
    max_lookahead: f64,
) -> DrainHorizon {
    let mut soc = state.soc;
    if soc <= 0.0 {
        return DrainHorizon {
            t_b: 0.0,
            capped: false,
        };
    }
    let cap_load = battery.deliverable_power();
    let rate = |y: f64, soc: f64| -> f64 {
        let load = y.clamp(0.0, cap_load);
        if battery.has_voltage_table() {
            soc_rate(&battery.at_soc(soc), load).unwrap_or(0.0)
        } else {
            soc_rate(battery, load).unwrap_or(0.0)
        }
    };
    let max_steps = (max_lookahead / h).floor() as usize;
    let mut k = 0usize;
    for &y in y_pred {
        if k >= max_steps {
            return DrainHorizon {
                t_b: max_steps as f64 * h,
                capped: true,
            };
        }
        soc += rate(y, soc) * h;
        k += 1;
        if soc <= 0.0 {
            return DrainHorizon {
                t_b: k as f64 * h,
                capped: false,
            };
        }
    }

    let phi = model.transition(h);
    let output = |q: &DVector<f64>| (model.c() * q)[(0, 0)];
    let mut q = q_end.clone();
    if !battery.has_voltage_table() {
        let period_steps = ((model.period() / h).round() as usize).max(1);
        let mut probe = q.clone();
        let mut drain = 0.0;
        for _ in 0..period_steps {
            probe = &phi * &probe;
            drain -= rate(output(&probe), soc) * h;
        }
        if drain <= 0.0 {
            return DrainHorizon {
                t_b: max_lookahead,
                capped: true,
            };
        }
        // leave at least one period to step through finely
        let whole = ((soc / drain).floor() as usize).saturating_sub(1);
        let room = max_steps.saturating_sub(k) / period_steps;
        let skip = whole.min(room);
        soc -= skip as f64 * drain;
        k += skip * period_steps;
        // the skipped span is an integer number of steps; advance the phase to match
        let phase = (skip * period_steps) as f64 * h;
        q = model.transition(phase) * q;
    }
    while k < max_steps {
        q = &phi * &q;
        soc += rate(output(&q), soc) * h;
        k += 1;
        if soc <= 0.0 {
            return DrainHorizon {
                t_b: k as f64 * h,
                capped: false,
            };
        }
    }
    DrainHorizon {
        t_b: max_steps as f64 * h,
        capped: true,
    }
}
