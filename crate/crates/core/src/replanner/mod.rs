//! Online re-planning and scheduling.
//!
//! Every re-planning tick the MPC picks the computation-parameter trajectory under
//! the battery's power cap, the drain horizon turns the predicted load into a
//! time-to-empty `t_b`, and the greedy rule moves the path parameters so that the
//! remaining coverage time `t_r` fits in `t_b`.

mod greedy;
mod horizon;
mod mpc;

pub use greedy::{greedy_path_update, remaining_coverage_time, GreedyUpdate};
pub use horizon::{battery_time_horizon, DrainHorizon};
pub use mpc::{round_to_feasible, solve_schedule_mpc, MpcConfig, Schedule, ScheduleProblem};

use thiserror::Error;

use crate::battery::{max_power, BatteryParams, BatteryState};
use crate::coverage::{Plan, PlanError};
use crate::energy_model::{EnergyModel, ScalingFactors};
use crate::estimator::Estimate;
use crate::params::{ParamBounds, ParamVector};

#[derive(Debug, Error, PartialEq)]
pub enum ReplanError {
    #[error("power cap {cap} W below the minimum-configuration power at horizon step {step} (needs {min_power} W more headroom)")]
    Infeasible { step: usize, cap: f64, min_power: f64 },
    #[error("schedule solver did not converge in {iterations} iterations")]
    SolverFailure { iterations: usize },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplanConfig {
    pub mpc: MpcConfig,
    /// Greedy step per path parameter.
    pub delta: Vec<f64>,
    /// Seconds of predicted drain time held back when fitting the path, since a
    /// new path parameter only takes effect at the next second circle.
    pub reserve: f64,
}

/// Everything one re-planning tick reads.
#[derive(Debug, Clone)]
pub struct ReplanContext<'a> {
    pub model: &'a EnergyModel,
    pub estimate: &'a Estimate,
    pub battery: &'a BatteryParams,
    pub soc: BatteryState,
    pub bounds: &'a ParamBounds,
    /// Path slice first, then compute slice.
    pub scaling: &'a ScalingFactors,
    /// Parameters currently applied.
    pub c_prev: &'a ParamVector,
    /// Seconds since the flight started.
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplanDecision {
    /// Computation parameters over the horizon (relaxed).
    pub compute_traj: Vec<Vec<f64>>,
    /// Integer computation parameters to apply now.
    pub compute: Vec<f64>,
    pub path_params: Vec<f64>,
    pub t_b: f64,
    pub t_b_capped: bool,
    pub t_r: f64,
    pub t_r_clamped: bool,
    pub solver_iters: usize,
    /// The cap could not be met; computation fell back to its lower bounds.
    pub infeasible: bool,
    /// The solver failed; the previous computation parameters are held.
    pub solver_failed: bool,
    pub plan_changed: bool,
}

/// One pass of the re-planning loop. The new path parameters are pushed into the
/// plan's pending second circle when a plan is given.
pub fn replan_step(
    ctx: &ReplanContext,
    plan: Option<&mut Plan>,
    cfg: &ReplanConfig,
) -> Result<ReplanDecision, ReplanError> {
    let rho = ctx.bounds.rho();
    let sigma = ctx.bounds.sigma();
    if ctx.scaling.len() != rho + sigma {
        return Err(ReplanError::LengthMismatch {
            expected: rho + sigma,
            got: ctx.scaling.len(),
        });
    }
    if cfg.delta.len() != rho {
        return Err(ReplanError::LengthMismatch {
            expected: rho,
            got: cfg.delta.len(),
        });
    }
    let nu = &ctx.scaling.nu[rho..];
    let cap = max_power(ctx.battery, ctx.soc);
    let problem = ScheduleProblem {
        model: ctx.model,
        q_hat: &ctx.estimate.q_hat.q,
        cap,
        compute_bounds: &ctx.bounds.compute,
        nu,
        c_prev: &ctx.c_prev.compute,
        cfg: &cfg.mpc,
    };
    let (mut infeasible, mut solver_failed) = (false, false);
    let schedule = match solve_schedule_mpc(&problem) {
        Ok(s) => s,
        Err(ReplanError::Infeasible { .. }) => {
            infeasible = true;
            fixed_schedule(&problem, ctx.bounds.lower().compute)
        }
        Err(ReplanError::SolverFailure { iterations }) => {
            solver_failed = true;
            let mut s = fixed_schedule(&problem, ctx.c_prev.compute.clone());
            s.iterations = iterations;
            s
        }
        Err(e) => return Err(e),
    };

    let first = &schedule.traj[0];
    let shift: f64 = nu
        .iter()
        .zip(first.iter().zip(&ctx.c_prev.compute))
        .map(|(n, (c, p))| n * (c - p))
        .sum();
    let y_free = schedule.y_pred[0] - shift;
    let compute = if infeasible {
        ctx.bounds.lower().compute
    } else if solver_failed {
        ctx.c_prev.compute.clone()
    } else {
        round_to_feasible(first, &ctx.bounds.compute, nu, y_free, &ctx.c_prev.compute, cap)
    };

    let drain = battery_time_horizon(
        ctx.model,
        &schedule.y_pred,
        &schedule.q_end,
        ctx.battery,
        ctx.soc,
        cfg.mpc.fine_step,
        cfg.mpc.max_lookahead,
    );
    let path_scaling = ScalingFactors {
        nu: ctx.scaling.nu[..rho].to_vec(),
        tau: ctx.scaling.tau[..rho].to_vec(),
    };
    let (t_r, t_r_clamped) = remaining_coverage_time(&ctx.c_prev.path, &path_scaling, ctx.elapsed);
    let budget = (drain.t_b - cfg.reserve).max(0.0);
    let update = greedy_path_update(
        &ctx.c_prev.path,
        budget,
        &cfg.delta,
        &ctx.bounds.path,
        &path_scaling,
        ctx.elapsed,
    );
    let plan_changed = match plan {
        Some(plan) if rho > 0 => plan.set_path_params(&update.c_path)?,
        _ => false,
    };
    Ok(ReplanDecision {
        compute_traj: schedule.traj,
        compute,
        path_params: update.c_path,
        t_b: drain.t_b,
        t_b_capped: drain.capped,
        t_r,
        t_r_clamped,
        solver_iters: schedule.iterations,
        infeasible,
        solver_failed,
        plan_changed,
    })
}

/// Prediction for a constant computation setting over the horizon.
fn fixed_schedule(p: &ScheduleProblem, c: Vec<f64>) -> Schedule {
    let k = p.cfg.steps();
    let shift: f64 =
        p.nu.iter()
            .zip(c.iter().zip(p.c_prev))
            .map(|(n, (c, c0))| n * (c - c0))
            .sum();
    let phi = p.model.transition(p.cfg.fine_step);
    let mut q = p.q_hat.clone();
    let mut y_pred = Vec::with_capacity(k);
    for _ in 0..k {
        q = &phi * &q;
        y_pred.push((p.model.c() * &q)[(0, 0)] + shift);
    }
    q[0] += p.model.period() * shift;
    Schedule {
        traj: vec![c; k],
        y_pred,
        q_end: q,
        objective: f64::NAN,
        iterations: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy_model::{EnergyState, FourierSeries};
    use crate::estimator::{Estimator, EstimatorConfig};
    use crate::params::Bound;

    struct Fixture {
        model: EnergyModel,
        estimate: Estimate,
        battery: BatteryParams,
        bounds: ParamBounds,
        scaling: ScalingFactors,
    }

    fn fixture() -> Fixture {
        let model = EnergyModel::build(3, 20.0, 1, 1).unwrap();
        let s = FourierSeries::new(vec![60.0 * 20.0, 30.0, -10.0, 5.0], vec![20.0, 4.0, -2.0]).unwrap();
        let q: EnergyState = model.initial_state(&s).unwrap();
        let estimate = Estimator::new(EstimatorConfig::scaled(7, 60.0, 20.0, 1e-8))
            .init(&model, q)
            .unwrap();
        Fixture {
            model,
            estimate,
            battery: BatteryParams::new(22.2, 22.2, 0.02, 10.0, 20.0).unwrap(),
            bounds: ParamBounds::new(
                vec![Bound::new(-1000.0, 0.0).unwrap()],
                vec![Bound::new(2.0, 10.0).unwrap()],
            )
            .unwrap(),
            scaling: ScalingFactors {
                nu: vec![0.06, 0.625],
                tau: vec![360.0, 2.75],
            },
        }
    }

    fn ctx<'a>(f: &'a Fixture, soc: f64, c: &'a ParamVector, elapsed: f64) -> ReplanContext<'a> {
        ReplanContext {
            model: &f.model,
            estimate: &f.estimate,
            battery: &f.battery,
            soc: BatteryState::new(soc),
            bounds: &f.bounds,
            scaling: &f.scaling,
            c_prev: c,
            elapsed,
        }
    }

    fn cfg() -> ReplanConfig {
        ReplanConfig {
            mpc: MpcConfig::new(7, 2),
            delta: vec![250.0],
            reserve: 0.0,
        }
    }

    #[test]
    fn full_battery_keeps_highest_configuration() {
        let f = fixture();
        let c = ParamVector::new(vec![0.0], vec![10.0]);
        let d = replan_step(&ctx(&f, 0.9, &c, 0.0), None, &cfg()).unwrap();
        assert_eq!(d.compute, vec![10.0]);
        assert_eq!(d.path_params, vec![0.0]);
        assert!(d.t_b >= d.t_r);
        assert!(!d.infeasible && !d.solver_failed);
    }

    #[test]
    fn low_battery_degrades_path() {
        let f = fixture();
        let c = ParamVector::new(vec![0.0], vec![10.0]);
        // 60 W on a 222 Wh-scale pack with k_b = 20 drains fast
        let d = replan_step(&ctx(&f, 0.4, &c, 0.0), None, &cfg()).unwrap();
        assert!(d.t_b < 360.0);
        assert!(d.path_params[0] < 0.0);
    }

    #[test]
    fn infeasible_cap_falls_back_to_lower_bounds() {
        let f = fixture();
        let c = ParamVector::new(vec![0.0], vec![10.0]);
        let d = replan_step(&ctx(&f, 0.1, &c, 0.0), None, &cfg()).unwrap();
        assert!(d.infeasible);
        assert_eq!(d.compute, vec![2.0]);
    }

    #[test]
    fn deterministic() {
        let f = fixture();
        let c = ParamVector::new(vec![-500.0], vec![6.0]);
        let a = replan_step(&ctx(&f, 0.5, &c, 30.0), None, &cfg()).unwrap();
        let b = replan_step(&ctx(&f, 0.5, &c, 30.0), None, &cfg()).unwrap();
        assert_eq!(a, b);
    }
}
