//! Closed-loop flight simulation: plan, fly, sense power, drain the battery and
//! optionally re-plan once per re-planning step.

pub mod kinematics;
pub mod power;
pub mod scenario;
pub mod svg;
mod telemetry;

pub use scenario::{BatteryEvent, Scenario};
pub use telemetry::{
    performance_metric, AppliedDrop, Telemetry, TelemetryRow, Termination, BASE_COLUMNS, REPLAN_COLUMNS,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::battery::{step_soc, BatteryError, BatteryState};
use crate::compute_energy::ComputeError;
use crate::coverage::{generate_plan, Plan, PlanError, StageRole, Transition};
use crate::energy_model::{scale_compute, scale_path, EnergyError, EnergyModel, ScalingFactors};
use crate::estimator::{Estimator, EstimatorError};
use crate::geometry::Point2;
use crate::replanner::{replan_step, ReplanContext, ReplanError};

use kinematics::follow_path;
use power::{synth_power, PowerTruth};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    ScenarioInvalid(String),
    #[error("final SoC is zero; the metric is undefined")]
    ZeroSoc,
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Replan(#[from] ReplanError),
    #[error(transparent)]
    Battery(#[from] BatteryError),
    #[error(transparent)]
    Compute(#[from] ComputeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coverage time at the lower and upper path bounds: plan length over ground speed.
pub fn coverage_time_range(sc: &Scenario) -> Result<(f64, f64), SimError> {
    let time = |c: f64| -> Result<f64, SimError> {
        let plan = generate_plan(&sc.polygon, &sc.plan, &[c])
            .map_err(|e| SimError::ScenarioInvalid(format!("path bound {c}: {e}")))?;
        Ok(plan.path_length() / sc.ground_speed())
    };
    Ok((time(sc.bounds.path[0].lo)?, time(sc.bounds.path[0].hi)?))
}

/// Path and computation scaling factors of a scenario.
pub fn scenario_scaling(sc: &Scenario) -> Result<ScalingFactors, SimError> {
    let (t_lower, t_upper) = coverage_time_range(sc)?;
    let path = scale_path(&sc.bounds.path, t_lower, t_upper)
        .map_err(|e| SimError::ScenarioInvalid(format!("coverage times: {e}")))?;
    let compute = scale_compute(&sc.bounds.compute, |c| sc.profile.predict(c).ok())?;
    Ok(ScalingFactors::concat(path, compute))
}

/// Path scaling refreshed at time `t`: dry runs of what is left of `plan` from
/// `pos` at both path bounds and ground speed `speed`, so `nu c + tau - t` is the
/// time still to fly.
fn remaining_path_scaling(
    sc: &Scenario,
    plan: &Plan,
    pos: Point2,
    t: f64,
    speed: f64,
) -> Result<ScalingFactors, SimError> {
    let time = |c: f64| -> Result<f64, SimError> {
        let mut p = plan.clone();
        p.set_path_params(&[c])?;
        Ok(p.remaining_length_from(pos) / speed)
    };
    let lo = time(sc.bounds.path[0].lo)?;
    let hi = time(sc.bounds.path[0].hi)?.max(lo);
    Ok(scale_path(&sc.bounds.path, t + lo, t + hi)?)
}

/// Runs one flight. Without `adaptive` the initial parameters are held throughout.
pub fn run_scenario(sc: &Scenario, adaptive: bool) -> Result<Telemetry, SimError> {
    let cfg = &sc.replan;
    let h = cfg.mpc.fine_step;
    let replan_every = (cfg.mpc.replan_step / h).round() as u64;
    let record_every = (sc.telemetry_step / h).round().max(1.0) as u64;
    let rho = sc.bounds.rho();

    let mut plan = generate_plan(&sc.polygon, &sc.plan, &sc.initial.path)?;
    let mut scaling = scenario_scaling(sc)?;
    let nu = scaling.nu[rho..].to_vec();

    let mut model = EnergyModel::build(sc.guess.order(), sc.period0, rho, sc.bounds.sigma())?;
    let mut q0 = model.initial_state(&sc.guess)?;
    q0.q[0] += sc.profile.predict(sc.initial.compute[0])? * sc.period0;
    let estimator = Estimator::new(sc.estimator.clone());
    let mut est = estimator.init(&model, q0)?;

    let truth = PowerTruth {
        series: sc.truth.clone(),
        period: sc.truth_period,
        profile: sc.profile.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);

    let mut pos = plan.start();
    let mut heading = {
        let (_, tangent) = plan.current_stage().path.project(pos);
        tangent.y.atan2(tangent.x)
    };
    let mut soc = BatteryState::new(sc.soc0);
    let mut c = sc.initial.clone();
    let mut u = vec![0.0; model.n()];

    let mut firings: Vec<f64> = Vec::new();
    // length of the stages already left behind
    let mut flown = 0.0;
    let mut periods = Vec::new();
    let mut drops = Vec::new();
    let mut next_event = 0;
    let (mut t_b, mut t_r, mut iters, mut infeasible) = (f64::NAN, f64::NAN, 0usize, false);
    let mut rows = Vec::new();

    let termination = 'flight: {
        for k in 0u64.. {
            let t = k as f64 * h;
            if adaptive && k % replan_every == 0 {
                // measured ground speed once a full block has been flown
                let speed = if firings.is_empty() || t <= 0.0 {
                    sc.ground_speed()
                } else {
                    let cur = plan.current_index();
                    let in_stage = plan.remaining_length_from(pos) - plan.remaining_length(cur + 1);
                    (flown + plan.current_stage().length() - in_stage) / t
                };
                let path_scaling = remaining_path_scaling(sc, &plan, pos, t, speed)?;
                scaling.nu[..rho].copy_from_slice(&path_scaling.nu);
                scaling.tau[..rho].copy_from_slice(&path_scaling.tau);
                let ctx = ReplanContext {
                    model: &model,
                    estimate: &est,
                    battery: &sc.battery,
                    soc,
                    bounds: &sc.bounds,
                    scaling: &scaling,
                    c_prev: &c,
                    elapsed: t,
                };
                // path parameters wait until the period has been measured
                let path_ready = firings.len() >= sc.warmup_periods;
                let d = replan_step(&ctx, if path_ready { Some(&mut plan) } else { None }, cfg)?;
                for (j, (new, old)) in d.compute.iter().zip(c.compute.iter_mut()).enumerate() {
                    u[rho + j] = model.input_for_shift(nu[j] * (new - *old), h);
                    *old = *new;
                }
                if path_ready {
                    c.path = d.path_params;
                }
                (t_b, t_r, iters, infeasible) = (d.t_b, d.t_r, d.solver_iters, d.infeasible);
            }

            let stage = plan.current_stage();
            (pos, heading) = follow_path(pos, heading, stage, sc.airspeed, sc.wind, h, sc.lookahead);
            let t_next = (k + 1) as f64 * h;
            let transition = plan.advance(pos);
            if let Transition::Advanced(i) = transition {
                flown += plan.stages()[i - 1].length();
                if plan.stages()[i].role == StageRole::SweepLine {
                    firings.push(t_next);
                    if let [.., a, b] = firings[..] {
                        let period = b - a;
                        let ratio = period / model.period();
                        model = model.with_period(period, &mut est.q_hat)?;
                        est.covariance *= ratio * ratio;
                        periods.push((t_next, period));
                    }
                }
            }

            let c2 = c.compute[0];
            let z = synth_power(&truth, t_next, c2, sc.noise_sigma, &mut rng)?;
            soc = step_soc(&sc.battery, soc, truth.load(t_next, c2)?, h)?;
            while let Some(ev) = sc.events.get(next_event).filter(|e| e.time <= t_next) {
                let before = soc.soc;
                soc = BatteryState::new(before - ev.drop);
                drops.push(AppliedDrop {
                    t: t_next,
                    drop: before - soc.soc,
                });
                next_event += 1;
            }
            est = estimator.predict(&model, &est, &u, h)?;
            est = estimator.update(&model, &est, z).0;
            u.iter_mut().for_each(|v| *v = 0.0);

            let done = match transition {
                Transition::Complete => Some(Termination::Completed),
                _ if soc.soc <= 0.0 => Some(Termination::BatteryExhausted),
                _ if t_next >= sc.max_time => Some(Termination::MaxTime),
                _ => None,
            };
            if (k + 1) % record_every == 0 || done.is_some() {
                rows.push(TelemetryRow {
                    t: t_next,
                    x: pos.x,
                    y: pos.y,
                    heading,
                    stage: plan.current_index(),
                    upsilon_w: z,
                    y_hat_w: est.y_hat,
                    soc: soc.soc,
                    c1: c.path[0],
                    c2,
                    t_b,
                    t_r,
                    solver_iters: iters,
                    infeasible,
                    q: est.q_hat.q.iter().copied().collect(),
                });
            }
            if let Some(done) = done {
                break 'flight done;
            }
        }
        unreachable!("flight loop only exits through a termination")
    };

    Ok(Telemetry {
        rows,
        termination,
        drops,
        soc_final: soc.soc,
        final_stage_count: plan.len(),
        periods,
        m: model.m(),
    })
}
