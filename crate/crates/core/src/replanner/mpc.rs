//! Output MPC over the computation parameters.
//!
//! With the SoC frozen at its current value the power cap is constant over the
//! horizon, and each control only shifts `alpha_0`. The problem is then a
//! quadratic over a box intersected with one slab per step, solved by projected
//! gradient ascent with an Armijo line search.

use nalgebra::{DMatrix, DVector};

use crate::energy_model::EnergyModel;
use crate::params::Bound;

use super::ReplanError;

#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig {
    /// Horizon length `N`, seconds.
    pub horizon: f64,
    /// Step of the horizon grid, seconds.
    pub fine_step: f64,
    /// Period between re-planning calls, seconds.
    pub replan_step: f64,
    /// Stage state cost (m x m).
    pub q: DMatrix<f64>,
    /// Terminal state cost (m x m).
    pub q_f: DMatrix<f64>,
    /// Control cost over normalized parameters (n x n, path first).
    pub r: DMatrix<f64>,
    pub tolerance: f64,
    pub max_iters: usize,
    /// Longest time the drain horizon looks ahead, seconds.
    pub max_lookahead: f64,
}

impl MpcConfig {
    /// `Q = Q_f = 0`, `R = I`, 6 s horizon on a 0.01 s grid, re-planning every second.
    pub fn new(m: usize, n: usize) -> Self {
        Self {
            horizon: 6.0,
            fine_step: 0.01,
            replan_step: 1.0,
            q: DMatrix::zeros(m, m),
            q_f: DMatrix::zeros(m, m),
            r: DMatrix::identity(n, n),
            tolerance: 1e-6,
            max_iters: 500,
            max_lookahead: 7200.0,
        }
    }

    pub fn steps(&self) -> usize {
        ((self.horizon / self.fine_step).round() as usize).max(1)
    }

    pub fn validate(&self, m: usize, n: usize) -> Result<(), ReplanError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.horizon) && pos(self.fine_step) && pos(self.replan_step) && pos(self.tolerance)) {
            return Err(ReplanError::BadConfig(
                "horizon, steps and tolerance must be positive".into(),
            ));
        }
        if self.q.shape() != (m, m) || self.q_f.shape() != (m, m) || self.r.shape() != (n, n) {
            return Err(ReplanError::BadConfig(format!(
                "cost matrices must be {m}x{m}, {m}x{m}, {n}x{n}"
            )));
        }
        Ok(())
    }
}

/// Inputs of one schedule optimization.
#[derive(Debug, Clone)]
pub struct ScheduleProblem<'a> {
    pub model: &'a EnergyModel,
    /// Current state estimate.
    pub q_hat: &'a DVector<f64>,
    /// Power cap `b0 * Q_c * V`, watts.
    pub cap: f64,
    pub compute_bounds: &'a [Bound],
    /// Power slope of each computation parameter, watts per unit.
    pub nu: &'a [f64],
    /// Computation parameters in effect when the estimate was taken.
    pub c_prev: &'a [f64],
    pub cfg: &'a MpcConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// Computation parameters per horizon step, `steps x sigma`.
    pub traj: Vec<Vec<f64>>,
    /// Predicted output after each step.
    pub y_pred: Vec<f64>,
    /// State at the end of the horizon under `traj`.
    pub q_end: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Zero-input output and state along the horizon.
struct FreeResponse {
    y: Vec<f64>,
    /// `q' Q q` and `(Q q)_0` per step (stage cost), then for the terminal state.
    qq: Vec<(f64, f64)>,
    terminal: (f64, f64),
    q_end: DVector<f64>,
}

struct Prepared<'a> {
    p: &'a ScheduleProblem<'a>,
    k: usize,
    h: f64,
    free: FreeResponse,
    /// Slab `[lo, hi]` on `nu . c(k)` from the output constraint.
    slabs: Vec<(f64, f64)>,
    r_sigma: DMatrix<f64>,
    q00: f64,
    qf00: f64,
}

impl<'a> Prepared<'a> {
    fn new(p: &'a ScheduleProblem<'a>) -> Self {
        let k = p.cfg.steps();
        let h = p.cfg.fine_step;
        let model = p.model;
        let sigma = p.nu.len();
        let mut q = p.q_hat.clone();
        let mut free = FreeResponse {
            y: Vec::with_capacity(k),
            qq: Vec::with_capacity(k),
            terminal: (0.0, 0.0),
            q_end: q.clone(),
        };
        let phi = model.transition(h);
        let quad = |mat: &DMatrix<f64>, q: &DVector<f64>| -> (f64, f64) {
            if mat.iter().all(|v| *v == 0.0) {
                return (0.0, 0.0);
            }
            let mq = mat * q;
            (q.dot(&mq), mq[0])
        };
        for _ in 0..k {
            q = &phi * &q;
            free.y.push((model.c() * &q)[(0, 0)]);
            free.qq.push(quad(&p.cfg.q, &q));
        }
        free.terminal = quad(&p.cfg.q_f, &q);
        free.q_end = q;
        let shift_prev: f64 = p.nu.iter().zip(p.c_prev).map(|(n, c)| n * c).sum();
        let slabs = free
            .y
            .iter()
            .map(|y| (shift_prev - y, p.cap - y + shift_prev))
            .collect();
        let rho = p.cfg.r.nrows() - sigma;
        let r_sigma = p.cfg.r.view((rho, rho), (sigma, sigma)).into_owned();
        Self {
            p,
            k,
            h,
            free,
            slabs,
            r_sigma,
            q00: p.cfg.q[(0, 0)],
            qf00: p.cfg.q_f[(0, 0)],
        }
    }

    fn sigma(&self) -> usize {
        self.p.nu.len()
    }

    fn delta(&self, c: &[f64]) -> f64 {
        self.p
            .nu
            .iter()
            .zip(c.iter().zip(self.p.c_prev))
            .map(|(n, (c, c0))| n * (c - c0))
            .sum()
    }

    fn normalized(&self, c: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            c.len(),
            c.iter().zip(self.p.compute_bounds).map(|(v, b)| b.normalize(*v)),
        )
    }

    /// `h * sum_k (q'Qq + c~'Rc~) + q(K)' Q_f q(K)`.
    fn objective(&self, traj: &[Vec<f64>]) -> f64 {
        let t = self.p.model.period();
        let mut j = 0.0;
        for (k, c) in traj.iter().enumerate() {
            let d = t * self.delta(c);
            let (qq, q0) = self.free.qq[k];
            let ct = self.normalized(c);
            j += self.h * (qq + 2.0 * d * q0 + d * d * self.q00 + ct.dot(&(&self.r_sigma * &ct)));
        }
        let d = t * self.delta(&traj[self.k - 1]);
        let (qq, q0) = self.free.terminal;
        j + qq + 2.0 * d * q0 + d * d * self.qf00
    }

    fn gradient(&self, traj: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let t = self.p.model.period();
        traj.iter()
            .enumerate()
            .map(|(k, c)| {
                let d = t * self.delta(c);
                let mut state_term = self.h * 2.0 * t * (self.free.qq[k].1 + d * self.q00);
                if k == self.k - 1 {
                    state_term += 2.0 * t * (self.free.terminal.1 + d * self.qf00);
                }
                let rc = &self.r_sigma * self.normalized(c);
                (0..self.sigma())
                    .map(|i| {
                        let w = self.p.compute_bounds[i].width();
                        let control = if w > 0.0 { self.h * 2.0 * rc[i] / w } else { 0.0 };
                        state_term * self.p.nu[i] + control
                    })
                    .collect()
            })
            .collect()
    }

    /// Projection onto the box intersected with the slab of step `k`.
    fn project(&self, k: usize, z: &[f64]) -> Vec<f64> {
        let b = self.p.compute_bounds;
        let nu = self.p.nu;
        let clamp_at = |lambda: f64| -> Vec<f64> {
            z.iter()
                .zip(nu)
                .zip(b)
                .map(|((z, n), b)| b.clamp(z - lambda * n))
                .collect()
        };
        let dot = |c: &[f64]| -> f64 { c.iter().zip(nu).map(|(c, n)| c * n).sum() };
        let (lo, hi) = self.slabs[k];
        let c0 = clamp_at(0.0);
        let s0 = dot(&c0);
        let target = if s0 > hi {
            hi
        } else if s0 < lo {
            lo
        } else {
            return c0;
        };
        // nu . clamp(z - lambda nu) is non-increasing in lambda
        let dir = if s0 > target { 1.0 } else { -1.0 };
        let mut a = 0.0;
        let mut bnd = 1.0;
        for _ in 0..200 {
            if (dot(&clamp_at(dir * bnd)) - target) * dir <= 0.0 {
                break;
            }
            a = bnd;
            bnd *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + bnd);
            if (dot(&clamp_at(dir * mid)) - target) * dir > 0.0 {
                a = mid;
            } else {
                bnd = mid;
            }
        }
        clamp_at(dir * bnd)
    }

    fn check_feasible(&self) -> Result<(), ReplanError> {
        let tol = self.p.cfg.tolerance * self.p.cap.abs().max(1.0);
        let (mut smin, mut smax) = (0.0, 0.0);
        for (n, b) in self.p.nu.iter().zip(self.p.compute_bounds) {
            smin += (n * b.lo).min(n * b.hi);
            smax += (n * b.lo).max(n * b.hi);
        }
        for (k, &(lo, hi)) in self.slabs.iter().enumerate() {
            if smin > hi + tol || smax < lo - tol {
                return Err(ReplanError::Infeasible {
                    step: k,
                    cap: self.p.cap,
                    min_power: smin - lo,
                });
            }
        }
        Ok(())
    }
}

/// Maximizes the schedule objective subject to box bounds and the output cap.
pub fn solve_schedule_mpc(p: &ScheduleProblem) -> Result<Schedule, ReplanError> {
    let sigma = p.nu.len();
    if p.c_prev.len() != sigma || p.compute_bounds.len() != sigma {
        return Err(ReplanError::LengthMismatch {
            expected: sigma,
            got: p.c_prev.len(),
        });
    }
    p.cfg.validate(p.model.m(), p.cfg.r.nrows())?;
    if p.cfg.r.nrows() < sigma {
        return Err(ReplanError::BadConfig(
            "R smaller than the number of computation parameters".into(),
        ));
    }
    let prep = Prepared::new(p);
    prep.check_feasible()?;

    let upper: Vec<f64> = p.compute_bounds.iter().map(|b| b.hi).collect();
    let mut traj: Vec<Vec<f64>> = (0..prep.k).map(|k| prep.project(k, &upper)).collect();
    let mut j = prep.objective(&traj);
    let min_width = p
        .compute_bounds
        .iter()
        .map(|b| b.width())
        .filter(|w| *w > 0.0)
        .fold(f64::INFINITY, f64::min);
    let mut iterations = 0;
    let mut converged = sigma == 0 || !min_width.is_finite();
    while !converged {
        if iterations == p.cfg.max_iters {
            return Err(ReplanError::SolverFailure { iterations });
        }
        iterations += 1;
        let g = prep.gradient(&traj);
        let gmax = g.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        if gmax == 0.0 {
            break;
        }
        let mut alpha = min_width / gmax;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<Vec<f64>> = traj
                .iter()
                .zip(&g)
                .enumerate()
                .map(|(k, (c, gk))| {
                    let z: Vec<f64> = c.iter().zip(gk).map(|(c, g)| c + alpha * g).collect();
                    prep.project(k, &z)
                })
                .collect();
            let ascent: f64 = cand
                .iter()
                .flatten()
                .zip(traj.iter().flatten())
                .zip(g.iter().flatten())
                .map(|((n, o), g)| g * (n - o))
                .sum();
            let jc = prep.objective(&cand);
            if jc >= j + 1e-4 * ascent {
                accepted = Some((cand, jc));
                break;
            }
            alpha *= 0.5;
        }
        let Some((cand, jc)) = accepted else {
            break;
        };
        let step = cand
            .iter()
            .flatten()
            .zip(traj.iter().flatten())
            .zip(p.compute_bounds.iter().cycle())
            .map(|((n, o), b)| {
                if b.width() > 0.0 {
                    (n - o).abs() / b.width()
                } else {
                    0.0
                }
            })
            .fold(0.0f64, f64::max);
        traj = cand;
        j = jc;
        converged = step <= p.cfg.tolerance;
    }

    let y_pred = traj.iter().zip(&prep.free.y).map(|(c, y)| y + prep.delta(c)).collect();
    let mut q_end = prep.free.q_end.clone();
    if let Some(last) = traj.last() {
        q_end[0] += p.model.period() * prep.delta(last);
    }
    Ok(Schedule {
        traj,
        y_pred,
        q_end,
        objective: j,
        iterations,
    })
}

/// Nearest integer configuration to `c` that keeps the predicted output under the
/// cap, stepping down toward the lower bounds when rounding overshoots.
pub fn round_to_feasible(c: &[f64], bounds: &[Bound], nu: &[f64], y_free: f64, c_prev: &[f64], cap: f64) -> Vec<f64> {
    let power = |v: &[f64]| -> f64 {
        y_free
            + v.iter()
                .zip(nu.iter().zip(c_prev))
                .map(|(v, (n, p))| n * (v - p))
                .sum::<f64>()
    };
    let mut out: Vec<f64> = c.iter().zip(bounds).map(|(v, b)| b.clamp(v.round())).collect();
    if power(&out) <= cap {
        return out;
    }
    out = c.iter().zip(bounds).map(|(v, b)| b.clamp(v.floor())).collect();
    // lower the most power-hungry entry first until the cap holds
    while power(&out) > cap {
        let pick = (0..out.len())
            .filter(|&i| out[i] > bounds[i].lo && nu[i] > 0.0)
            .max_by(|&a, &b| nu[a].total_cmp(&nu[b]));
        match pick {
            Some(i) => out[i] = (out[i] - 1.0).max(bounds[i].lo),
            None => break,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy_model::FourierSeries;

    fn model() -> (EnergyModel, DVector<f64>) {
        let m = EnergyModel::build(3, 20.0, 1, 1).unwrap();
        let s = FourierSeries::new(vec![60.0 * 20.0, 30.0, -10.0, 5.0], vec![20.0, 4.0, -2.0]).unwrap();
        let q = m.initial_state(&s).unwrap().q;
        (m, q)
    }

    fn solve(cap: f64, c_prev: f64, cfg: &MpcConfig) -> Result<Schedule, ReplanError> {
        let (m, q) = model();
        let bounds = [Bound::new(2.0, 10.0).unwrap()];
        let p = ScheduleProblem {
            model: &m,
            q_hat: &q,
            cap,
            compute_bounds: &bounds,
            nu: &[0.625],
            c_prev: &[c_prev],
            cfg,
        };
        solve_schedule_mpc(&p)
    }

    #[test]
    fn generous_cap_saturates_upper_bound() {
        let cfg = MpcConfig::new(7, 2);
        let s = solve(1000.0, 2.0, &cfg).unwrap();
        assert!(s.traj.iter().all(|c| (c[0] - 10.0).abs() < 1e-12));
        assert_eq!(s.traj.len(), 600);
    }

    #[test]
    fn tight_cap_is_tracked() {
        let cfg = MpcConfig::new(7, 2);
        let free = solve(1000.0, 6.0, &cfg).unwrap();
        let peak = free.y_pred.iter().fold(f64::MIN, |a, b| a.max(*b));
        let low = free.y_pred.iter().fold(f64::MAX, |a, b| a.min(*b));
        let cap = peak - 0.3 * (peak - low);
        let s = solve(cap, 6.0, &cfg).unwrap();
        for (c, y) in s.traj.iter().zip(&s.y_pred) {
            assert!(*y <= cap + 1e-6);
            assert!((2.0..=10.0).contains(&c[0]));
        }
        // where the cap binds the parameter sits on it, elsewhere at the top
        assert!(s.traj.iter().any(|c| c[0] < 10.0));
        assert!(s.traj.iter().any(|c| c[0] == 10.0));
    }

    #[test]
    fn cap_below_minimum_is_infeasible() {
        let cfg = MpcConfig::new(7, 2);
        assert!(matches!(solve(20.0, 2.0, &cfg), Err(ReplanError::Infeasible { .. })));
    }

    #[test]
    fn quadratic_state_cost_is_handled() {
        let mut cfg = MpcConfig::new(7, 2);
        cfg.horizon = 0.05;
        cfg.q[(0, 0)] = 1e-9;
        let s = solve(1000.0, 2.0, &cfg).unwrap();
        assert!(s.iterations >= 1);
        assert!(s.traj.iter().all(|c| (2.0..=10.0).contains(&c[0])));
    }

    #[test]
    fn rounding_respects_cap() {
        let b = [Bound::new(2.0, 10.0).unwrap()];
        assert_eq!(round_to_feasible(&[6.4], &b, &[1.0], 50.0, &[6.0], 100.0), vec![6.0]);
        assert_eq!(round_to_feasible(&[6.6], &b, &[1.0], 50.0, &[6.0], 100.0), vec![7.0]);
        // 7 would exceed the cap by 0.4 W; 6 fits
        assert_eq!(round_to_feasible(&[6.6], &b, &[1.0], 50.0, &[6.0], 50.6), vec![6.0]);
        assert_eq!(round_to_feasible(&[2.2], &b, &[1.0], 50.0, &[6.0], 0.0), vec![2.0]);
    }
}
