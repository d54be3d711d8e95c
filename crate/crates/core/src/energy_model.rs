//! Harmonic state-space model of the robot's total power draw.
//!
//! The state holds a constant term and `r` harmonic pairs. Between parameter
//! changes every pair rotates at its own frequency `j * omega`; a parameter change
//! moves only the constant term.

use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::params::{Bound, ParamVector};

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("model order must be at least 1, got {0}")]
    InvalidOrder(usize),
    #[error("period must be finite and positive, got {0}")]
    InvalidPeriod(f64),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("bound [{lo}, {hi}] has zero width")]
    DegenerateBounds { lo: f64, hi: f64 },
    #[error("coverage times must satisfy 0 < t_lower <= t_upper, got {t_lower} and {t_upper}")]
    InvalidTimes { t_lower: f64, t_upper: f64 },
    #[error("compute predictor undefined at {0}")]
    PredictorUndefined(f64),
}

/// Fourier coefficients `a_0..a_r` and `b_1..b_r` of
/// `h(t) = a_0 / T + (2 / T) * sum_j (a_j cos(j w t) + b_j sin(j w t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl FourierSeries {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self, EnergyError> {
        if a.len() < 2 {
            return Err(EnergyError::InvalidOrder(a.len().saturating_sub(1)));
        }
        if b.len() + 1 != a.len() {
            return Err(EnergyError::LengthMismatch {
                expected: a.len() - 1,
                got: b.len(),
            });
        }
        Ok(Self { a, b })
    }

    pub fn order(&self) -> usize {
        self.b.len()
    }

    pub fn eval(&self, t: f64, period: f64) -> f64 {
        let w = TAU / period;
        let harmonics: f64 = self
            .b
            .iter()
            .enumerate()
            .map(|(i, &bj)| {
                let j = (i + 1) as f64;
                self.a[i + 1] * (w * j * t).cos() + bj * (w * j * t).sin()
            })
            .sum();
        self.a[0] / period + 2.0 / period * harmonics
    }

    /// Mean of the series over one period.
    pub fn mean(&self, period: f64) -> f64 {
        self.a[0] / period
    }
}

/// State `(alpha_0, alpha_1, beta_1, .., alpha_r, beta_r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyState {
    pub q: DVector<f64>,
}

impl EnergyState {
    pub fn zeros(m: usize) -> Self {
        Self { q: DVector::zeros(m) }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Norm of harmonic pair `j` (1-based).
    pub fn pair_norm(&self, j: usize) -> f64 {
        self.q[2 * j - 1].hypot(self.q[2 * j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    order: usize,
    period: f64,
    rho: usize,
    sigma: usize,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl EnergyModel {
    /// Builds `A`, `B` and `C` for order `r`, period `T`, `rho` path and `sigma`
    /// computation parameters.
    pub fn build(order: usize, period: f64, rho: usize, sigma: usize) -> Result<Self, EnergyError> {
        if order == 0 {
            return Err(EnergyError::InvalidOrder(order));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(EnergyError::InvalidPeriod(period));
        }
        let m = 2 * order + 1;
        let w = TAU / period;
        let mut a = DMatrix::zeros(m, m);
        let mut c = DMatrix::zeros(1, m);
        c[(0, 0)] = 1.0 / period;
        for j in 1..=order {
            let (i, k) = (2 * j - 1, 2 * j);
            a[(i, k)] = w * j as f64;
            a[(k, i)] = -w * j as f64;
            c[(0, i)] = 1.0 / period;
        }
        let mut b = DMatrix::zeros(m, rho + sigma);
        for col in rho..rho + sigma {
            b[(0, col)] = 1.0;
        }
        Ok(Self {
            order,
            period,
            rho,
            sigma,
            a,
            b,
            c,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn m(&self) -> usize {
        2 * self.order + 1
    }

    pub fn n(&self) -> usize {
        self.rho + self.sigma
    }

    pub fn rho(&self) -> usize {
        self.rho
    }

    pub fn sigma(&self) -> usize {
        self.sigma
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn omega(&self) -> f64 {
        TAU / self.period
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// Initial state reproducing `series` through `y = C q` with zero input.
    ///
    /// `C` weighs each cosine coefficient by `1 / T` while the series weighs it by
    /// `2 / T`, so harmonic coefficients enter the state doubled.
    pub fn initial_state(&self, series: &FourierSeries) -> Result<EnergyState, EnergyError> {
        if series.order() != self.order {
            return Err(EnergyError::LengthMismatch {
                expected: self.order,
                got: series.order(),
            });
        }
        let mut q = DVector::zeros(self.m());
        q[0] = series.a[0];
        for j in 1..=self.order {
            q[2 * j - 1] = 2.0 * series.a[j];
            q[2 * j] = 2.0 * series.b[j - 1];
        }
        Ok(EnergyState { q })
    }

    /// Discrete transition `exp(A h)`: identity on `alpha_0`, a rotation by
    /// `j w h` on every harmonic pair.
    pub fn transition(&self, h: f64) -> DMatrix<f64> {
        let mut phi = DMatrix::identity(self.m(), self.m());
        for j in 1..=self.order {
            let (i, k) = (2 * j - 1, 2 * j);
            let (s, c) = (self.omega() * j as f64 * h).sin_cos();
            phi[(i, i)] = c;
            phi[(i, k)] = s;
            phi[(k, i)] = -s;
            phi[(k, k)] = c;
        }
        phi
    }

    /// Advances `q` by `h` seconds with input `u` held over the step.
    pub fn step(&self, q: &EnergyState, u: &[f64], h: f64) -> Result<EnergyState, EnergyError> {
        if u.len() != self.n() {
            return Err(EnergyError::LengthMismatch {
                expected: self.n(),
                got: u.len(),
            });
        }
        let mut next = q.q.clone();
        for j in 1..=self.order {
            let (i, k) = (2 * j - 1, 2 * j);
            let (s, c) = (self.omega() * j as f64 * h).sin_cos();
            let (al, be) = (q.q[i], q.q[k]);
            next[i] = c * al + s * be;
            next[k] = -s * al + c * be;
        }
        next[0] += u[self.rho..].iter().sum::<f64>() * h;
        Ok(EnergyState { q: next })
    }

    /// `y = C q` in watts.
    pub fn output(&self, q: &EnergyState) -> f64 {
        (&self.c * &q.q)[(0, 0)]
    }

    /// Input held for one step of length `h` that shifts the output by `watts`.
    pub fn input_for_shift(&self, watts: f64, h: f64) -> f64 {
        watts * self.period / h
    }

    /// Same model with a new period; `q` is rescaled so the output is unchanged.
    pub fn with_period(&self, period: f64, q: &mut EnergyState) -> Result<Self, EnergyError> {
        let next = Self::build(self.order, period, self.rho, self.sigma)?;
        q.q *= period / self.period;
        Ok(next)
    }

    /// Writes `A`, `B` and `C` as `matrix,row,col,value` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["matrix", "row", "col", "value"])?;
        for (name, mat) in [("A", &self.a), ("B", &self.b), ("C", &self.c)] {
            for r in 0..mat.nrows() {
                for c in 0..mat.ncols() {
                    w.write_record([name.to_string(), r.to_string(), c.to_string(), mat[(r, c)].to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Affine maps `c -> nu * c + tau` from parameters to time (path) or watts (compute).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFactors {
    pub nu: Vec<f64>,
    pub tau: Vec<f64>,
}

impl ScalingFactors {
    /// Joins path and compute slices into one `[path.., compute..]` set.
    pub fn concat(path: ScalingFactors, compute: ScalingFactors) -> ScalingFactors {
        let mut nu = path.nu;
        nu.extend(compute.nu);
        let mut tau = path.tau;
        tau.extend(compute.tau);
        ScalingFactors { nu, tau }
    }

    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        c.iter()
            .zip(self.nu.iter().zip(&self.tau))
            .map(|(c, (nu, tau))| nu * c + tau)
            .collect()
    }
}

/// Time scaling for path parameters. `t_lower` is the coverage time with every
/// path parameter at its lower bound, `t_upper` the time at the upper bounds; the
/// map sends `c_lo -> t_lower / rho` and `c_hi -> t_upper / rho`.
pub fn scale_path(bounds: &[Bound], t_lower: f64, t_upper: f64) -> Result<ScalingFactors, EnergyError> {
    if !(t_lower > 0.0 && t_upper >= t_lower && t_upper.is_finite()) {
        return Err(EnergyError::InvalidTimes { t_lower, t_upper });
    }
    let rho = bounds.len() as f64;
    let mut out = ScalingFactors {
        nu: Vec::new(),
        tau: Vec::new(),
    };
    for b in bounds {
        let width = b.hi - b.lo;
        if width <= 0.0 {
            return Err(EnergyError::DegenerateBounds { lo: b.lo, hi: b.hi });
        }
        out.nu.push((t_upper - t_lower) / width / rho);
        out.tau.push((b.lo * (t_lower - t_upper) / width + t_lower) / rho);
    }
    Ok(out)
}

/// Power scaling for computation parameters from a predictor `g`.
pub fn scale_compute(bounds: &[Bound], g: impl Fn(f64) -> Option<f64>) -> Result<ScalingFactors, EnergyError> {
    let mut out = ScalingFactors {
        nu: Vec::new(),
        tau: Vec::new(),
    };
    for b in bounds {
        let width = b.hi - b.lo;
        if width <= 0.0 {
            return Err(EnergyError::DegenerateBounds { lo: b.lo, hi: b.hi });
        }
        let g_lo = g(b.lo).ok_or(EnergyError::PredictorUndefined(b.lo))?;
        let g_hi = g(b.hi).ok_or(EnergyError::PredictorUndefined(b.hi))?;
        out.nu.push((g_hi - g_lo) / width);
        out.tau.push(b.lo * (g_lo - g_hi) / width + g_lo);
    }
    Ok(out)
}

/// `u = diag(nu) (c_now - c_prev)`.
pub fn control_input(c_prev: &ParamVector, c_now: &ParamVector, s: &ScalingFactors) -> Result<Vec<f64>, EnergyError> {
    let n = s.len();
    for got in [c_prev.len(), c_now.len()] {
        if got != n {
            return Err(EnergyError::LengthMismatch { expected: n, got });
        }
    }
    Ok(c_now
        .iter()
        .zip(c_prev.iter())
        .zip(&s.nu)
        .map(|((a, b), nu)| nu * (a - b))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn build_first_order() {
        let m = EnergyModel::build(1, TAU, 0, 1).unwrap();
        let expected_a = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0]);
        assert_relative_eq!(m.a(), &expected_a, epsilon = 1e-15);
        let k = 1.0 / TAU;
        assert_eq!(m.c().as_slice(), &[k, k, 0.0]);
        assert_eq!(m.b().as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(EnergyModel::build(3, 10.0, 1, 1).unwrap().m(), 7);
        assert_eq!(EnergyModel::build(0, 1.0, 1, 1), Err(EnergyError::InvalidOrder(0)));
        assert!(matches!(
            EnergyModel::build(1, 0.0, 1, 1),
            Err(EnergyError::InvalidPeriod(_))
        ));
    }

    #[test]
    fn b_has_ones_only_under_compute_columns() {
        let m = EnergyModel::build(2, 5.0, 1, 2).unwrap();
        assert_eq!(m.b().row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 1.0]);
        assert_eq!(m.b().rows(1, 4).iter().filter(|v| **v != 0.0).count(), 0);
    }

    #[test]
    fn initial_state_layout() {
        let m = EnergyModel::build(1, 4.0, 0, 1).unwrap();
        let s = FourierSeries::new(vec![2.0, 4.0], vec![6.0]).unwrap();
        let q = m.initial_state(&s).unwrap();
        assert_eq!(q.q.as_slice(), &[2.0, 8.0, 12.0]);
        // at t = 0 the series is a0/T + 2 a1/T
        assert_relative_eq!(m.output(&q), s.eval(0.0, 4.0), epsilon = 1e-15);
        assert_eq!(m.output(&EnergyState::zeros(3)), 0.0);
        let bad = FourierSeries::new(vec![1.0, 1.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(m.initial_state(&bad).is_err());
    }

    #[test]
    fn full_period_returns_to_start() {
        let m = EnergyModel::build(3, 7.3, 1, 1).unwrap();
        let s = FourierSeries::new(vec![50.0, 3.0, -1.0, 0.5], vec![2.0, 0.2, -0.7]).unwrap();
        let q0 = m.initial_state(&s).unwrap();
        let steps = 730;
        let h = 7.3 / steps as f64;
        let mut q = q0.clone();
        for _ in 0..steps {
            q = m.step(&q, &[0.0, 0.0], h).unwrap();
        }
        for i in 0..q.len() {
            assert!((q.q[i] - q0.q[i]).abs() <= 1e-9 * q0.q.amax());
        }
    }

    #[test]
    fn compute_input_moves_only_alpha0() {
        let m = EnergyModel::build(2, 3.0, 1, 1).unwrap();
        let q = EnergyState {
            q: DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 0.0]),
        };
        let next = m.step(&q, &[100.0, 2.5], 0.01).unwrap();
        assert_relative_eq!(next.q[0], 1.0 + 2.5 * 0.01, epsilon = 1e-15);
        assert!(next.q.rows(1, 4).iter().all(|v| *v == 0.0));
        // a held input for one step shifts the output by the requested watts
        let u = m.input_for_shift(5.0, 0.01);
        let shifted = m.step(&q, &[0.0, u], 0.01).unwrap();
        assert_relative_eq!(m.output(&shifted) - m.output(&q), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn period_change_keeps_output() {
        let m = EnergyModel::build(3, 10.0, 1, 1).unwrap();
        let s = FourierSeries::new(vec![500.0, 3.0, -1.0, 0.5], vec![2.0, 0.2, -0.7]).unwrap();
        let mut q = m.initial_state(&s).unwrap();
        let y = m.output(&q);
        let m2 = m.with_period(12.5, &mut q).unwrap();
        assert_relative_eq!(m2.output(&q), y, epsilon = 1e-12);
    }

    #[test]
    fn path_scaling_example() {
        let b = [Bound::new(-1000.0, 0.0).unwrap()];
        let s = scale_path(&b, 300.0, 360.0).unwrap();
        assert_relative_eq!(s.nu[0], 0.06, epsilon = 1e-15);
        assert_relative_eq!(s.tau[0], 360.0, epsilon = 1e-12);
        let b0 = [Bound::new(0.0, 10.0).unwrap()];
        assert_eq!(scale_path(&b0, 300.0, 360.0).unwrap().tau[0], 300.0);
        assert!(matches!(
            scale_path(&[Bound::new(1.0, 1.0).unwrap()], 1.0, 2.0),
            Err(EnergyError::DegenerateBounds { .. })
        ));
    }

    #[test]
    fn compute_scaling_example() {
        let b = [Bound::new(2.0, 10.0).unwrap()];
        let g = |c: f64| Some(if c == 2.0 { 4.0 } else { 9.0 });
        let s = scale_compute(&b, g).unwrap();
        assert_relative_eq!(s.nu[0], 0.625, epsilon = 1e-15);
        assert_relative_eq!(s.tau[0], 2.75, epsilon = 1e-15);
        assert_relative_eq!(s.apply(&[2.0])[0], 4.0, epsilon = 1e-12);
        assert_relative_eq!(s.apply(&[10.0])[0], 9.0, epsilon = 1e-12);
        let flat = scale_compute(&b, |_| Some(3.0)).unwrap();
        assert_eq!((flat.nu[0], flat.tau[0]), (0.0, 3.0));
        assert_eq!(scale_compute(&b, |_| None), Err(EnergyError::PredictorUndefined(2.0)));
    }

    #[test]
    fn control_input_example() {
        let s = ScalingFactors {
            nu: vec![0.06, 0.625],
            tau: vec![360.0, 2.75],
        };
        let prev = ParamVector::new(vec![0.0], vec![2.0]);
        let now = ParamVector::new(vec![0.0], vec![10.0]);
        assert_eq!(control_input(&prev, &now, &s).unwrap(), vec![0.0, 5.0]);
        assert_eq!(control_input(&now, &now, &s).unwrap(), vec![0.0, 0.0]);
        let short = ParamVector::new(vec![], vec![2.0]);
        assert!(control_input(&short, &now, &s).is_err());
    }

    proptest! {
        #[test]
        fn pair_norms_conserved(
            coeffs in proptest::collection::vec(-10.0f64..10.0, 7),
            inputs in proptest::collection::vec(-100.0f64..100.0, 1..200),
            h in 0.001f64..0.5,
        ) {
            let m = EnergyModel::build(3, 9.0, 1, 1).unwrap();
            let mut q = EnergyState { q: DVector::from_vec(coeffs) };
            let norms: Vec<f64> = (1..=3).map(|j| q.pair_norm(j)).collect();
            for u in inputs {
                q = m.step(&q, &[u, u], h).unwrap();
            }
            for j in 1..=3 {
                prop_assert!((q.pair_norm(j) - norms[j - 1]).abs() <= 1e-9 * norms[j - 1].max(1.0));
            }
        }

        #[test]
        fn control_input_translation_invariant(
            a in -100.0f64..100.0, b in -100.0f64..100.0, k in -50.0f64..50.0,
        ) {
            let s = ScalingFactors { nu: vec![0.06, 0.625], tau: vec![360.0, 2.75] };
            let u1 = control_input(&ParamVector::new(vec![a], vec![b]), &ParamVector::new(vec![b], vec![a]), &s).unwrap();
            let u2 = control_input(
                &ParamVector::new(vec![a + k], vec![b + k]),
                &ParamVector::new(vec![b + k], vec![a + k]),
                &s,
            ).unwrap();
            for (x, y) in u1.iter().zip(&u2) {
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }

        #[test]
        fn zero_input_matches_series(
            coeffs in proptest::collection::vec(-5.0f64..5.0, 6),
            a0 in 10.0f64..100.0,
            period in 1.0f64..50.0,
        ) {
            let m = EnergyModel::build(3, period, 0, 1).unwrap();
            let s = FourierSeries::new(vec![a0, coeffs[0], coeffs[1], coeffs[2]], coeffs[3..].to_vec()).unwrap();
            let q0 = m.initial_state(&s).unwrap();
            for k in [0usize, 17, 250, 999] {
                let t = period * k as f64 / 1000.0;
                let q = m.step(&q0, &[0.0], t).unwrap();
                let (y, h) = (m.output(&q), s.eval(t, period));
                prop_assert!((y - h).abs() <= 1e-9 * h.abs().max(1.0));
            }
        }
    }
}
