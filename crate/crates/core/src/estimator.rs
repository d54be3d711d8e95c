//! Kalman filter over the energy model with the scalar power reading as measurement.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::energy_model::{EnergyError, EnergyModel, EnergyState};

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("{name} must be {m}x{m}")]
    BadShape { name: &'static str, m: usize },
    #[error("{0} must be symmetric with a non-negative diagonal")]
    NotCovariance(&'static str),
    #[error("measurement noise must be positive, got {0}")]
    BadMeasurementNoise(f64),
    #[error(transparent)]
    Model(#[from] EnergyError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Process noise density; the per-step covariance is `Q * h`.
    pub process_noise: DMatrix<f64>,
    /// Variance of the power reading, watts squared.
    pub measurement_noise: f64,
    pub initial_covariance: DMatrix<f64>,
}

impl EstimatorConfig {
    pub fn new(
        process_noise: DMatrix<f64>,
        measurement_noise: f64,
        initial_covariance: DMatrix<f64>,
    ) -> Result<Self, EstimatorError> {
        let m = process_noise.nrows();
        for (name, mat) in [
            ("process_noise", &process_noise),
            ("initial_covariance", &initial_covariance),
        ] {
            if mat.nrows() != m || mat.ncols() != m {
                return Err(EstimatorError::BadShape { name, m });
            }
            let sym = (mat - mat.transpose()).amax() <= 1e-12 * mat.amax().max(1.0);
            if !sym || mat.diagonal().iter().any(|v| *v < 0.0) {
                return Err(EstimatorError::NotCovariance(name));
            }
        }
        if !(measurement_noise > 0.0) {
            return Err(EstimatorError::BadMeasurementNoise(measurement_noise));
        }
        Ok(Self {
            process_noise,
            measurement_noise,
            initial_covariance,
        })
    }

    /// Defaults scaled to a signal of mean power `mean_w` over period `period`:
    /// state entries are of order `mean_w * period`, readings carry 1% noise.
    pub fn scaled(m: usize, mean_w: f64, period: f64, process_scale: f64) -> Self {
        let s = (mean_w * period).abs().max(1e-9);
        Self {
            process_noise: DMatrix::identity(m, m) * (process_scale * s * s),
            measurement_noise: (0.01 * mean_w).powi(2).max(1e-12),
            initial_covariance: DMatrix::identity(m, m) * (s * s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub q_hat: EnergyState,
    pub covariance: DMatrix<f64>,
    pub y_hat: f64,
}

#[derive(Debug, Clone)]
pub struct Estimator {
    pub config: EstimatorConfig,
}

impl Estimator {
    pub fn new(config: EstimatorConfig) -> Self {
        Self { config }
    }

    pub fn init(&self, model: &EnergyModel, q0: EnergyState) -> Result<Estimate, EstimatorError> {
        let m = model.m();
        if self.config.initial_covariance.nrows() != m {
            return Err(EstimatorError::BadShape {
                name: "initial_covariance",
                m,
            });
        }
        Ok(Estimate {
            y_hat: model.output(&q0),
            q_hat: q0,
            covariance: self.config.initial_covariance.clone(),
        })
    }

    /// Time update: exact rotation of the state, `P = Phi P Phi' + Q h`.
    pub fn predict(&self, model: &EnergyModel, est: &Estimate, u: &[f64], h: f64) -> Result<Estimate, EstimatorError> {
        let q_hat = model.step(&est.q_hat, u, h)?;
        let phi = model.transition(h);
        let covariance = &phi * &est.covariance * phi.transpose() + &self.config.process_noise * h;
        Ok(Estimate {
            y_hat: model.output(&q_hat),
            q_hat,
            covariance,
        })
    }

    /// Measurement update with `H = C` in Joseph form. Returns the posterior and
    /// the innovation `z - C q_prior`.
    pub fn update(&self, model: &EnergyModel, est: &Estimate, z: f64) -> (Estimate, f64) {
        let innovation = z - model.output(&est.q_hat);
        let r = self.config.measurement_noise;
        if !r.is_finite() || !innovation.is_finite() {
            return (est.clone(), innovation);
        }
        let h = model.c();
        let ph = &est.covariance * h.transpose();
        let s = (h * &ph)[(0, 0)] + r;
        let k = ph / s;
        let q = &est.q_hat.q + &k * innovation;
        let m = q.len();
        let ikh = DMatrix::identity(m, m) - &k * h;
        let p = &ikh * &est.covariance * ikh.transpose() + &k * k.transpose() * r;
        // keep exact symmetry
        let p = (&p + p.transpose()) * 0.5;
        let q_hat = EnergyState { q };
        (
            Estimate {
                y_hat: model.output(&q_hat),
                q_hat,
                covariance: p,
            },
            innovation,
        )
    }

    /// Variance of the predicted output, `C P C'`.
    pub fn output_variance(model: &EnergyModel, est: &Estimate) -> f64 {
        (model.c() * &est.covariance * model.c().transpose())[(0, 0)]
    }
}
