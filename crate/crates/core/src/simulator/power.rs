//! Synthetic power readings: a periodic flight load plus the computation load.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::compute_energy::{ComputeError, ComputeProfile};
use crate::energy_model::FourierSeries;

/// Ground-truth power source of a simulated flight.
#[derive(Debug, Clone)]
pub struct PowerTruth {
    pub series: FourierSeries,
    pub period: f64,
    pub profile: ComputeProfile,
}

impl PowerTruth {
    /// Noise-free load at time `t` with computation parameter `c2`.
    pub fn load(&self, t: f64, c2: f64) -> Result<f64, ComputeError> {
        Ok(self.series.eval(t, self.period) + self.profile.predict(c2)?)
    }
}

/// Power-sensor reading: true load plus Gaussian noise of standard deviation
/// `noise_sigma`. One normal draw is consumed per call whatever the sigma.
pub fn synth_power<R: Rng>(
    truth: &PowerTruth,
    t: f64,
    c2: f64,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<f64, ComputeError> {
    let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
    Ok(truth.load(t, c2)? + noise_sigma * z)
}
