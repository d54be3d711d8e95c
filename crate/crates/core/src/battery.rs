//! Rint equivalent-circuit battery: an ideal source `V` behind a resistor `R_r`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BatteryError {
    #[error("battery parameter {name} = {value} must be finite and positive")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("load {load} W exceeds deliverable power {max} W")]
    InfeasibleLoad { load: f64, max: f64 },
    #[error("negative load {0} W")]
    NegativeLoad(f64),
    #[error("voltage table must be sorted by SoC with at least 2 rows")]
    BadVoltageTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryParams {
    /// Internal (open-circuit) voltage, volts.
    pub v: f64,
    /// Load-side supply voltage, volts. Does not enter the SoC dynamics.
    pub vs: f64,
    /// Internal resistance, ohms.
    pub rr: f64,
    /// Nominal capacity, ampere-hours.
    pub qc_ah: f64,
    pub kb: f64,
    /// Optional `(soc, volts)` table replacing the constant `v`.
    voltage_table: Option<Vec<(f64, f64)>>,
}

impl BatteryParams {
    pub fn new(v: f64, vs: f64, rr: f64, qc_ah: f64, kb: f64) -> Result<Self, BatteryError> {
        for (name, value) in [("v", v), ("vs", vs), ("rr", rr), ("qc_ah", qc_ah), ("kb", kb)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(BatteryError::InvalidParam { name, value });
            }
        }
        Ok(Self {
            v,
            vs,
            rr,
            qc_ah,
            kb,
            voltage_table: None,
        })
    }

    /// Makes the internal voltage a piecewise-linear function of SoC.
    pub fn with_voltage_table(mut self, table: Vec<(f64, f64)>) -> Result<Self, BatteryError> {
        let sorted = table.windows(2).all(|w| w[0].0 < w[1].0);
        if table.len() < 2 || !sorted || table.iter().any(|&(_, v)| !(v > 0.0)) {
            return Err(BatteryError::BadVoltageTable);
        }
        self.voltage_table = Some(table);
        Ok(self)
    }

    /// Internal voltage at SoC `b`; clamps to the table ends.
    pub fn voltage(&self, b: f64) -> f64 {
        let Some(t) = &self.voltage_table else {
            return self.v;
        };
        if b <= t[0].0 {
            return t[0].1;
        }
        let i = t.partition_point(|&(s, _)| s < b);
        if i == t.len() {
            return t[i - 1].1;
        }
        let ((s0, v0), (s1, v1)) = (t[i - 1], t[i]);
        v0 + (v1 - v0) * (b - s0) / (s1 - s0)
    }

    /// Constant-voltage parameters frozen at SoC `b`.
    pub fn at_soc(&self, b: f64) -> BatteryParams {
        BatteryParams {
            v: self.voltage(b),
            voltage_table: None,
            ..self.clone()
        }
    }

    pub fn has_voltage_table(&self) -> bool {
        self.voltage_table.is_some()
    }

    /// Largest load the circuit can deliver, `V^2 / (4 R_r)`.
    pub fn deliverable_power(&self) -> f64 {
        self.v * self.v / (4.0 * self.rr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryState {
    pub soc: f64,
}

impl BatteryState {
    pub fn new(soc: f64) -> Self {
        Self {
            soc: soc.clamp(0.0, 1.0),
        }
    }
}

/// Internal current `(V - sqrt(V^2 - 4 R_r y)) / (2 R_r)`, the root that vanishes at zero load.
pub fn internal_current(p: &BatteryParams, y: f64) -> Result<f64, BatteryError> {
    if y < 0.0 {
        return Err(BatteryError::NegativeLoad(y));
    }
    let disc = p.v * p.v - 4.0 * p.rr * y;
    if disc < 0.0 {
        return Err(BatteryError::InfeasibleLoad {
            load: y,
            max: p.deliverable_power(),
        });
    }
    Ok((p.v - disc.sqrt()) / (2.0 * p.rr))
}

/// SoC derivative `-k_b I(y) / Q_c` in 1/s.
pub fn soc_rate(p: &BatteryParams, y: f64) -> Result<f64, BatteryError> {
    Ok(-p.kb * internal_current(p, y)? / (p.qc_ah * 3600.0))
}

/// Forward-Euler SoC update clamped to `[0, 1]`.
pub fn step_soc(p: &BatteryParams, state: BatteryState, y: f64, h: f64) -> Result<BatteryState, BatteryError> {
    let rate = soc_rate(&p.at_soc(state.soc), y)?;
    Ok(BatteryState {
        soc: (state.soc + rate * h).clamp(0.0, 1.0),
    })
}

/// Output cap `b * Q_c * V` with `Q_c` in ampere-hours.
pub fn max_power(p: &BatteryParams, state: BatteryState) -> f64 {
    state.soc * p.qc_ah * p.voltage(state.soc)
}
