//! Scenario files: TOML describing the polygon, aircraft, battery, power signal
//! and planner settings of one simulated flight.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::battery::BatteryParams;
use crate::compute_energy::ComputeProfile;
use crate::coverage::{r2_radius, PlanConfig};
use crate::energy_model::FourierSeries;
use crate::estimator::EstimatorConfig;
use crate::geometry::{Point2, Polygon};
use crate::params::{Bound, ParamBounds, ParamVector};
use crate::replanner::{MpcConfig, ReplanConfig};

use super::kinematics::wind_vector;
use super::SimError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    seed: u64,
    #[serde(default)]
    noise_sigma: f64,
    airspeed: f64,
    #[serde(default = "default_max_time")]
    max_time: f64,
    /// Seconds between telemetry rows.
    #[serde(default = "default_telemetry_step")]
    telemetry_step: f64,
    /// Compute profile CSV, relative to the scenario file.
    profile: String,
    polygon: Vec<[f64; 2]>,
    #[serde(default = "default_weights")]
    weights: Vec<f64>,
    #[serde(default)]
    wind: WindFile,
    plan: PlanFile,
    params: ParamsFile,
    battery: BatteryFile,
    #[serde(default)]
    events: Vec<EventFile>,
    fourier: SeriesFile,
    model: ModelFile,
    truth: TruthFile,
    #[serde(default)]
    mpc: MpcFile,
    #[serde(default)]
    estimator: EstimatorFile,
}

fn default_max_time() -> f64 {
    3600.0
}

fn default_telemetry_step() -> f64 {
    1.0
}

fn default_weights() -> Vec<f64> {
    vec![0.5, 0.5]
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindFile {
    #[serde(default)]
    speed: f64,
    #[serde(default)]
    direction_deg: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    radius: f64,
    min_radius: f64,
    shift: [f64; 2],
    #[serde(default = "default_altitude")]
    altitude: f64,
    start: Option<[f64; 2]>,
    epsilon: Option<f64>,
    lookahead: Option<f64>,
}

fn default_altitude() -> f64 {
    100.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    path_bounds: Vec<[f64; 2]>,
    compute_bounds: Vec<[f64; 2]>,
    initial_path: Vec<f64>,
    initial_compute: Vec<f64>,
    delta: Vec<f64>,
    /// Seconds of drain time kept in reserve by the path update.
    #[serde(default)]
    reserve: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatteryFile {
    v: f64,
    vs: f64,
    rr: f64,
    qc_ah: f64,
    kb: f64,
    soc0: f64,
    voltage_table: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventFile {
    time: f64,
    drop: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeriesFile {
    a: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    period0: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthFile {
    a: Vec<f64>,
    b: Vec<f64>,
    period: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MpcFile {
    horizon: Option<f64>,
    fine_step: Option<f64>,
    replan_step: Option<f64>,
    tolerance: Option<f64>,
    max_iters: Option<usize>,
    max_lookahead: Option<f64>,
    /// Diagonal of the control cost over normalized parameters.
    r_diag: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimatorFile {
    process_scale: Option<f64>,
    measurement_std: Option<f64>,
    /// Completed plan blocks before path parameters may change.
    warmup_periods: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryEvent {
    pub time: f64,
    pub drop: f64,
}

/// Validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub noise_sigma: f64,
    pub airspeed: f64,
    pub wind: Point2,
    pub max_time: f64,
    pub telemetry_step: f64,
    pub weights: Vec<f64>,
    pub polygon: Polygon,
    pub plan: PlanConfig,
    /// Carrot distance ahead of the path projection, meters.
    pub lookahead: f64,
    pub bounds: ParamBounds,
    pub initial: ParamVector,
    pub battery: BatteryParams,
    pub soc0: f64,
    pub events: Vec<BatteryEvent>,
    /// Initial guess of the power series.
    pub guess: FourierSeries,
    pub period0: f64,
    pub truth: FourierSeries,
    pub truth_period: f64,
    pub profile: ComputeProfile,
    pub profile_path: PathBuf,
    pub replan: ReplanConfig,
    pub estimator: EstimatorConfig,
    pub warmup_periods: usize,
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::ScenarioInvalid(msg.into())
}

fn bounds(rows: &[[f64; 2]]) -> Result<Vec<Bound>, SimError> {
    rows.iter()
        .map(|r| Bound::new(r[0], r[1]).map_err(|e| invalid(e.to_string())))
        .collect()
}

fn load_profile(path: &Path, bounds: &ParamBounds) -> Result<ComputeProfile, SimError> {
    let profile = ComputeProfile::load(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    for c in bounds.compute.iter().flat_map(|b| [b.lo, b.hi]) {
        profile
            .predict(c)
            .map_err(|e| invalid(format!("profile does not span the computation bounds: {e}")))?;
    }
    Ok(profile)
}

impl Scenario {
    /// Ground speed used for coverage-time dry runs: airspeed with the wind
    /// fully across track.
    pub fn ground_speed(&self) -> f64 {
        (self.airspeed * self.airspeed - self.wind.dot(self.wind)).sqrt()
    }

    /// Swaps in another compute profile.
    pub fn set_profile(&mut self, path: &Path) -> Result<(), SimError> {
        self.profile = load_profile(path, &self.bounds)?;
        self.profile_path = path.to_path_buf();
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(&text, base, &name)
    }

    /// Parses scenario text; the profile path is resolved against `base`.
    pub fn parse(text: &str, base: &Path, name: &str) -> Result<Self, SimError> {
        let f: File = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        let pos = |v: f64| v.is_finite() && v > 0.0;

        if !pos(f.airspeed) {
            return Err(invalid("airspeed must be positive"));
        }
        if !(f.wind.speed >= 0.0 && f.wind.speed < f.airspeed) {
            return Err(invalid("wind speed must be below airspeed"));
        }
        if !pos(f.max_time) {
            return Err(invalid("max_time must be positive"));
        }
        if !(f.noise_sigma >= 0.0 && f.noise_sigma.is_finite()) {
            return Err(invalid("noise_sigma must be non-negative"));
        }
        let polygon =
            Polygon::new(f.polygon.iter().map(|&p| p.into()).collect()).map_err(|e| invalid(e.to_string()))?;

        let bounds = ParamBounds::new(bounds(&f.params.path_bounds)?, bounds(&f.params.compute_bounds)?)
            .map_err(|e| invalid(e.to_string()))?;
        if bounds.rho() != 1 || bounds.sigma() != 1 {
            return Err(invalid("exactly one path and one computation parameter are supported"));
        }
        let initial = ParamVector::new(f.params.initial_path.clone(), f.params.initial_compute.clone());
        bounds.check(&initial).map_err(|e| invalid(e.to_string()))?;
        if initial.compute.iter().any(|c| c.fract() != 0.0) {
            return Err(invalid("initial computation parameters must be integers"));
        }
        if f.params.delta.len() != bounds.rho() || f.params.delta.iter().any(|d| !pos(*d)) {
            return Err(invalid("params.delta needs one positive step per path parameter"));
        }
        if !(f.params.reserve >= 0.0 && f.params.reserve.is_finite()) {
            return Err(invalid("params.reserve must be non-negative"));
        }
        if f.weights.len() != bounds.n() || f.weights.iter().any(|w| *w < 0.0) || f.weights.iter().sum::<f64>() <= 0.0 {
            return Err(invalid(
                "weights must be non-negative, one per parameter, with a positive sum",
            ));
        }

        let plan = PlanConfig {
            radius: f.plan.radius,
            min_radius: f.plan.min_radius,
            shift: f.plan.shift.into(),
            start: f.plan.start.map(Point2::from),
            altitude: f.plan.altitude,
            epsilon: f.plan.epsilon,
            bounds: bounds.clone(),
        };
        if !pos(plan.altitude) || plan.epsilon.is_some_and(|e| !(e >= 0.0)) {
            return Err(invalid("altitude must be positive and epsilon non-negative"));
        }
        for c in [bounds.path[0].lo, bounds.path[0].hi] {
            r2_radius(c, plan.radius, plan.min_radius).map_err(|e| invalid(format!("path bound: {e}")))?;
        }
        let lookahead = f.plan.lookahead.unwrap_or(0.4 * f.plan.min_radius);
        if !pos(lookahead) {
            return Err(invalid("lookahead must be positive"));
        }

        let b = &f.battery;
        let mut battery = BatteryParams::new(b.v, b.vs, b.rr, b.qc_ah, b.kb).map_err(|e| invalid(e.to_string()))?;
        if let Some(table) = &b.voltage_table {
            battery = battery
                .with_voltage_table(table.iter().map(|r| (r[0], r[1])).collect())
                .map_err(|e| invalid(e.to_string()))?;
        }
        if !(0.0..=1.0).contains(&b.soc0) {
            return Err(invalid("battery.soc0 must lie in [0, 1]"));
        }
        let events: Vec<BatteryEvent> = f
            .events
            .iter()
            .map(|e| BatteryEvent {
                time: e.time,
                drop: e.drop,
            })
            .collect();
        if events.iter().any(|e| !(e.time >= 0.0 && (0.0..=1.0).contains(&e.drop))) {
            return Err(invalid("events need time >= 0 and drop in [0, 1]"));
        }
        if events.windows(2).any(|w| w[0].time > w[1].time) {
            return Err(invalid("events must be sorted by time"));
        }

        let guess = FourierSeries::new(f.fourier.a, f.fourier.b).map_err(|e| invalid(format!("fourier: {e}")))?;
        let truth = FourierSeries::new(f.truth.a, f.truth.b).map_err(|e| invalid(format!("truth: {e}")))?;
        if !pos(f.model.period0) || !pos(f.truth.period) {
            return Err(invalid("periods must be positive"));
        }

        let profile_path = base.join(&f.profile);
        let profile = load_profile(&profile_path, &bounds)?;

        let m = 2 * guess.order() + 1;
        let n = bounds.n();
        let mut mpc = MpcConfig::new(m, n);
        let mf = &f.mpc;
        mpc.horizon = mf.horizon.unwrap_or(mpc.horizon);
        mpc.fine_step = mf.fine_step.unwrap_or(mpc.fine_step);
        mpc.replan_step = mf.replan_step.unwrap_or(mpc.replan_step);
        mpc.tolerance = mf.tolerance.unwrap_or(mpc.tolerance);
        mpc.max_iters = mf.max_iters.unwrap_or(mpc.max_iters);
        mpc.max_lookahead = mf.max_lookahead.unwrap_or(mpc.max_lookahead);
        if let Some(r) = &mf.r_diag {
            if r.len() != n || r.iter().any(|v| *v < 0.0) {
                return Err(invalid("mpc.r_diag needs one non-negative entry per parameter"));
            }
            mpc.r = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(r.clone()));
        }
        mpc.validate(m, n).map_err(|e| invalid(e.to_string()))?;
        for (name, step) in [
            ("mpc.replan_step", mpc.replan_step),
            ("telemetry_step", f.telemetry_step),
        ] {
            let ratio = step / mpc.fine_step;
            if !ratio.is_finite() || (ratio - ratio.round()).abs() > 1e-9 || ratio < 0.5 {
                return Err(invalid(format!("{name} must be a whole multiple of mpc.fine_step")));
            }
        }

        let mean = guess.mean(f.model.period0) + profile.predict(initial.compute[0]).unwrap_or(0.0);
        let mut estimator =
            EstimatorConfig::scaled(m, mean, f.model.period0, f.estimator.process_scale.unwrap_or(1e-8));
        if let Some(std) = f.estimator.measurement_std {
            if !pos(std) {
                return Err(invalid("estimator.measurement_std must be positive"));
            }
            estimator.measurement_noise = std * std;
        }

        Ok(Scenario {
            name: name.to_string(),
            seed: f.seed,
            noise_sigma: f.noise_sigma,
            airspeed: f.airspeed,
            wind: wind_vector(f.wind.speed, f.wind.direction_deg),
            max_time: f.max_time,
            telemetry_step: f.telemetry_step,
            weights: f.weights,
            polygon,
            plan,
            lookahead,
            bounds,
            initial,
            battery,
            soc0: b.soc0,
            events,
            guess,
            period0: f.model.period0,
            truth,
            truth_period: f.truth.period,
            profile,
            profile_path,
            replan: ReplanConfig {
                mpc,
                delta: f.params.delta,
                reserve: f.params.reserve,
            },
            estimator,
            warmup_periods: f.estimator.warmup_periods.unwrap_or(2),
        })
    }
}

#[derive(Deserialize)]
struct Vertex {
    x: f64,
    y: f64,
}

/// Reads a polygon from CSV with header `x,y`, one vertex per row.
pub fn load_polygon(path: &Path) -> Result<Polygon, SimError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let mut vertices = Vec::new();
    for row in rdr.deserialize::<Vertex>() {
        let v = row.map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        vertices.push(Point2::new(v.x, v.y));
    }
    Polygon::new(vertices).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
    }

    fn text() -> String {
        std::fs::read_to_string(base().join("scenario_i.toml")).unwrap()
    }

    fn parse(s: &str) -> Result<Scenario, SimError> {
        Scenario::parse(s, &base(), "t")
    }

    #[test]
    fn fixture_parses() {
        let sc = parse(&text()).unwrap();
        assert_eq!(sc.events.len(), 2);
        assert_eq!(sc.initial.compute, vec![10.0]);
        assert_eq!(sc.replan.mpc.steps(), 600);
        assert!((sc.wind.x - 5.0).abs() < 1e-12);
        assert!((sc.ground_speed() - 200f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_scenarios() {
        let cases = [
            ("airspeed = 15.0", "airspeed = 0.0"),
            ("speed = 5.0", "speed = 20.0"),
            ("soc0 = 0.7", "soc0 = 1.5"),
            ("initial_compute = [10.0]", "initial_compute = [9.5]"),
            ("initial_path = [0.0]", "initial_path = [10.0]"),
            ("path_bounds = [[-1100.0, 0.0]]", "path_bounds = [[-1300.0, 0.0]]"),
            ("compute_bounds = [[2.0, 10.0]]", "compute_bounds = [[2.0, 12.0]]"),
            ("time = 270.0", "time = 10.0"),
            ("profile = \"pednet_profile.csv\"", "profile = \"missing.csv\""),
            ("seed = 11", "seed = 11\nunknown_key = 1"),
            ("delta = [250.0]", "delta = [0.0]"),
        ];
        for (from, to) in cases {
            let s = text().replacen(from, to, 1);
            assert_ne!(s, text(), "{from}");
            let err = parse(&s).map(|_| ()).unwrap_err();
            assert!(matches!(err, SimError::ScenarioInvalid(_)), "{to}: {err}");
        }
    }

    #[test]
    fn polygon_csv_round_trip() {
        let p = load_polygon(&base().join("polygons/rect.csv")).unwrap();
        assert_eq!(p.vertices().len(), 4);
        assert!((p.area() - 120000.0).abs() < 1e-9);
    }
}
