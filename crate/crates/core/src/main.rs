use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use plansched::coverage::{generate_plan, PlanConfig};
use plansched::energy_model::EnergyModel;
use plansched::simulator::scenario::load_polygon;
use plansched::simulator::{performance_metric, run_scenario, svg, Scenario, SimError, Termination};
use plansched::{Bound, ParamBounds, Point2};

#[derive(Parser)]
#[command(
    name = "plansched",
    version,
    about = "Energy-aware coverage planning and scheduling simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a coverage plan and write one CSV row per stage.
    Plan {
        /// Polygon CSV with header `x,y`.
        #[arg(long)]
        polygon: PathBuf,
        /// Shift between sweep lines along x, meters.
        #[arg(long)]
        shift: f64,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        min_radius: f64,
        /// Path parameter of every second circle.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        c1: f64,
        #[arg(long, default_value_t = 100.0)]
        altitude: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fly a scenario adaptively and write the re-planning columns.
    Replan {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fly a scenario and write the full telemetry.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Re-plan online; otherwise the initial parameters are held.
        #[arg(long)]
        adaptive: bool,
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Dump the energy model matrices of a scenario's initial guess.
    Model {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &Path, profile: Option<&Path>) -> Result<Scenario, SimError> {
    let mut sc = Scenario::load(path)?;
    if let Some(p) = profile {
        sc.set_profile(p)?;
    }
    Ok(sc)
}

fn create(path: &Path) -> Result<BufWriter<File>, SimError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn report(sc: &Scenario, telemetry: &plansched::simulator::Telemetry) -> u8 {
    let metric = performance_metric(telemetry, &sc.bounds, &sc.weights, telemetry.soc_final)
        .map(|m| format!("{m:.4}"))
        .unwrap_or_else(|e| e.to_string());
    let t = telemetry.rows.last().map(|r| r.t).unwrap_or(0.0);
    eprintln!(
        "{}: {:?} at t = {t:.2} s, final SoC {:.4}, metric {metric}",
        sc.name, telemetry.termination, telemetry.soc_final
    );
    match telemetry.termination {
        Termination::Completed => 0,
        Termination::BatteryExhausted => 2,
        Termination::MaxTime => 4,
    }
}

fn run(cli: Cli) -> Result<u8, SimError> {
    match cli.cmd {
        Cmd::Plan {
            polygon,
            shift,
            radius,
            min_radius,
            c1,
            altitude,
            out,
        } => {
            let polygon = load_polygon(&polygon)?;
            let bound = Bound::new(c1.min(0.0), 0.0).map_err(|e| SimError::ScenarioInvalid(e.to_string()))?;
            let config = PlanConfig {
                radius,
                min_radius,
                shift: Point2::new(shift, 0.0),
                start: None,
                altitude,
                epsilon: None,
                bounds: ParamBounds {
                    path: vec![bound],
                    compute: vec![],
                },
            };
            let plan = generate_plan(&polygon, &config, &[c1])?;
            plan.write_csv(create(&out)?)?;
            eprintln!("{} stages, {:.1} m", plan.len(), plan.path_length());
            Ok(0)
        }
        Cmd::Replan { scenario, profile, out } => {
            let sc = load(&scenario, profile.as_deref())?;
            let telemetry = run_scenario(&sc, true)?;
            telemetry.write_replan_csv(create(&out)?)?;
            Ok(report(&sc, &telemetry))
        }
        Cmd::Simulate {
            scenario,
            adaptive,
            profile,
            out,
            svg: svg_out,
        } => {
            let sc = load(&scenario, profile.as_deref())?;
            let telemetry = run_scenario(&sc, adaptive)?;
            telemetry.write_csv(create(&out)?)?;
            if let Some(path) = svg_out {
                std::fs::write(path, svg::render(&sc.polygon, &telemetry))?;
            }
            Ok(report(&sc, &telemetry))
        }
        Cmd::Model { scenario, out } => {
            let sc = Scenario::load(&scenario)?;
            let model = EnergyModel::build(sc.guess.order(), sc.period0, sc.bounds.rho(), sc.bounds.sigma())?;
            model.write_csv(create(&out)?)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, SimError::ScenarioInvalid(_)) {
                3
            } else {
                1
            })
        }
    }
}
