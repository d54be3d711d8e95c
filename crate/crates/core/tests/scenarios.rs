mod common;

use plansched::simulator::{performance_metric, run_scenario, Scenario, SimError, Telemetry, Termination};

use common::fixture;

fn load(name: &str) -> Scenario {
    Scenario::load(&fixture(&format!("{name}.toml"))).unwrap()
}

fn csv(t: &Telemetry) -> Vec<u8> {
    let mut out = Vec::new();
    t.write_csv(&mut out).unwrap();
    out
}

fn at_upper(mut sc: Scenario) -> Scenario {
    sc.initial = sc.bounds.upper();
    sc
}

#[test]
fn same_seed_gives_identical_telemetry() {
    let sc = load("scenario_II");
    assert_eq!(
        csv(&run_scenario(&sc, true).unwrap()),
        csv(&run_scenario(&sc, true).unwrap())
    );
}

#[test]
fn different_seed_changes_readings_only() {
    let sc = load("scenario_I");
    let mut other = sc.clone();
    other.seed += 1;
    let (a, b) = (run_scenario(&sc, false).unwrap(), run_scenario(&other, false).unwrap());
    assert_ne!(a.rows[5].upsilon_w, b.rows[5].upsilon_w);
    // the battery drains on the noiseless load
    assert_eq!(a.rows[5].soc, b.rows[5].soc);
}

#[test]
fn injected_drops_are_conserved() {
    let sc = load("scenario_i");
    let mut quiet = sc.clone();
    quiet.events.clear();
    let (with, without) = (run_scenario(&sc, false).unwrap(), run_scenario(&quiet, false).unwrap());
    let injected: f64 = sc.events.iter().map(|e| e.drop).sum();
    let applied: f64 = with.drops.iter().map(|d| d.drop).sum();
    assert!((applied - injected).abs() < 1e-9);
    // with constant voltage the drain does not depend on SoC, so the traces differ by the drops
    let row = with.rows.iter().position(|r| r.t > 300.0).unwrap();
    let gap = without.rows[row].soc - with.rows[row].soc;
    assert!((gap - injected).abs() < 1e-9, "gap {gap}");
}

#[test]
fn stages_progress_to_the_end() {
    for name in ["scenario_i", "scenario_ii", "scenario_I", "scenario_II"] {
        let t = run_scenario(&load(name), true).unwrap();
        assert_eq!(t.termination, Termination::Completed, "{name}");
        assert!(t.rows.windows(2).all(|w| w[0].stage <= w[1].stage), "{name}");
        assert_eq!(t.rows.last().unwrap().stage + 1, t.final_stage_count, "{name}");
    }
}

#[test]
fn full_battery_highest_start_is_a_fixed_point() {
    let sc = load("scenario_I");
    let (fixed, adaptive) = (run_scenario(&sc, false).unwrap(), run_scenario(&sc, true).unwrap());
    assert!(adaptive.rows.iter().all(|r| r.c1 == 0.0 && r.c2 == 10.0));
    let m = |t: &Telemetry| performance_metric(t, &sc.bounds, &sc.weights, t.soc_final).unwrap();
    assert_eq!(m(&fixed), m(&adaptive));
}

#[test]
fn static_lowest_has_zero_metric() {
    let sc = load("scenario_ii");
    let t = run_scenario(&sc, false).unwrap();
    assert_eq!(t.termination, Termination::Completed);
    assert_eq!(
        performance_metric(&t, &sc.bounds, &sc.weights, t.soc_final).unwrap(),
        0.0
    );
}

#[test]
fn exhausted_flight_has_no_metric() {
    let sc = load("scenario_i");
    let t = run_scenario(&sc, false).unwrap();
    assert_eq!(t.termination, Termination::BatteryExhausted);
    assert!(matches!(
        performance_metric(&t, &sc.bounds, &sc.weights, t.soc_final),
        Err(SimError::ZeroSoc)
    ));
}

#[test]
fn drops_degrade_parameters() {
    let sc = load("scenario_i");
    let t = run_scenario(&sc, true).unwrap();
    let before: Vec<_> = t.rows.iter().filter(|r| r.t < 90.0).collect();
    assert!(before.iter().all(|r| r.c1 == 0.0 && r.c2 == 10.0));
    let min_c1 = t.rows.iter().map(|r| r.c1).fold(f64::INFINITY, f64::min);
    assert!(min_c1 < 0.0);
    // the computation parameter falls as the battery's power cap tightens
    assert_eq!(t.rows.last().unwrap().c2, 2.0);
}

#[test]
fn lowest_start_raises_path_after_two_periods() {
    let sc = load("scenario_ii");
    let t = run_scenario(&sc, true).unwrap();
    let first_raise = t.rows.iter().find(|r| r.c1 > -1100.0).unwrap().t;
    assert!(!t.periods.is_empty());
    assert!(first_raise >= t.periods[0].0, "raised at {first_raise}");
    assert!(t.rows.iter().any(|r| r.c2 > 2.0));
}

#[test]
fn adaptive_dominates_static_highest() {
    for name in ["scenario_i", "scenario_ii", "scenario_I", "scenario_II"] {
        let sc = load(name);
        let adaptive = run_scenario(&sc, true).unwrap();
        let fixed = run_scenario(&at_upper(sc), false).unwrap();
        if fixed.termination == Termination::Completed {
            assert_eq!(adaptive.termination, Termination::Completed, "{name}");
        }
    }
}

#[test]
fn period_estimate_tracks_block_time() {
    let sc = load("scenario_I");
    let t = run_scenario(&sc, false).unwrap();
    let (_, period) = t.periods[0];
    // one block of the highest configuration is about 914 m of path
    assert!((period - 914.0 / 15.0).abs() < 0.25 * period, "period {period}");
}
