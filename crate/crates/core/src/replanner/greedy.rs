//! Greedy adjustment of path parameters against the predicted drain time.

use crate::energy_model::ScalingFactors;
use crate::params::Bound;

/// Remaining coverage time `sum_j (nu_j c_j + tau_j) - t`, clamped at zero.
/// The flag reports whether clamping happened.
pub fn remaining_coverage_time(c_path: &[f64], s: &ScalingFactors, t: f64) -> (f64, bool) {
    let total: f64 = s.apply(c_path).iter().sum();
    let t_r = total - t;
    if t_r < 0.0 {
        (0.0, true)
    } else {
        (t_r, false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyUpdate {
    pub c_path: Vec<f64>,
    pub iterations: usize,
}

/// Lowers every path parameter by `delta` until the remaining time fits in `t_b`
/// (or all sit at their lower bounds); when it already fits, raises them while
/// the raised configuration still fits.
pub fn greedy_path_update(
    c_path: &[f64],
    t_b: f64,
    delta: &[f64],
    bounds: &[Bound],
    s: &ScalingFactors,
    t: f64,
) -> GreedyUpdate {
    let remaining = |c: &[f64]| remaining_coverage_time(c, s, t).0;
    let mut c: Vec<f64> = c_path.iter().zip(bounds).map(|(v, b)| b.clamp(*v)).collect();
    let max_iters = bounds
        .iter()
        .zip(delta)
        .map(|(b, d)| if *d > 0.0 { (b.width() / d).ceil() as usize } else { 0 })
        .max()
        .unwrap_or(0);
    let mut iterations = 0;
    if remaining(&c) > t_b {
        while remaining(&c) > t_b && iterations < max_iters {
            let next: Vec<f64> = c
                .iter()
                .zip(bounds.iter().zip(delta))
                .map(|(v, (b, d))| b.clamp(v - d))
                .collect();
            if next == c {
                break;
            }
            c = next;
            iterations += 1;
        }
    } else {
        while iterations < max_iters {
            let next: Vec<f64> = c
                .iter()
                .zip(bounds.iter().zip(delta))
                .map(|(v, (b, d))| b.clamp(v + d))
                .collect();
            if next == c || remaining(&next) > t_b {
                break;
            }
            c = next;
            iterations += 1;
        }
    }
    GreedyUpdate { c_path: c, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scaling() -> ScalingFactors {
        ScalingFactors {
            nu: vec![0.06],
            tau: vec![360.0],
        }
    }

    fn bounds() -> Vec<Bound> {
        vec![Bound::new(-1000.0, 0.0).unwrap()]
    }

    #[test]
    fn remaining_time_examples() {
        assert_eq!(remaining_coverage_time(&[0.0], &scaling(), 100.0), (260.0, false));
        assert_eq!(remaining_coverage_time(&[0.0], &scaling(), 360.0), (0.0, false));
        assert_eq!(remaining_coverage_time(&[0.0], &scaling(), 400.0), (0.0, true));
    }

    #[test]
    fn saturated_upper_bound_is_unchanged() {
        let u = greedy_path_update(&[0.0], 1e6, &[250.0], &bounds(), &scaling(), 0.0);
        assert_eq!(u.c_path, vec![0.0]);
        assert_eq!(u.iterations, 0);
    }

    #[test]
    fn two_decrements_for_thirty_seconds() {
        // t_r = 360 - 100 = 260; t_b = 230 needs 30 s, 15 s per decrement
        let u = greedy_path_update(&[0.0], 230.0, &[250.0], &bounds(), &scaling(), 100.0);
        assert_eq!(u.c_path, vec![-500.0]);
        assert_eq!(u.iterations, 2);
    }

    #[test]
    fn lower_bound_when_nothing_fits() {
        let u = greedy_path_update(&[0.0], 1.0, &[250.0], &bounds(), &scaling(), 0.0);
        assert_eq!(u.c_path, vec![-1000.0]);
    }

    #[test]
    fn raises_while_it_fits() {
        let u = greedy_path_update(&[-1000.0], 350.0, &[250.0], &bounds(), &scaling(), 0.0);
        // 300 -> 315 -> 330 -> 345 fits, 360 does not
        assert_eq!(u.c_path, vec![-250.0]);
    }

    proptest! {
        #[test]
        fn stays_in_bounds_and_terminates(
            c in -1200.0f64..200.0, t_b in 0.0f64..1000.0, t in 0.0f64..500.0, d in 1.0f64..600.0,
        ) {
            let b = bounds();
            let u = greedy_path_update(&[c], t_b, &[d], &b, &scaling(), t);
            prop_assert!(b[0].contains(u.c_path[0]));
            prop_assert!(u.iterations <= (1000.0 / d).ceil() as usize);
        }
    }
}
