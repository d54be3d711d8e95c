#![allow(dead_code)]

use std::path::PathBuf;

use plansched::coverage::Plan;
use plansched::geometry::{point_segment_distance, Polygon};
use plansched::Point2;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Fraction of grid points inside the polygon that lie within `half_width` of some
/// line stage of the plan.
pub fn coverage_fraction(polygon: &Polygon, plan: &Plan, half_width: f64, spacing: f64) -> f64 {
    let segments = plan.line_segments();
    let (lo, hi) = polygon.bounding_box();
    let (mut inside, mut covered) = (0usize, 0usize);
    let mut x = lo.x + spacing / 2.0;
    while x < hi.x {
        let mut y = lo.y + spacing / 2.0;
        while y < hi.y {
            let p = Point2::new(x, y);
            if polygon.contains(p) {
                inside += 1;
                if segments
                    .iter()
                    .any(|&(a, b)| point_segment_distance(p, a, b) <= half_width + 1e-9)
                {
                    covered += 1;
                }
            }
            y += spacing;
        }
        x += spacing;
    }
    covered as f64 / inside.max(1) as f64
}
