//! Kinematic fixed-wing model: constant airspeed, heading chosen through the wind
//! triangle so the ground track points at a carrot on the stage's path.

use crate::coverage::Stage;
use crate::geometry::Point2;

/// Wind vector from speed (m/s) and direction in degrees, counter-clockwise from east,
/// pointing where the air moves to.
pub fn wind_vector(speed: f64, direction_deg: f64) -> Point2 {
    Point2::from_angle(direction_deg.to_radians()) * speed
}

/// Heading whose air velocity plus `wind` is parallel to `desired` (unit).
/// Requires `|wind| < airspeed`.
pub fn crab_heading(desired: Point2, airspeed: f64, wind: Point2) -> f64 {
    let along = wind.dot(desired);
    let cross = wind - desired * along;
    let k = (cross.norm() / airspeed).min(1.0);
    let air = desired * (1.0 - k * k).sqrt() - cross * (1.0 / airspeed);
    air.y.atan2(air.x)
}

/// One step of path following. The carrot sits `lookahead` meters ahead of the
/// projection of `pos` on the path, along the path tangent.
pub fn follow_path(
    pos: Point2,
    heading: f64,
    stage: &Stage,
    airspeed: f64,
    wind: Point2,
    h: f64,
    lookahead: f64,
) -> (Point2, f64) {
    let (proj, tangent) = stage.path.project(pos);
    let carrot = proj + tangent * lookahead;
    let heading = match (carrot - pos).normalized() {
        Some(desired) => crab_heading(desired, airspeed, wind),
        None => heading,
    };
    let ground = Point2::from_angle(heading) * airspeed + wind;
    (pos + ground * h, heading)
}
