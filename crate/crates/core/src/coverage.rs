//! Zamboni-like coverage plans.
//!
//! A plan is a finite-state machine of stages. Each stage pairs a path function
//! (a line or a circle) with a triggering point: once the robot comes within the
//! stage's trigger radius of that point, the machine moves to the next stage.
//!
//! The primitive block is four stages: a line parallel to the polygon edge
//! `v_last -> v_1`, a wide first circle of radius `r + d_x / 2` whose leftmost
//! point sits on the line's exit, the parallel return line, and a second circle
//! whose rightmost point sits on the return line's exit. The second circle's
//! radius `sqrt(r^2 + c1)` is driven by the path parameter `c1`; at `c1 = 0` the
//! block repeats exactly shifted by `d`, smaller radii widen the line spacing.

use std::f64::consts::TAU;
use std::io::Write;

use thiserror::Error;

use crate::geometry::{Point2, Polygon, PolygonError, GEOM_EPS};
use crate::params::{Bound, ParamBounds};

/// Number of stages in one primitive block.
pub const PRIMITIVE_STAGES: usize = 4;

/// Tolerance for the primitive-offset check.
pub const PRIMITIVE_TOL: f64 = 1e-6;

const MAX_STAGES: usize = 100_000;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(#[from] PolygonError),
    #[error("start point {0:?} does not yield a sweep line inside the polygon")]
    StartOutside(Point2),
    #[error("path parameter {c1} outside ({lo}, 0] for r = {r}, r_min = {r_min}")]
    OutOfRange { c1: f64, lo: f64, r: f64, r_min: f64 },
    #[error("invalid turning radii: r = {r}, r_min = {r_min} (need r > r_min > 0)")]
    InvalidRadius { r: f64, r_min: f64 },
    #[error("first circle radius {r1} below minimum turning radius {r_min}")]
    FirstCircleTooTight { r1: f64, r_min: f64 },
    #[error("shift {0:?} does not progress toward the far edge")]
    UnreachableFinalPoint(Point2),
    #[error("stage {stage}: primitive offset differs by {deviation:e} from block 1")]
    NotPrimitive { stage: usize, deviation: f64 },
    #[error("expected {expected} path parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Cw,
    Ccw,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::Ccw => 1.0,
            Orientation::Cw => -1.0,
        }
    }
}

/// Path function tracked during a stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathFunction {
    /// Line through `point` with unit travel `direction`.
    Line { point: Point2, direction: Point2 },
    Circle {
        center: Point2,
        radius: f64,
        orientation: Orientation,
    },
}

impl PathFunction {
    /// Implicit value: signed distance for lines (positive left of travel),
    /// `|p - c|^2 - r^2` for circles. Zero on the path.
    pub fn eval(&self, p: Point2) -> f64 {
        match *self {
            PathFunction::Line { point, direction } => direction.cross(p - point),
            PathFunction::Circle { center, radius, .. } => {
                let v = p - center;
                v.dot(v) - radius * radius
            }
        }
    }

    /// Closest point on the path and the unit tangent along the travel direction there.
    pub fn project(&self, p: Point2) -> (Point2, Point2) {
        match *self {
            PathFunction::Line { point, direction } => (point + direction * (p - point).dot(direction), direction),
            PathFunction::Circle {
                center,
                radius,
                orientation,
            } => {
                let radial = (p - center).normalized().unwrap_or(Point2::new(1.0, 0.0));
                (center + radial * radius, radial.perp() * orientation.sign())
            }
        }
    }

    /// Signed cross-track error: positive when `p` lies left of the travel direction.
    pub fn cross_track(&self, p: Point2) -> f64 {
        let (proj, tangent) = self.project(p);
        tangent.cross(p - proj)
    }

    pub fn translated(&self, d: Point2) -> PathFunction {
        match *self {
            PathFunction::Line { point, direction } => PathFunction::Line {
                point: point + d,
                direction,
            },
            PathFunction::Circle {
                center,
                radius,
                orientation,
            } => PathFunction::Circle {
                center: center + d,
                radius,
                orientation,
            },
        }
    }

    pub fn is_circle(&self) -> bool {
        matches!(self, PathFunction::Circle { .. })
    }
}

/// Position of a stage inside its primitive block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageRole {
    SweepLine,
    FirstCircle,
    ReturnLine,
    SecondCircle,
}

impl StageRole {
    fn next(self) -> StageRole {
        match self {
            StageRole::SweepLine => StageRole::FirstCircle,
            StageRole::FirstCircle => StageRole::ReturnLine,
            StageRole::ReturnLine => StageRole::SecondCircle,
            StageRole::SecondCircle => StageRole::SweepLine,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub path: PathFunction,
    pub role: StageRole,
    /// Where the stage is entered (the previous trigger, or the start point).
    pub entry: Point2,
    pub trigger: Point2,
    pub trigger_radius: f64,
    pub path_bounds: Vec<Bound>,
    pub compute_bounds: Vec<Bound>,
    /// Path parameters in effect when the stage was derived.
    pub path_params: Vec<f64>,
}

impl Stage {
    /// Length flown from entry to trigger.
    pub fn length(&self) -> f64 {
        match self.path {
            PathFunction::Line { .. } => self.entry.distance(self.trigger),
            PathFunction::Circle {
                center,
                radius,
                orientation,
            } => radius * sweep_angle(center, self.entry, self.trigger, orientation),
        }
    }
}

/// Angle in `(0, 2pi]` swept from `from` to `to` around `center` in the given sense.
fn sweep_angle(center: Point2, from: Point2, to: Point2, orientation: Orientation) -> f64 {
    let a0 = (from.y - center.y).atan2(from.x - center.x);
    let a1 = (to.y - center.y).atan2(to.x - center.x);
    let mut d = (a1 - a0) * orientation.sign();
    d = d.rem_euclid(TAU);
    if d <= 1e-12 {
        d = TAU;
    }
    d
}

/// Radius of the second circle for path parameter `c1`: `sqrt(r^2 + c1)`.
pub fn r2_radius(c1: f64, r: f64, r_min: f64) -> Result<f64, PlanError> {
    if !(r > r_min && r_min > 0.0) {
        return Err(PlanError::InvalidRadius { r, r_min });
    }
    let lo = r_min * r_min - r * r;
    if !(c1 > lo && c1 <= 0.0) {
        return Err(PlanError::OutOfRange { c1, lo, r, r_min });
    }
    Ok((r * r + c1).sqrt())
}

/// Second circle of a block: radius `r2(c1)`, rightmost point on `p3`.
pub fn second_circle(
    p3: Point2,
    c1: f64,
    r: f64,
    r_min: f64,
    orientation: Orientation,
) -> Result<PathFunction, PlanError> {
    let radius = r2_radius(c1, r, r_min)?;
    Ok(PathFunction::Circle {
        center: Point2::new(p3.x - radius, p3.y),
        radius,
        orientation,
    })
}

/// Radius of the first circle, `r + d_x / 2`, so that blocks at `c1 = 0` repeat with shift `d`.
pub fn first_circle_radius(r: f64, shift: Point2) -> f64 {
    r + shift.x / 2.0
}

/// Inputs of plan generation.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanConfig {
    /// Ideal turning radius `r`.
    pub radius: f64,
    /// Minimum turning radius of the airframe.
    pub min_radius: f64,
    pub shift: Point2,
    /// First sweep line passes through this point; defaults to `v_1 + d / 2`.
    pub start: Option<Point2>,
    pub altitude: f64,
    /// Trigger radius for every stage; defaults to 1% of `|d_x|`.
    pub epsilon: Option<f64>,
    pub bounds: ParamBounds,
}

impl PlanConfig {
    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(0.01 * self.shift.x.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    Stay(usize),
    Advanced(usize),
    Complete,
}

#[derive(Debug, Clone)]
pub struct Plan {
    polygon: Polygon,
    config: PlanConfig,
    start: Point2,
    stages: Vec<Stage>,
    current: usize,
    complete: bool,
}

/// Builds the coverage plan for `polygon` with path parameters `c_path` applied to
/// every second circle.
pub fn generate_plan(polygon: &Polygon, config: &PlanConfig, c_path: &[f64]) -> Result<Plan, PlanError> {
    let PlanConfig {
        radius: r,
        min_radius: r_min,
        shift,
        ..
    } = *config;
    if !(r > r_min && r_min > 0.0) {
        return Err(PlanError::InvalidRadius { r, r_min });
    }
    if c_path.len() != config.bounds.rho() || c_path.is_empty() {
        return Err(PlanError::ParamCount {
            expected: config.bounds.rho().max(1),
            got: c_path.len(),
        });
    }
    let r1 = first_circle_radius(r, shift);
    if r1 < r_min {
        return Err(PlanError::FirstCircleTooTight { r1, r_min });
    }
    r2_radius(c_path[0], r, r_min)?;
    // the block advances by d_x + 2 (r - r2) >= d_x along x
    if !(shift.x > GEOM_EPS) {
        return Err(PlanError::UnreachableFinalPoint(shift));
    }
    let start = config.start.unwrap_or(polygon.vertices()[0] + shift * 0.5);
    if !start.is_finite() {
        return Err(PlanError::StartOutside(start));
    }
    let mut plan = Plan {
        polygon: polygon.clone(),
        config: config.clone(),
        start,
        stages: Vec::new(),
        current: 0,
        complete: false,
    };
    plan.extend_from(start, StageRole::SweepLine, c_path)?;
    if plan.stages.is_empty() {
        return Err(PlanError::StartOutside(start));
    }
    Ok(plan)
}

impl Plan {
    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn n_primitive(&self) -> usize {
        PRIMITIVE_STAGES
    }

    pub fn shift(&self) -> Point2 {
        self.config.shift
    }

    pub fn altitude(&self) -> f64 {
        self.config.altitude
    }

    pub fn start(&self) -> Point2 {
        self.start
    }

    pub fn polygon(&self) -> &Polygon {
        &self.polygon
    }

    pub fn config(&self) -> &PlanConfig {
        &self.config
    }

    pub fn final_point(&self) -> Point2 {
        self.stages.last().map(|s| s.trigger).unwrap_or(self.start)
    }

    pub fn current_index(&self) -> usize {
        self.current
    }

    pub fn current_stage(&self) -> &Stage {
        &self.stages[self.current]
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    /// Index of the block containing stage `i`.
    pub fn block_of(&self, i: usize) -> usize {
        i / PRIMITIVE_STAGES
    }

    /// State-transition function: the next stage index when `p` is strictly
    /// inside the current trigger radius, otherwise the current index. At the
    /// last stage a hit means the final point is reached.
    pub fn next_stage(&self, p: Point2) -> Transition {
        if self.complete {
            return Transition::Complete;
        }
        let stage = &self.stages[self.current];
        if p.distance(stage.trigger) < stage.trigger_radius {
            if self.current + 1 == self.stages.len() {
                Transition::Complete
            } else {
                Transition::Advanced(self.current + 1)
            }
        } else {
            Transition::Stay(self.current)
        }
    }

    /// Applies [`Plan::next_stage`].
    pub fn advance(&mut self, p: Point2) -> Transition {
        let t = self.next_stage(p);
        match t {
            Transition::Advanced(i) => self.current = i,
            Transition::Complete => self.complete = true,
            Transition::Stay(_) => {}
        }
        t
    }

    /// Path parameters of the next second circle not yet entered, if any.
    pub fn pending_path_params(&self) -> Option<&[f64]> {
        self.pending_second_circle()
            .map(|j| self.stages[j].path_params.as_slice())
    }

    fn pending_second_circle(&self) -> Option<usize> {
        (self.current + 1..self.stages.len()).find(|&j| self.stages[j].role == StageRole::SecondCircle)
    }

    /// Re-derives every stage from the next not-yet-entered second circle onward
    /// with new path parameters. Returns whether anything changed.
    pub fn set_path_params(&mut self, c_path: &[f64]) -> Result<bool, PlanError> {
        if c_path.len() != self.config.bounds.rho() || c_path.is_empty() {
            return Err(PlanError::ParamCount {
                expected: self.config.bounds.rho().max(1),
                got: c_path.len(),
            });
        }
        r2_radius(c_path[0], self.config.radius, self.config.min_radius)?;
        let Some(j) = self.pending_second_circle() else {
            return Ok(false);
        };
        if self.stages[j].path_params == c_path {
            return Ok(false);
        }
        let from = self.stages[j - 1].trigger;
        self.stages.truncate(j);
        self.extend_from(from, StageRole::SecondCircle, c_path)?;
        Ok(true)
    }

    /// Total length of the plan from the start point to the final point.
    pub fn path_length(&self) -> f64 {
        self.stages.iter().map(Stage::length).sum()
    }

    /// Length still to fly from stage `from` (inclusive) onward.
    pub fn remaining_length(&self, from: usize) -> f64 {
        self.stages[from.min(self.stages.len())..]
            .iter()
            .map(Stage::length)
            .sum()
    }

    /// Length still to fly from `pos`: the rest of the current stage, measured from
    /// the projection of `pos` onto it, plus every later stage.
    pub fn remaining_length_from(&self, pos: Point2) -> f64 {
        if self.complete {
            return 0.0;
        }
        let stage = &self.stages[self.current];
        let (proj, _) = stage.path.project(pos);
        let here = match stage.path {
            PathFunction::Line { direction, .. } => (stage.trigger - proj).dot(direction).max(0.0),
            PathFunction::Circle {
                center,
                radius,
                orientation,
            } => {
                let a = sweep_angle(center, proj, stage.trigger, orientation);
                // right at the trigger the sweep wraps to a full turn
                if a > TAU - 1e-9 {
                    0.0
                } else {
                    radius * a
                }
            }
        };
        here + self.remaining_length(self.current + 1)
    }

    /// Line stages as `(entry, trigger)` segments.
    pub fn line_segments(&self) -> Vec<(Point2, Point2)> {
        self.stages
            .iter()
            .filter(|s| !s.path.is_circle())
            .map(|s| (s.entry, s.trigger))
            .collect()
    }

    /// Runs the generation loop from `p` starting with a stage of kind `role`.
    fn extend_from(&mut self, mut p: Point2, mut role: StageRole, c_path: &[f64]) -> Result<(), PlanError> {
        let r = self.config.radius;
        let r_min = self.config.min_radius;
        let shift = self.config.shift;
        let eps = self.config.epsilon();
        let dir = self.polygon.sweep_direction();
        let mut last_dir = self
            .stages
            .iter()
            .rev()
            .find_map(|s| match s.path {
                PathFunction::Line { direction, .. } => Some(direction),
                _ => None,
            })
            .unwrap_or(-dir);

        while self.stages.len() < MAX_STAGES {
            let (path, trigger) = match role {
                StageRole::SweepLine | StageRole::ReturnLine => {
                    match self.line_through(p, dir) {
                        Some((direction, trigger)) => {
                            last_dir = direction;
                            (PathFunction::Line { point: p, direction }, trigger)
                        }
                        // the next line would fall outside: `p` is the final point
                        None => return Ok(()),
                    }
                }
                StageRole::FirstCircle => {
                    let radius = first_circle_radius(r, shift);
                    let center = Point2::new(p.x + radius, p.y);
                    // tangent at the leftmost point is vertical
                    let orientation = if last_dir.y <= 0.0 {
                        Orientation::Ccw
                    } else {
                        Orientation::Cw
                    };
                    let circle = PathFunction::Circle {
                        center,
                        radius,
                        orientation,
                    };
                    (circle, self.circle_trigger(&circle, p))
                }
                StageRole::SecondCircle => {
                    let orientation = if last_dir.y >= 0.0 {
                        Orientation::Ccw
                    } else {
                        Orientation::Cw
                    };
                    let circle = second_circle(p, c_path[0], r, r_min, orientation)?;
                    (circle, self.circle_trigger(&circle, p))
                }
            };
            self.stages.push(Stage {
                path,
                role,
                entry: p,
                trigger,
                trigger_radius: eps,
                path_bounds: self.config.bounds.path.clone(),
                compute_bounds: self.config.bounds.compute.clone(),
                path_params: c_path.to_vec(),
            });
            p = trigger;
            role = role.next();
        }
        Err(PlanError::UnreachableFinalPoint(shift))
    }

    /// Line through `p` parallel to `dir`: travel direction and exit point, or
    /// `None` when the line does not cross the polygon interior.
    fn line_through(&self, p: Point2, dir: Point2) -> Option<(Point2, Point2)> {
        let (lo, hi) = self.polygon.line_chord(p, dir)?;
        let mid = p + dir * ((lo + hi) / 2.0);
        if hi - lo <= 1e-6 || self.polygon.signed_boundary_distance(mid) <= 1e-6 {
            return None;
        }
        // the exit is the chord end farther from the entry
        if hi.abs() >= lo.abs() {
            Some((dir, p + dir * hi))
        } else {
            Some((-dir, p + dir * lo))
        }
    }

    /// The other intersection of a circle with the boundary: farthest from the
    /// entry, ties broken by traversal order. Falls back to the antipode.
    fn circle_trigger(&self, circle: &PathFunction, entry: Point2) -> Point2 {
        let PathFunction::Circle {
            center,
            radius,
            orientation,
        } = *circle
        else {
            unreachable!("circle_trigger on a line");
        };
        let tol = 1e-6 * radius.max(1.0);
        let mut best: Option<(f64, f64, Point2)> = None;
        for q in self.polygon.circle_intersections(center, radius) {
            let dist = q.distance(entry);
            if dist <= tol {
                continue;
            }
            let travel = sweep_angle(center, entry, q, orientation);
            let better = match best {
                None => true,
                Some((bd, bt, _)) => dist > bd + 1e-9 || ((dist - bd).abs() <= 1e-9 && travel < bt),
            };
            if better {
                best = Some((dist, travel, q));
            }
        }
        best.map(|(_, _, q)| q).unwrap_or(center * 2.0 - entry)
    }

    /// Writes one row per stage.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "index",
            "kind",
            "point_x",
            "point_y",
            "dir_x",
            "dir_y",
            "center_x",
            "center_y",
            "radius",
            "orientation",
            "trigger_x",
            "trigger_y",
            "epsilon",
        ])?;
        for (i, s) in self.stages.iter().enumerate() {
            let mut row: Vec<String> = vec![i.to_string()];
            match s.path {
                PathFunction::Line { point, direction } => {
                    row.push("line".into());
                    row.extend([point.x, point.y, direction.x, direction.y].map(|v| v.to_string()));
                    row.extend(std::iter::repeat_n(String::new(), 4));
                }
                PathFunction::Circle {
                    center,
                    radius,
                    orientation,
                } => {
                    row.push("circle".into());
                    row.extend(std::iter::repeat_n(String::new(), 4));
                    row.extend([center.x, center.y, radius].map(|v| v.to_string()));
                    row.push(match orientation {
                        Orientation::Cw => "cw".into(),
                        Orientation::Ccw => "ccw".into(),
                    });
                }
            }
            row.extend([s.trigger.x, s.trigger.y, s.trigger_radius].map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Constant offsets `e_j` between consecutive primitive repetitions.
///
/// Path functions are evaluated at the plan start translated by the block shift,
/// which for path parameter `c1` is `d + (2 (r - r2(c1)), 0)`. Second circles are
/// re-derived from their entry point with `c1_ref`. Every repetition must agree
/// with the first one within [`PRIMITIVE_TOL`].
pub fn primitive_offsets(plan: &Plan, c1_ref: &[f64]) -> Result<Vec<f64>, PlanError> {
    let cfg = plan.config();
    let c1 = *c1_ref.first().ok_or(PlanError::ParamCount { expected: 1, got: 0 })?;
    let r2 = r2_radius(c1, cfg.radius, cfg.min_radius)?;
    let d = cfg.shift + Point2::new(2.0 * (cfg.radius - r2), 0.0);
    let p = plan.start();
    let n = PRIMITIVE_STAGES;

    let phi = |idx: usize, at: Point2| -> Result<f64, PlanError> {
        let s = &plan.stages()[idx];
        match (s.role, s.path) {
            (StageRole::SecondCircle, PathFunction::Circle { orientation, .. }) => {
                second_circle(s.entry, c1, cfg.radius, cfg.min_radius, orientation).map(|f| f.eval(at))
            }
            _ => Ok(s.path.eval(at)),
        }
    };

    let mut offsets = vec![0.0; n];
    let blocks = plan.len().div_ceil(n);
    for (j, offset) in offsets.iter_mut().enumerate() {
        let mut first: Option<f64> = None;
        for i in 1..blocks {
            let (prev, next) = ((i - 1) * n + j, i * n + j);
            if next >= plan.len() {
                break;
            }
            let e = phi(prev, p + d * (i - 1) as f64)? - phi(next, p + d * i as f64)?;
            match first {
                None => first = Some(e),
                Some(e0) => {
                    let deviation = (e - e0).abs();
                    if deviation > PRIMITIVE_TOL {
                        return Err(PlanError::NotPrimitive { stage: next, deviation });
                    }
                }
            }
        }
        *offset = first.unwrap_or(0.0);
        if offset.abs() > PRIMITIVE_TOL {
            // block 1 itself is not a translate of block 0
            return Err(PlanError::NotPrimitive {
                stage: n + j,
                deviation: offset.abs(),
            });
        }
    }
    Ok(offsets)
}

impl Plan {
    /// Mutable access to stages, for tests that perturb a plan.
    #[doc(hidden)]
    pub fn stages_mut(&mut self) -> &mut [Stage] {
        &mut self.stages
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds() -> ParamBounds {
        ParamBounds::new(
            vec![Bound::new(-1000.0, 0.0).unwrap()],
            vec![Bound::new(2.0, 10.0).unwrap()],
        )
        .unwrap()
    }

    fn rect(w: f64, h: f64) -> Polygon {
        Polygon::new(vec![
            Point2::new(0.0, h),
            Point2::new(w, h),
            Point2::new(w, 0.0),
            Point2::new(0.0, 0.0),
        ])
        .unwrap()
    }

    fn config(r: f64, r_min: f64, shift: f64) -> PlanConfig {
        PlanConfig {
            radius: r,
            min_radius: r_min,
            shift: Point2::new(shift, 0.0),
            start: None,
            altitude: 100.0,
            epsilon: None,
            bounds: bounds(),
        }
    }

    #[test]
    fn r2_examples() {
        assert_eq!(r2_radius(0.0, 100.0, 50.0).unwrap(), 100.0);
        assert!((r2_radius(-1000.0, 100.0, 50.0).unwrap() - 9000f64.sqrt()).abs() < 1e-12);
        assert!((r2_radius(-1000.0, 100.0, 50.0).unwrap() - 94.868_329_805).abs() < 1e-8);
        // lower end of the admissible interval is open
        assert!(matches!(
            r2_radius(50.0 * 50.0 - 100.0 * 100.0, 100.0, 50.0),
            Err(PlanError::OutOfRange { .. })
        ));
        assert!(matches!(r2_radius(1.0, 100.0, 50.0), Err(PlanError::OutOfRange { .. })));
        assert!(matches!(
            r2_radius(0.0, 50.0, 60.0),
            Err(PlanError::InvalidRadius { .. })
        ));
    }

    #[test]
    fn second_circle_examples() {
        let c = second_circle(Point2::new(0.0, 0.0), 0.0, 100.0, 50.0, Orientation::Ccw).unwrap();
        assert_eq!(
            c,
            PathFunction::Circle {
                center: Point2::new(-100.0, 0.0),
                radius: 100.0,
                orientation: Orientation::Ccw
            }
        );
        let PathFunction::Circle { center, radius, .. } =
            second_circle(Point2::new(50.0, 10.0), -1000.0, 100.0, 50.0, Orientation::Ccw).unwrap()
        else {
            panic!()
        };
        assert!((radius - 9000f64.sqrt()).abs() < 1e-12);
        assert!((center.x - (50.0 - 9000f64.sqrt())).abs() < 1e-12);
        assert_eq!(center.y, 10.0);
    }

    #[test]
    fn first_circle_examples() {
        assert_eq!(first_circle_radius(100.0, Point2::new(60.0, 0.0)), 130.0);
        assert_eq!(first_circle_radius(100.0, Point2::new(0.0, 5.0)), 100.0);
    }

    #[test]
    fn block_structure_in_rectangle() {
        let plan = generate_plan(&rect(400.0, 300.0), &config(40.0, 20.0, 40.0), &[0.0]).unwrap();
        let s = plan.stages();
        assert_eq!(s[0].role, StageRole::SweepLine);
        assert_eq!(s[0].entry, Point2::new(20.0, 300.0));
        assert!(s[0].trigger.distance(Point2::new(20.0, 0.0)) < 1e-9);
        // first circle: leftmost point on the exit, exits at the rightmost point
        assert!(s[1].trigger.distance(Point2::new(140.0, 0.0)) < 1e-9);
        assert!(s[2].trigger.distance(Point2::new(140.0, 300.0)) < 1e-9);
        // second circle returns to the next sweep line one shift to the right
        assert!(s[3].trigger.distance(Point2::new(60.0, 300.0)) < 1e-9);
        assert!(s[4].trigger.distance(Point2::new(60.0, 0.0)) < 1e-9);
        // both turns run the same way
        for st in s.iter().filter(|st| st.path.is_circle()) {
            let PathFunction::Circle {
                orientation, radius, ..
            } = st.path
            else {
                unreachable!()
            };
            assert_eq!(orientation, Orientation::Ccw);
            assert!(radius >= 20.0);
        }
    }

    #[test]
    fn narrow_polygon_has_single_block() {
        let plan = generate_plan(&rect(30.0, 300.0), &config(40.0, 20.0, 40.0), &[0.0]).unwrap();
        assert!(plan.len() <= PRIMITIVE_STAGES);
        assert_eq!(plan.block_of(plan.len() - 1), 0);
    }

    #[test]
    fn rejects_non_progressing_shift() {
        let err = generate_plan(&rect(400.0, 300.0), &config(40.0, 20.0, 0.0), &[0.0]).unwrap_err();
        assert!(matches!(err, PlanError::UnreachableFinalPoint(_)));
    }

    #[test]
    fn transition_uses_strict_inequality() {
        let cfg = PlanConfig {
            epsilon: Some(0.5),
            ..config(40.0, 20.0, 40.0)
        };
        let mut plan = generate_plan(&rect(400.0, 300.0), &cfg, &[0.0]).unwrap();
        let trig = plan.stages()[0].trigger;
        let eps = plan.stages()[0].trigger_radius;
        assert_eq!(plan.next_stage(trig + Point2::new(eps, 0.0)), Transition::Stay(0));
        assert_eq!(plan.advance(trig), Transition::Advanced(1));
        assert_eq!(plan.current_index(), 1);
    }

    #[test]
    fn final_stage_completes_plan() {
        let mut plan = generate_plan(&rect(400.0, 300.0), &config(40.0, 20.0, 40.0), &[0.0]).unwrap();
        let n = plan.len();
        for i in 0..n - 1 {
            let t = plan.stages()[i].trigger;
            assert_eq!(plan.advance(t), Transition::Advanced(i + 1));
        }
        assert_eq!(plan.advance(plan.final_point()), Transition::Complete);
        assert!(plan.is_complete());
    }

    #[test]
    fn offsets_hold_and_detect_perturbation() {
        let mut plan = generate_plan(&rect(400.0, 300.0), &config(40.0, 20.0, 40.0), &[0.0]).unwrap();
        let e = primitive_offsets(&plan, &[0.0]).unwrap();
        assert!(e.iter().all(|v| v.abs() < 1e-6));
        if let PathFunction::Circle { ref mut center, .. } = plan.stages_mut()[9].path {
            center.x += 0.5;
        }
        assert!(matches!(
            primitive_offsets(&plan, &[0.0]),
            Err(PlanError::NotPrimitive { .. })
        ));
    }

    #[test]
    fn offsets_hold_for_reduced_radius() {
        let plan = generate_plan(&rect(400.0, 300.0), &config(40.0, 20.0, 40.0), &[-1000.0]).unwrap();
        assert!(primitive_offsets(&plan, &[-1000.0]).is_ok());
        // evaluated against the wrong parameter the blocks no longer line up
        assert!(primitive_offsets(&plan, &[0.0]).is_err());
    }

    #[test]
    fn single_repetition_is_trivially_primitive() {
        let plan = generate_plan(&rect(30.0, 300.0), &config(40.0, 20.0, 40.0), &[0.0]).unwrap();
        assert_eq!(primitive_offsets(&plan, &[0.0]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn lower_configuration_is_shorter() {
        let poly = rect(400.0, 300.0);
        let hi = generate_plan(&poly, &config(40.0, 20.0, 40.0), &[0.0]).unwrap();
        let lo = generate_plan(&poly, &config(40.0, 20.0, 40.0), &[-1000.0]).unwrap();
        assert!(lo.path_length() < hi.path_length());
        assert!(lo.len() < hi.len());
    }

    #[test]
    fn changing_c1_rederives_pending_stages_only() {
        let poly = rect(400.0, 300.0);
        let cfg = config(40.0, 20.0, 40.0);
        let mut plan = generate_plan(&poly, &cfg, &[0.0]).unwrap();
        let before = plan.stages()[..3].to_vec();
        plan.advance(plan.stages()[0].trigger);
        assert!(plan.set_path_params(&[-1000.0]).unwrap());
        assert_eq!(&plan.stages()[..3], &before[..]);
        let PathFunction::Circle { radius, .. } = plan.stages()[3].path else {
            panic!()
        };
        assert!((radius - 600f64.sqrt()).abs() < 1e-12);
        // identical to a plan generated at the low setting from the same point on
        let lo = generate_plan(&poly, &cfg, &[-1000.0]).unwrap();
        assert_eq!(plan.len(), lo.len());
        assert!(plan.final_point().distance(lo.final_point()) < 1e-9);
        assert!(!plan.set_path_params(&[-1000.0]).unwrap());
    }

    #[test]
    fn csv_has_row_per_stage() {
        let plan = generate_plan(&rect(400.0, 300.0), &config(40.0, 20.0, 40.0), &[0.0]).unwrap();
        let mut buf = Vec::new();
        plan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), plan.len() + 1);
        assert!(text.starts_with("index,kind,point_x"));
        assert!(text.lines().nth(2).unwrap().contains(",circle,"));
    }
}
