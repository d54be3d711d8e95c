//! Planar primitives in the world frame (x east, y north, meters).

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used when deciding whether two points coincide.
pub const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn normalized(self) -> Option<Point2> {
        let n = self.norm();
        (n > GEOM_EPS).then(|| self * (1.0 / n))
    }

    /// Rotated +90 degrees (counter-clockwise).
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn from_angle(theta: f64) -> Point2 {
        Point2::new(theta.cos(), theta.sin())
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PolygonError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon vertex {0} is not finite")]
    NonFinite(usize),
    #[error("polygon is not strictly convex at vertex {0}")]
    NotConvex(usize),
    #[error("polygon has zero area")]
    ZeroArea,
}

/// Convex polygon with vertices ordered clockwise from the top-left-most vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point2>,
}

impl Polygon {
    /// Validates convexity and normalizes the ordering: counter-clockwise input is
    /// reversed and the list is rotated so that the top-left-most vertex (highest y,
    /// then lowest x) comes first.
    pub fn new(vertices: Vec<Point2>) -> Result<Self, PolygonError> {
        let n = vertices.len();
        if n < 3 {
            return Err(PolygonError::TooFewVertices(n));
        }
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(PolygonError::NonFinite(i));
        }
        let mut vertices = vertices;
        let area = signed_area(&vertices);
        if area.abs() <= GEOM_EPS {
            return Err(PolygonError::ZeroArea);
        }
        if area > 0.0 {
            vertices.reverse();
        }
        // clockwise: every turn is to the right
        for i in 0..n {
            let a = vertices[(i + n - 1) % n];
            let b = vertices[i];
            let c = vertices[(i + 1) % n];
            if (b - a).cross(c - b) >= -GEOM_EPS {
                return Err(PolygonError::NotConvex(i));
            }
        }
        let first = (0..n)
            .max_by(|&i, &j| {
                let (a, b) = (vertices[i], vertices[j]);
                a.y.total_cmp(&b.y).then(b.x.total_cmp(&a.x))
            })
            .unwrap_or(0);
        vertices.rotate_left(first);
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).abs()
    }

    /// Direction from the last vertex to the first one; sweep lines run parallel to it.
    pub fn sweep_direction(&self) -> Point2 {
        let n = self.vertices.len();
        (self.vertices[0] - self.vertices[n - 1])
            .normalized()
            .unwrap_or(Point2::new(0.0, 1.0))
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    /// Signed distance to the boundary: positive inside, negative outside.
    pub fn signed_boundary_distance(&self, p: Point2) -> f64 {
        // Minimum over edge half-planes; exact inside, sign-correct outside.
        // Clockwise ordering puts the interior to the right of each edge.
        self.edges()
            .map(|(a, b)| {
                let d = (b - a).normalized().unwrap_or_default();
                -d.cross(p - a)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.edges().all(|(a, b)| (b - a).cross(p - a) <= GEOM_EPS)
    }

    /// Chord of the infinite line `origin + s * dir` with the polygon, as the
    /// parameter interval `[s_min, s_max]`. `None` when the line misses.
    pub fn line_chord(&self, origin: Point2, dir: Point2) -> Option<(f64, f64)> {
        // Cyrus-Beck clipping against the clockwise half-planes.
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (a, b) in self.edges() {
            let e = b - a;
            // inside when e x (p - a) <= 0
            let num = e.cross(origin - a);
            let den = e.cross(dir);
            if den.abs() <= 1e-15 {
                if num > GEOM_EPS {
                    return None;
                }
                continue;
            }
            let s = -num / den;
            if den > 0.0 {
                hi = hi.min(s);
            } else {
                lo = lo.max(s);
            }
        }
        (lo <= hi && lo.is_finite() && hi.is_finite()).then_some((lo, hi))
    }

    /// Intersections of a circle with the polygon boundary.
    pub fn circle_intersections(&self, center: Point2, radius: f64) -> Vec<Point2> {
        let mut out: Vec<Point2> = Vec::new();
        for (a, b) in self.edges() {
            let d = b - a;
            let f = a - center;
            let qa = d.dot(d);
            let qb = 2.0 * f.dot(d);
            let qc = f.dot(f) - radius * radius;
            let disc = qb * qb - 4.0 * qa * qc;
            if disc < 0.0 {
                continue;
            }
            let sq = disc.sqrt();
            for s in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
                if (-1e-12..=1.0 + 1e-12).contains(&s) {
                    let p = a + d * s;
                    if !out.iter().any(|q| q.distance(p) < 1e-7) {
                        out.push(p);
                    }
                }
            }
        }
        out
    }
}

fn signed_area(v: &[Point2]) -> f64 {
    let n = v.len();
    (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>() / 2.0
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 <= GEOM_EPS * GEOM_EPS {
        return p.distance(a);
    }
    let s = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * s)
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}
