//! Energy-aware coverage planning and computation scheduling for fixed-wing
//! aerial robots.
//!
//! The crate builds Zamboni-like coverage plans over convex polygons, models the
//! robot's total power draw as a harmonic state-space system, and re-plans path
//! and computation parameters online against a battery model.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod battery;
pub mod compute_energy;
pub mod coverage;
pub mod energy_model;
pub mod estimator;
pub mod geometry;
pub mod params;
pub mod replanner;
pub mod simulator;

pub use geometry::{Point2, Polygon};
pub use params::{Bound, ParamBounds, ParamVector};
