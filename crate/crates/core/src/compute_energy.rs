//! Power of the onboard computations as a function of integer configuration.
//!
//! Measured power at a few configurations (knots) is the measurement layer; the
//! predictor interpolates linearly between adjacent knots.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ComputeError {
    #[error("cannot read profile: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed profile: {0}")]
    Parse(#[from] csv::Error),
    #[error("invalid profile row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("knot parameters must be strictly increasing (row {0})")]
    UnsortedKnots(usize),
    #[error("profile needs at least 2 knots, got {0}")]
    TooFewKnots(usize),
    #[error("configuration {0} was not measured")]
    NotMeasured(i64),
    #[error("configuration {c} outside measured range [{lo}, {hi}]")]
    OutOfRange { c: f64, lo: i64, hi: i64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Knot {
    pub param: i64,
    pub power_w: f64,
    /// Measurement interval `[t0, tf]` in seconds, kept for reference only.
    pub interval: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComputeProfile {
    pub device_id: u32,
    knots: Vec<Knot>,
}

#[derive(Deserialize)]
struct Row {
    param: i64,
    power_w: f64,
    t0: Option<f64>,
    tf: Option<f64>,
}

impl ComputeProfile {
    pub fn new(device_id: u32, knots: Vec<Knot>) -> Result<Self, ComputeError> {
        if knots.len() < 2 {
            return Err(ComputeError::TooFewKnots(knots.len()));
        }
        for (i, k) in knots.iter().enumerate() {
            if !(k.power_w.is_finite() && k.power_w >= 0.0) {
                return Err(ComputeError::BadRow {
                    row: i + 1,
                    reason: format!("power {} must be finite and non-negative", k.power_w),
                });
            }
            if i > 0 && knots[i - 1].param >= k.param {
                return Err(ComputeError::UnsortedKnots(i + 1));
            }
        }
        Ok(Self { device_id, knots })
    }

    /// Parses CSV with header `param,power_w,t0,tf` (`t0`, `tf` may be empty or absent).
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, ComputeError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut knots = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row?;
            let interval = match (row.t0, row.tf) {
                (Some(a), Some(b)) => Some((a, b)),
                (None, None) => None,
                _ => {
                    return Err(ComputeError::BadRow {
                        row: i + 1,
                        reason: "t0 and tf must be given together".into(),
                    })
                }
            };
            knots.push(Knot {
                param: row.param,
                power_w: row.power_w,
                interval,
            });
        }
        Self::new(1, knots)
    }

    pub fn load(path: &Path) -> Result<Self, ComputeError> {
        Self::from_reader(File::open(path)?)
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn min_param(&self) -> i64 {
        self.knots[0].param
    }

    pub fn max_param(&self) -> i64 {
        self.knots[self.knots.len() - 1].param
    }

    /// Recorded power at a measured configuration.
    pub fn gamma(&self, c: i64) -> Result<f64, ComputeError> {
        self.knots
            .binary_search_by_key(&c, |k| k.param)
            .map(|i| self.knots[i].power_w)
            .map_err(|_| ComputeError::NotMeasured(c))
    }

    /// Piecewise-linear prediction between adjacent knots; exact at knots.
    pub fn predict(&self, c: f64) -> Result<f64, ComputeError> {
        let (lo, hi) = (self.min_param(), self.max_param());
        if !(c >= lo as f64 && c <= hi as f64) {
            return Err(ComputeError::OutOfRange { c, lo, hi });
        }
        // first knot with param >= c
        let i = self.knots.partition_point(|k| (k.param as f64) < c);
        let right = &self.knots[i];
        if right.param as f64 == c {
            return Ok(right.power_w);
        }
        let left = &self.knots[i - 1];
        let (x0, x1) = (left.param as f64, right.param as f64);
        Ok((right.power_w - left.power_w) * (c - x0) / (x1 - x0) + left.power_w)
    }
}
