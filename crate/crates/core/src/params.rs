//! Path and computation parameters with their per-stage bound sets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("bound [{lo}, {hi}] is empty or not finite")]
    BadBound { lo: f64, hi: f64 },
    #[error("computation bound [{lo}, {hi}] must be non-negative integers")]
    NonIntegerCompute { lo: f64, hi: f64 },
    #[error("expected {expected} parameters, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("parameter {index} = {value} outside [{lo}, {hi}]")]
    OutOfBounds { index: usize, value: f64, lo: f64, hi: f64 },
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
}

impl Bound {
    pub fn new(lo: f64, hi: f64) -> Result<Self, ParamError> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(ParamError::BadBound { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    /// Maps `v` to `[0, 1]`; a zero-width bound maps to 0.
    pub fn normalize(&self, v: f64) -> f64 {
        if self.width() > 0.0 {
            (v - self.lo) / self.width()
        } else {
            0.0
        }
    }
}

/// Bound sets for the `rho` path and `sigma` computation parameters of a stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub path: Vec<Bound>,
    pub compute: Vec<Bound>,
}

impl ParamBounds {
    pub fn new(path: Vec<Bound>, compute: Vec<Bound>) -> Result<Self, ParamError> {
        for b in &compute {
            let integral = b.lo.fract() == 0.0 && b.hi.fract() == 0.0;
            if !integral || b.lo < 0.0 {
                return Err(ParamError::NonIntegerCompute { lo: b.lo, hi: b.hi });
            }
        }
        Ok(Self { path, compute })
    }

    pub fn rho(&self) -> usize {
        self.path.len()
    }

    pub fn sigma(&self) -> usize {
        self.compute.len()
    }

    pub fn n(&self) -> usize {
        self.rho() + self.sigma()
    }

    /// Bounds in `[path.., compute..]` order.
    pub fn all(&self) -> impl Iterator<Item = &Bound> {
        self.path.iter().chain(self.compute.iter())
    }

    pub fn lower(&self) -> ParamVector {
        ParamVector {
            path: self.path.iter().map(|b| b.lo).collect(),
            compute: self.compute.iter().map(|b| b.lo).collect(),
        }
    }

    pub fn upper(&self) -> ParamVector {
        ParamVector {
            path: self.path.iter().map(|b| b.hi).collect(),
            compute: self.compute.iter().map(|b| b.hi).collect(),
        }
    }

    pub fn check(&self, c: &ParamVector) -> Result<(), ParamError> {
        if c.path.len() != self.rho() {
            return Err(ParamError::LengthMismatch {
                expected: self.rho(),
                got: c.path.len(),
            });
        }
        if c.compute.len() != self.sigma() {
            return Err(ParamError::LengthMismatch {
                expected: self.sigma(),
                got: c.compute.len(),
            });
        }
        for (index, (b, value)) in self.all().zip(c.iter()).enumerate() {
            if !b.contains(value) {
                return Err(ParamError::OutOfBounds {
                    index,
                    value,
                    lo: b.lo,
                    hi: b.hi,
                });
            }
        }
        Ok(())
    }

    /// Per-entry `(c - lo) / (hi - lo)` in `[path.., compute..]` order.
    pub fn normalize(&self, c: &ParamVector) -> Vec<f64> {
        self.all().zip(c.iter()).map(|(b, v)| b.normalize(v)).collect()
    }
}

/// Parameter row `[path.., compute..]`. Computation entries are integer-valued
/// when applied but are carried as reals while optimizing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub path: Vec<f64>,
    pub compute: Vec<f64>,
}

impl ParamVector {
    pub fn new(path: Vec<f64>, compute: Vec<f64>) -> Self {
        Self { path, compute }
    }

    pub fn len(&self) -> usize {
        self.path.len() + self.compute.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.path.iter().chain(self.compute.iter()).copied()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.iter().collect()
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

    #[test]
    fn bound_validation() {
        assert!(Bound::new(1.0, 0.0).is_err());
        assert!(Bound::new(f64::NAN, 0.0).is_err());
        assert!(ParamBounds::new(vec![], vec![Bound::new(1.5, 3.0).unwrap()]).is_err());
    }

    #[test]
    fn normalization_and_check() {
        let b = bounds();
        let c = ParamVector::new(vec![-500.0], vec![6.0]);
        assert_eq!(b.normalize(&c), vec![0.5, 0.5]);
        assert!(b.check(&c).is_ok());
        let bad = ParamVector::new(vec![10.0], vec![6.0]);
        assert!(matches!(b.check(&bad), Err(ParamError::OutOfBounds { index: 0, .. })));
        assert_eq!(b.lower().to_vec(), vec![-1000.0, 2.0]);
        assert_eq!(b.upper().to_vec(), vec![0.0, 10.0]);
    }
}
