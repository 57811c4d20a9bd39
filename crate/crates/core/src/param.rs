//! Parameter vectors and optimizer state.

use std::ops::{Deref, Index};

use crate::error::{check_dim, Error, Result};

/// Flat coordinate vector of the optimization variable, or of one of the
/// elementwise companion buffers (momentum, second-moment estimator).
///
/// All coordinates are finite. Elementwise arithmetic is provided by the
/// free helpers in this module rather than operator overloads so that
/// the order of floating point operations in the steppers stays explicit.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("coordinate {i} = {}", coords[i])));
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim.max(1)])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Self(vec![value; dim.max(1)])
    }

    /// Wraps coordinates produced by internal arithmetic. Finiteness is
    /// re-checked by the runner after every step.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, c| acc.max(c.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&c| f(c)).collect())
    }

    /// Elementwise binary map; dimensions must agree.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect()))
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// The triple (x, m, v) plus the iteration counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub x: ParamVector,
    pub m: ParamVector,
    pub v: ParamVector,
    pub k: u64,
}

impl OptimizerState {
    pub fn new(x: ParamVector, m: ParamVector, v: ParamVector) -> Result<Self> {
        check_dim(x.dim(), m.dim())?;
        check_dim(x.dim(), v.dim())?;
        Ok(Self { x, m, v, k: 0 })
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.m.is_finite() && self.v.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(ParamVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(ParamVector::new(vec![f64::INFINITY]).is_err());
        assert!(ParamVector::new(vec![]).is_err());
        assert_eq!(ParamVector::new(vec![3.0, 4.0]).unwrap().norm(), 5.0);
    }

    #[test]
    fn state_requires_shared_dimension() {
        let err = OptimizerState::new(ParamVector::zeros(2), ParamVector::zeros(3), ParamVector::zeros(2));
        assert_eq!(err.unwrap_err(), Error::DimensionMismatch { expected: 2, actual: 3 });
    }
}
