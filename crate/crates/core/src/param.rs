//! Flat parameter vectors.
//!
//! Models, local updates, control variates and gradient caches all live in
//! the same dense `f64` representation so that every algorithm in the crate
//! manipulates them with the same handful of primitives.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense vector of model coordinates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

/// `sign` with `sign(0) = 0`, as used by every ℓ1 subgradient in the crate.
#[inline]
pub fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn check_len(&self, expected: usize) -> Result<()> {
        if self.0.len() == expected {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected,
                got: self.0.len(),
            })
        }
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &[f64]) {
        debug_assert_eq!(self.0.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.0.iter_mut().for_each(|v| *v *= alpha);
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &[f64]) -> ParamVector {
        debug_assert_eq!(self.0.len(), other.len());
        ParamVector(self.0.iter().zip(other).map(|(a, b)| a - b).collect())
    }

    /// Elementwise `self + other`.
    pub fn add(&self, other: &[f64]) -> ParamVector {
        debug_assert_eq!(self.0.len(), other.len());
        ParamVector(self.0.iter().zip(other).map(|(a, b)| a + b).collect())
    }

    pub fn signs(&self) -> ParamVector {
        ParamVector(self.0.iter().map(|&v| sign0(v)).collect())
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Mean of a non-empty set of equally sized vectors, summed in the order given.
    pub fn mean<'a>(vectors: impl IntoIterator<Item = &'a ParamVector>, len: usize) -> ParamVector {
        let mut acc = ParamVector::zeros(len);
        let mut count = 0usize;
        for v in vectors {
            acc.axpy(1.0, v);
            count += 1;
        }
        if count > 0 {
            acc.scale(1.0 / count as f64);
        }
        acc
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}
