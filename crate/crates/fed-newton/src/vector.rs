//! Flat parameter vectors.
//!
//! Every solver in this crate works on plain dense vectors; the only
//! operations needed are dot products, norms, and scaled in-place updates,
//! so `ParamVector` is a thin wrapper over `Vec<f64>`.

use std::ops::{Deref, DerefMut};

#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// self += c * other
    pub fn add_scaled(&mut self, c: f64, other: &Self) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in &mut self.0 {
            *a *= c;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|a| a.is_finite())
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
    fn from(values: Vec<f64>) -> Self {
        ParamVector(values)
    }
}

impl FromIterator<f64> for ParamVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        ParamVector(iter.into_iter().collect())
    }
}

/// Mean of `vectors` accumulated in ascending slice order.
pub(crate) fn mean_of(vectors: &[ParamVector]) -> ParamVector {
    assert!(!vectors.is_empty());
    let mut out = ParamVector::zeros(vectors[0].len());
    for v in vectors {
        out.add_scaled(1.0, v);
    }
    out.scale(1.0 / vectors.len() as f64);
    out
}
