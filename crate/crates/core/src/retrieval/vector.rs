use serde::{Deserialize, Serialize};

use super::{RetrievalError, Scalar};

/// Fixed-length embedding; all components finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding<T> {
    values: Vec<T>,
}

impl<T: Scalar> Embedding<T> {
    pub fn new(values: Vec<T>) -> Result<Self, RetrievalError> {
        if values.is_empty() {
            return Err(RetrievalError::DimensionMismatch { expected: 1, found: 0 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RetrievalError::NonFinite);
        }
        Ok(Embedding { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn norm(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
    }

    pub fn scaled(&self, factor: T) -> Result<Self, RetrievalError> {
        Embedding::new(self.values.iter().map(|&v| v * factor).collect())
    }

    /// Re-validates after deserialization.
    pub(crate) fn check(&self) -> Result<(), RetrievalError> {
        if self.values.is_empty() || self.values.iter().any(|v| !v.is_finite()) {
            return Err(RetrievalError::NonFinite);
        }
        Ok(())
    }
}

/// `dot(a, b) / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine_similarity<T: Scalar>(a: &Embedding<T>, b: &Embedding<T>) -> Result<T, RetrievalError> {
    if a.dim() != b.dim() {
        return Err(RetrievalError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == T::zero() || nb == T::zero() {
        return Err(RetrievalError::ZeroVector);
    }
    let dot = a
        .values
        .iter()
        .zip(&b.values)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y);
    let sim = dot / (na * nb);
    Ok(sim.max(-T::one()).min(T::one()))
}
