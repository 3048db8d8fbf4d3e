use super::{EmbedError, Result, REDUCED_DIM, ZERO_NORM};

/// A vector in the base embedding space `ℝ^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseVector(pub(crate) Vec<f64>);

impl BaseVector {
    /// Wraps `components`, rejecting NaN and infinities.
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.iter().any(|c| !c.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        Ok(Self(components))
    }

    pub fn from_f32(components: &[f32]) -> Result<Self> {
        Self::new(components.iter().map(|&c| f64::from(c)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn dot(&self, other: &BaseVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(EmbedError::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

impl AsRef<[f64]> for BaseVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A 256-dimensional vector, unit norm when produced by [`super::jl_project`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedVector(Box<[f64; REDUCED_DIM]>);

impl ReducedVector {
    /// Wraps raw components. No normalization is applied; use
    /// [`ReducedVector::normalized`] for that.
    pub fn from_components(components: [f64; REDUCED_DIM]) -> Self {
        Self(Box::new(components))
    }

    /// Scales `components` to unit norm.
    pub fn normalized(mut components: [f64; REDUCED_DIM]) -> Result<Self> {
        if components.iter().any(|c| !c.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        let n = norm(&components);
        if n < ZERO_NORM {
            return Err(EmbedError::ZeroVector);
        }
        components.iter_mut().for_each(|c| *c /= n);
        Ok(Self(Box::new(components)))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0[..]
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0[..])
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
