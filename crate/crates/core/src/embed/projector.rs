//! Nuisance-axis removal and the cosine-gap token weight.

use super::vector::{dot, norm};
use super::{BaseVector, EmbedError, Result, BASIS_RESIDUAL, ZERO_NORM};

/// Orthogonal projector onto the complement of the nuisance axes.
///
/// `basis[0]` is always the corpus mean direction; the remaining vectors are
/// the orthonormalized residuals of the user-supplied nuisance axes.
///
/// `projected_mean` is the reference direction for token weighting: the
/// corpus mean with every nuisance axis except the mean itself removed.
/// Removing the mean too would leave the zero vector, so it is kept out of
/// that particular projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    basis: Vec<BaseVector>,
    projected_mean: BaseVector,
    base_dim: usize,
}

impl Projector {
    /// Orthonormalizes `{corpus_mean} ∪ nuisance_axes` with modified
    /// Gram–Schmidt (mean first), dropping residuals shorter than `1e-9`.
    pub fn build(nuisance_axes: &[BaseVector], corpus_mean: &BaseVector) -> Result<Self> {
        let d = corpus_mean.dim();
        for axis in nuisance_axes {
            axis.check_dim(d)?;
        }
        if corpus_mean.norm() < ZERO_NORM {
            return Err(EmbedError::DegenerateMean);
        }

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(nuisance_axes.len() + 1);
        for v in std::iter::once(corpus_mean).chain(nuisance_axes) {
            let mut w = v.as_slice().to_vec();
            // Two sweeps: the second removes what rounding left behind.
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
                }
            }
            let n = norm(&w);
            if n < BASIS_RESIDUAL {
                continue;
            }
            w.iter_mut().for_each(|wi| *wi /= n);
            basis.push(w);
        }
        if basis.len() >= d {
            return Err(EmbedError::NuisanceSpansSpace(d));
        }

        let mut mu = corpus_mean.as_slice().to_vec();
        for q in basis.iter().skip(1) {
            let c = dot(q, &mu);
            mu.iter_mut().zip(q).for_each(|(mi, qi)| *mi -= c * qi);
        }

        Ok(Self {
            basis: basis.into_iter().map(BaseVector).collect(),
            projected_mean: BaseVector(mu),
            base_dim: d,
        })
    }

    /// Reassembles a projector from stored parts, re-checking orthonormality.
    pub fn from_parts(basis: Vec<BaseVector>, projected_mean: BaseVector) -> Result<Self> {
        let d = projected_mean.dim();
        if basis.is_empty() || basis.len() >= d {
            return Err(EmbedError::InvalidProjector("basis size must be in [1, d)"));
        }
        for (i, a) in basis.iter().enumerate() {
            a.check_dim(d)?;
            for (j, b) in basis.iter().enumerate().take(i + 1) {
                let expected = if i == j { 1.0 } else { 0.0 };
                if (a.dot(b) - expected).abs() > 1e-6 {
                    return Err(EmbedError::InvalidProjector("basis is not orthonormal"));
                }
            }
        }
        if projected_mean.norm() < ZERO_NORM {
            return Err(EmbedError::DegenerateMean);
        }
        Ok(Self {
            basis,
            projected_mean,
            base_dim: d,
        })
    }

    pub fn basis(&self) -> &[BaseVector] {
        &self.basis
    }

    pub fn projected_mean(&self) -> &BaseVector {
        &self.projected_mean
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    /// `u⊥ = f − Q(Qᵀf)`.
    pub fn project(&self, f: &BaseVector) -> Result<BaseVector> {
        f.check_dim(self.base_dim)?;
        let mut u = f.as_slice().to_vec();
        for q in &self.basis {
            let c = dot(q.as_slice(), &u);
            u.iter_mut().zip(q.as_slice()).for_each(|(ui, qi)| *ui -= c * qi);
        }
        Ok(BaseVector(u))
    }
}

/// Cosine-gap weight `1 − cos(u, μ⊥)`, in `[0, 2]`.
///
/// A token with `‖u‖ < 1e-12` carries nothing off the removed axes and
/// gets weight 0.
pub fn token_weight(u: &BaseVector, mu_perp: &BaseVector) -> Result<f64> {
    u.check_dim(mu_perp.dim())?;
    let mu_norm = mu_perp.norm();
    if mu_norm < ZERO_NORM {
        return Err(EmbedError::DegenerateMean);
    }
    let u_norm = u.norm();
    if u_norm < ZERO_NORM {
        return Ok(0.0);
    }
    let cos = (u.dot(mu_perp) / (u_norm * mu_norm)).clamp(-1.0, 1.0);
    Ok(1.0 - cos)
}
