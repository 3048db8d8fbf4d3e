//! Symmetric int8 quantization and exact integer cosine.
//!
//! Each unit vector is scaled so that its largest-magnitude component maps
//! to ±127. Cosine is scale-invariant, so the per-vector scale is not stored.

use super::{EmbedError, ReducedVector, Result, NORM_SLACK, QUANT_MAX, REDUCED_DIM};

/// 256 int8 components in `[-127, 127]`, not all zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuantizedVector([i8; REDUCED_DIM]);

impl QuantizedVector {
    pub fn from_components(components: [i8; REDUCED_DIM]) -> Result<Self> {
        if components.iter().any(|&c| c == i8::MIN) {
            return Err(EmbedError::InvalidQuantized("component -128"));
        }
        if components.iter().all(|&c| c == 0) {
            return Err(EmbedError::InvalidQuantized("all components zero"));
        }
        Ok(Self(components))
    }

    /// Validates a stored row. `None` for all-zero rows.
    pub fn from_slice(row: &[i8]) -> Result<Option<Self>> {
        let arr: [i8; REDUCED_DIM] = row
            .try_into()
            .map_err(|_| EmbedError::DimensionMismatch { expected: REDUCED_DIM, found: row.len() })?;
        if arr.iter().all(|&c| c == 0) {
            return Ok(None);
        }
        Self::from_components(arr).map(Some)
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn components(&self) -> &[i8; REDUCED_DIM] {
        &self.0
    }

    pub fn norm_sq(&self) -> i32 {
        dot_i8(&self.0, &self.0)
    }

    /// Unit-norm float direction of this vector.
    pub fn dequantize(&self) -> [f64; REDUCED_DIM] {
        dequantize_row(&self.0)
    }
}

/// Unit-norm float direction of an int8 row; all-zero rows map to zeros.
pub fn dequantize_row(row: &[i8]) -> [f64; REDUCED_DIM] {
    let n = f64::from(dot_i8(row, row)).sqrt();
    let mut out = [0.0; REDUCED_DIM];
    if n > 0.0 {
        out.iter_mut().zip(row).for_each(|(o, &q)| *o = f64::from(q) / n);
    }
    out
}

pub fn quantize(z: &ReducedVector) -> Result<QuantizedVector> {
    let n = z.norm();
    if !n.is_finite() || (n - 1.0).abs() > NORM_SLACK {
        return Err(EmbedError::NotNormalized(n));
    }
    let max_abs = z.as_slice().iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let scale = f64::from(QUANT_MAX) / max_abs;
    let mut q = [0i8; REDUCED_DIM];
    for (qi, &zi) in q.iter_mut().zip(z.as_slice()) {
        *qi = (zi * scale).round().clamp(-f64::from(QUANT_MAX), f64::from(QUANT_MAX)) as i8;
    }
    QuantizedVector::from_components(q)
}

/// Exact integer dot product; `|result| ≤ 256·127² = 4,129,024`.
#[inline]
pub fn dot_i8(a: &[i8], b: &[i8]) -> i32 {
    a.iter().zip(b).map(|(&x, &y)| i32::from(x) * i32::from(y)).sum()
}

/// `dot / sqrt(‖a‖²·‖b‖²)` with the product of squared norms formed exactly
/// in integers, so a vector's cosine with itself is exactly 1.
#[inline]
pub fn cosine_from_parts(dot: i32, norm_sq_a: i32, norm_sq_b: i32) -> f64 {
    let denom = ((norm_sq_a as u64 * norm_sq_b as u64) as f64).sqrt();
    (f64::from(dot) / denom).clamp(-1.0, 1.0)
}

/// Cosine of two int8 rows, `None` if either is all-zero.
pub fn cosine_i8(a: &[i8], b: &[i8]) -> Option<f64> {
    let (na, nb) = (dot_i8(a, a), dot_i8(b, b));
    if na == 0 || nb == 0 {
        return None;
    }
    Some(cosine_from_parts(dot_i8(a, b), na, nb))
}

pub fn cosine_q(a: &QuantizedVector, b: &QuantizedVector) -> Result<f64> {
    cosine_i8(&a.0, &b.0).ok_or(EmbedError::ZeroVector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_unit(rng: &mut ChaCha8Rng) -> ReducedVector {
        let mut v = [0.0; REDUCED_DIM];
        v.iter_mut().for_each(|x| *x = StandardNormal.sample(rng));
        ReducedVector::normalized(v).unwrap()
    }

    fn float_cos(a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        d / (na * nb)
    }

    #[test]
    fn extremal_coordinate() {
        let mut e1 = [0.0; REDUCED_DIM];
        e1[0] = 1.0;
        let q = quantize(&ReducedVector::from_components(e1)).unwrap();
        assert_eq!(q.as_slice()[0], 127);
        assert!(q.as_slice()[1..].iter().all(|&c| c == 0));
    }

    #[test]
    fn uniform_vector_saturates() {
        let q = quantize(&ReducedVector::from_components([1.0 / 16.0; REDUCED_DIM])).unwrap();
        assert!(q.as_slice().iter().all(|&c| c == 127));
        let mut mixed = [1.0 / 16.0; REDUCED_DIM];
        mixed[5] = -1.0 / 16.0;
        let q = quantize(&ReducedVector::from_components(mixed)).unwrap();
        assert_eq!(q.as_slice()[5], -127);
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(matches!(
            quantize(&ReducedVector::from_components([0.5; REDUCED_DIM])),
            Err(EmbedError::NotNormalized(_))
        ));
    }

    #[test]
    fn component_validation() {
        let mut c = [0i8; REDUCED_DIM];
        assert!(QuantizedVector::from_components(c).is_err());
        c[3] = i8::MIN;
        assert!(QuantizedVector::from_components(c).is_err());
        c[3] = -127;
        assert!(QuantizedVector::from_components(c).is_ok());
        assert!(QuantizedVector::from_slice(&[0i8; REDUCED_DIM]).unwrap().is_none());
    }

    #[test]
    fn self_and_orthogonal_cosine() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let q = quantize(&random_unit(&mut rng)).unwrap();
            assert_eq!(cosine_q(&q, &q).unwrap(), 1.0);
        }
        let mut a = [0i8; REDUCED_DIM];
        let mut b = [0i8; REDUCED_DIM];
        a[0] = 127;
        b[1] = 127;
        let (a, b) = (QuantizedVector::from_components(a).unwrap(), QuantizedVector::from_components(b).unwrap());
        assert_eq!(cosine_q(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn round_trip_fidelity() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut worst = f64::INFINITY;
        for _ in 0..10_000 {
            let z = random_unit(&mut rng);
            let back = quantize(&z).unwrap().dequantize();
            worst = worst.min(float_cos(z.as_slice(), &back));
        }
        assert!(worst >= 0.999, "worst round-trip cosine {worst}");
    }

    #[test]
    fn int8_cosine_tracks_float_cosine() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut worst = 0.0f64;
        for _ in 0..10_000 {
            let (u, v) = (random_unit(&mut rng), random_unit(&mut rng));
            let exact = float_cos(u.as_slice(), v.as_slice());
            let approx = cosine_q(&quantize(&u).unwrap(), &quantize(&v).unwrap()).unwrap();
            worst = worst.max((exact - approx).abs());
        }
        assert!(worst <= 0.01, "worst deviation {worst}");
    }
}
