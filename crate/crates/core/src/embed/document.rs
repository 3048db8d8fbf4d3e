//! Document and query representations.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use super::{
    quantize, token_weight, BaseVector, EmbedError, EmbeddingTable, JlMatrix, Projector,
    QuantizedVector, Result, ZERO_NORM,
};

/// One distinct token of a document, ready for averaging.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedToken {
    pub token_id: u32,
    /// Within-document occurrence count `c_t`.
    pub count: u64,
    /// Cosine-gap weight `w_t`.
    pub weight: f64,
    /// `u⊥ = P⊥ f(t)`.
    pub projected: BaseVector,
}

/// `Σ c·w·u⊥ / Σ c·w`.
pub fn weighted_mean(tokens: &[WeightedToken]) -> Result<BaseVector> {
    let first = tokens.first().ok_or(EmbedError::EmptyRepresentation)?;
    let d = first.projected.dim();
    let mut acc = vec![0.0f64; d];
    let mut mass = 0.0f64;
    for t in tokens {
        t.projected.check_dim(d)?;
        let cw = t.count as f64 * t.weight;
        if cw == 0.0 {
            continue;
        }
        mass += cw;
        acc.iter_mut().zip(t.projected.as_slice()).for_each(|(a, u)| *a += cw * u);
    }
    if mass < ZERO_NORM {
        return Err(EmbedError::EmptyRepresentation);
    }
    acc.iter_mut().for_each(|a| *a /= mass);
    BaseVector::new(acc)
}

/// Embeds a bag of `(token, count)` pairs. Tokens missing from `table` are
/// skipped; repeated tokens have their counts merged.
///
/// The result depends only on the token multiset: entries are put in table
/// row order before summation, so any permutation gives identical bytes.
pub fn embed_document<S: AsRef<str>>(
    tokens: &[(S, u32)],
    table: &EmbeddingTable,
    p: &Projector,
    r: &JlMatrix,
) -> Result<QuantizedVector> {
    check_shapes(table, p, r)?;
    let mut rows = Vec::with_capacity(tokens.len());
    for (token, count) in tokens {
        if *count == 0 {
            return Err(EmbedError::ZeroCount);
        }
        if let Some(row) = table.row_of(token.as_ref()) {
            rows.push((row, u64::from(*count)));
        }
    }
    embed_canonical(canonicalize(rows)?, r, |row| project_and_weigh(table, p, row))
}

/// Caches `u⊥` and `w_t` per table row so documents sharing tokens do not
/// redo the projection. Produces exactly the bytes [`embed_document`] does.
#[derive(Debug)]
pub struct DocumentEmbedder<'a> {
    table: &'a EmbeddingTable,
    projector: &'a Projector,
    jl: &'a JlMatrix,
    cache: Vec<OnceLock<(BaseVector, f64)>>,
}

impl<'a> DocumentEmbedder<'a> {
    pub fn new(table: &'a EmbeddingTable, projector: &'a Projector, jl: &'a JlMatrix) -> Result<Self> {
        check_shapes(table, projector, jl)?;
        Ok(Self {
            table,
            projector,
            jl,
            cache: (0..table.len()).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn table(&self) -> &EmbeddingTable {
        self.table
    }

    /// Embeds `(table row, count)` pairs.
    pub fn embed_rows(&self, rows: &[(u32, u64)]) -> Result<QuantizedVector> {
        if rows.iter().any(|&(_, c)| c == 0) {
            return Err(EmbedError::ZeroCount);
        }
        embed_canonical(canonicalize(rows.to_vec())?, self.jl, |row| Ok(self.cached(row).clone()))
    }

    /// `quantize(jl_project(u⊥))` for a single token, without weighting.
    pub fn token_vector(&self, row: u32) -> Result<QuantizedVector> {
        let (u, _) = self.cached(row);
        quantize(&self.jl.project(u)?)
    }

    fn cached(&self, row: u32) -> &(BaseVector, f64) {
        self.cache[row as usize].get_or_init(|| {
            project_and_weigh(self.table, self.projector, row).expect("shapes checked at construction")
        })
    }
}

fn check_shapes(table: &EmbeddingTable, p: &Projector, r: &JlMatrix) -> Result<()> {
    if table.dim() != p.base_dim() {
        return Err(EmbedError::DimensionMismatch { expected: p.base_dim(), found: table.dim() });
    }
    if r.cols() != p.base_dim() {
        return Err(EmbedError::DimensionMismatch { expected: p.base_dim(), found: r.cols() });
    }
    Ok(())
}

fn project_and_weigh(table: &EmbeddingTable, p: &Projector, row: u32) -> Result<(BaseVector, f64)> {
    let u = p.project(&table.base_vector(row))?;
    let w = token_weight(&u, p.projected_mean())?;
    Ok((u, w))
}

fn canonicalize(rows: Vec<(u32, u64)>) -> Result<Vec<(u32, u64)>> {
    if rows.is_empty() {
        return Err(EmbedError::UnknownAllTokens);
    }
    let mut merged = BTreeMap::new();
    for (row, count) in rows {
        let c: &mut u64 = merged.entry(row).or_default();
        *c = c.saturating_add(count);
    }
    Ok(merged.into_iter().collect())
}

fn embed_canonical(
    rows: Vec<(u32, u64)>,
    r: &JlMatrix,
    mut lookup: impl FnMut(u32) -> Result<(BaseVector, f64)>,
) -> Result<QuantizedVector> {
    let mut weighted = Vec::with_capacity(rows.len());
    for (row, count) in rows {
        let (projected, weight) = lookup(row)?;
        weighted.push(WeightedToken { token_id: row, count, weight, projected });
    }
    let mean = weighted_mean(&weighted)?;
    let z = r.project(&mean).map_err(|e| match e {
        // Weighted directions that cancel leave nothing to represent.
        EmbedError::ZeroVector => EmbedError::EmptyRepresentation,
        other => other,
    })?;
    quantize(&z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::DEFAULT_BASE_DIM;
    use proptest::prelude::*;

    fn wt(count: u64, weight: f64, u: &[f64]) -> WeightedToken {
        WeightedToken { token_id: 0, count, weight, projected: BaseVector::new(u.to_vec()).unwrap() }
    }

    fn fixture() -> (EmbeddingTable, Projector, JlMatrix) {
        let table = EmbeddingTable::from_hashed_tokens(
            ["glioma", "vegf", "angiogenesis", "bevacizumab", "tumor"],
            DEFAULT_BASE_DIM,
            3,
        )
        .unwrap();
        let mut mean = vec![0.0; DEFAULT_BASE_DIM];
        for row in 0..table.len() as u32 {
            mean.iter_mut().zip(table.row(row)).for_each(|(m, &v)| *m += f64::from(v));
        }
        let p = Projector::build(&[], &BaseVector::new(mean).unwrap()).unwrap();
        let r = JlMatrix::new(99, DEFAULT_BASE_DIM).unwrap();
        (table, p, r)
    }

    #[test]
    fn single_token_mean() {
        let m = weighted_mean(&[wt(1, 0.5, &[0.0, 2.0, 0.0])]).unwrap();
        assert_eq!(m.as_slice(), &[0.0, 2.0, 0.0]);
    }

    #[test]
    fn symmetric_average() {
        let m = weighted_mean(&[wt(2, 0.5, &[1.0, 0.0]), wt(1, 1.0, &[0.0, 1.0])]).unwrap();
        assert_eq!(m.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn zero_mass_is_empty() {
        assert!(matches!(
            weighted_mean(&[wt(3, 0.0, &[1.0, 0.0]), wt(1, 0.0, &[0.0, 1.0])]),
            Err(EmbedError::EmptyRepresentation)
        ));
        assert!(matches!(weighted_mean(&[]), Err(EmbedError::EmptyRepresentation)));
    }

    #[test]
    fn one_token_document_collapses() {
        let (table, p, r) = fixture();
        let row = table.row_of("vegf").unwrap();
        let u = p.project(&table.base_vector(row)).unwrap();
        assert!(token_weight(&u, p.projected_mean()).unwrap() > 0.0);
        let direct = quantize(&r.project(&u).unwrap()).unwrap();
        assert_eq!(embed_document(&[("vegf", 4)], &table, &p, &r).unwrap(), direct);
    }

    #[test]
    fn order_invariant() {
        let (table, p, r) = fixture();
        let a = embed_document(&[("glioma", 2), ("vegf", 1), ("tumor", 5)], &table, &p, &r).unwrap();
        let b = embed_document(&[("tumor", 5), ("glioma", 2), ("vegf", 1)], &table, &p, &r).unwrap();
        let c = embed_document(&[("tumor", 2), ("vegf", 1), ("glioma", 2), ("tumor", 3)], &table, &p, &r)
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn cached_embedder_matches_direct_path() {
        let (table, p, r) = fixture();
        let e = DocumentEmbedder::new(&table, &p, &r).unwrap();
        let names = [("angiogenesis", 3u32), ("glioma", 1), ("bevacizumab", 2)];
        let rows: Vec<_> = names.iter().map(|(t, c)| (table.row_of(t).unwrap(), u64::from(*c))).collect();
        assert_eq!(e.embed_rows(&rows).unwrap(), embed_document(&names, &table, &p, &r).unwrap());
    }

    #[test]
    fn unknown_tokens() {
        let (table, p, r) = fixture();
        assert!(matches!(
            embed_document(&[("nope", 1)], &table, &p, &r),
            Err(EmbedError::UnknownAllTokens)
        ));
        // Unknown tokens are skipped when something else is known.
        let a = embed_document(&[("nope", 1), ("vegf", 1)], &table, &p, &r).unwrap();
        assert_eq!(a, embed_document(&[("vegf", 1)], &table, &p, &r).unwrap());
    }

    #[test]
    fn mean_aligned_tokens_are_empty() {
        let d = DEFAULT_BASE_DIM;
        let mu: Vec<f32> = (0..d).map(|i| ((i % 7) as f32 - 3.0) / 10.0).collect();
        let mut table = EmbeddingTable::new(d);
        // Power-of-two multiples of the mean stay exact in f32.
        for (k, eps) in [("a", 1.0f32), ("b", 3.0), ("c", -0.5)] {
            let f: Vec<f32> = mu.iter().map(|m| m + eps * m).collect();
            table.insert(k, &f).unwrap();
        }
        let mean = BaseVector::from_f32(&mu).unwrap();
        let p = Projector::build(&[], &mean).unwrap();
        let r = JlMatrix::new(1, d).unwrap();
        let out = embed_document(&[("a", 1), ("b", 2), ("c", 1)], &table, &p, &r);
        assert!(matches!(out, Err(EmbedError::EmptyRepresentation)), "{out:?}");
    }

    proptest! {
        #[test]
        fn count_scale_invariance(
            entries in proptest::collection::vec((1u64..50, 0.01f64..2.0, -5.0f64..5.0, -5.0f64..5.0), 1..8),
            factor in 1u64..1000,
        ) {
            let base: Vec<_> = entries.iter().map(|&(c, w, x, y)| wt(c, w, &[x, y])).collect();
            let scaled: Vec<_> = entries.iter().map(|&(c, w, x, y)| wt(c * factor, w, &[x, y])).collect();
            let a = weighted_mean(&base).unwrap();
            let b = weighted_mean(&scaled).unwrap();
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
