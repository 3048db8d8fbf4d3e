use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::ops::Range;

use serde::Serialize;

use crate::embed::{cosine_from_parts, dot_i8, QuantizedVector};

use super::{DocVectors, Result, SearchError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchHit {
    pub doc_id: u64,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Ordered so that `a > b` means `a` ranks ahead of `b`.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    score: f64,
    doc_id: u64,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score.total_cmp(&other.score).then_with(|| other.doc_id.cmp(&self.doc_id))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

/// Best-first top-`k` of `rows`, skipping all-zero rows.
fn scan(store: &impl DocVectors, query: &[i8], query_norm_sq: i32, rows: Range<usize>, k: usize) -> Vec<Candidate> {
    let mut heap: BinaryHeap<Reverse<Candidate>> = BinaryHeap::with_capacity(k + 1);
    for row in rows {
        let v = store.vector(row);
        let norm_sq = dot_i8(v, v);
        if norm_sq == 0 {
            continue;
        }
        let cand = Candidate { score: cosine_from_parts(dot_i8(query, v), query_norm_sq, norm_sq), doc_id: store.doc_id(row) };
        if heap.len() < k {
            heap.push(Reverse(cand));
        } else if let Some(Reverse(worst)) = heap.peek() {
            if cand > *worst {
                heap.pop();
                heap.push(Reverse(cand));
            }
        }
    }
    // Ascending order of Reverse(c) is best-first.
    heap.into_sorted_vec().into_iter().map(|Reverse(c)| c).collect()
}

fn prepare(query: &QuantizedVector, k: usize) -> Result<i32> {
    if k == 0 {
        return Err(SearchError::InvalidK);
    }
    let norm_sq = query.norm_sq();
    if norm_sq == 0 {
        return Err(SearchError::ZeroQuery);
    }
    Ok(norm_sq)
}

fn into_hits(cands: impl IntoIterator<Item = Candidate>) -> Vec<SearchHit> {
    cands
        .into_iter()
        .enumerate()
        .map(|(i, c)| SearchHit { doc_id: c.doc_id, score: c.score, rank: i + 1 })
        .collect()
}

/// Exact top-`k` by int8 cosine over every row.
pub fn knn(store: &impl DocVectors, query: &QuantizedVector, k: usize) -> Result<Vec<SearchHit>> {
    let qn = prepare(query, k)?;
    Ok(into_hits(scan(store, query.as_slice(), qn, 0..store.len(), k)))
}

/// [`knn`] over `workers` contiguous shards, merged k-way. The result does
/// not depend on `workers`.
pub fn knn_parallel(
    store: &impl DocVectors,
    query: &QuantizedVector,
    k: usize,
    workers: usize,
) -> Result<Vec<SearchHit>> {
    if workers == 0 {
        return Err(SearchError::InvalidWorkerCount);
    }
    let qn = prepare(query, k)?;
    let n = store.len();
    let shard = n.div_ceil(workers).max(1);
    let q = query.as_slice();
    let shards: Vec<Vec<Candidate>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..n)
            .step_by(shard)
            .map(|start| s.spawn(move || scan(store, q, qn, start..(start + shard).min(n), k)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("scan worker panicked")).collect()
    });
    Ok(into_hits(merge(shards, k)))
}

/// k-way merge of best-first lists, keeping the first `k`.
fn merge(lists: Vec<Vec<Candidate>>, k: usize) -> Vec<Candidate> {
    let mut heads: BinaryHeap<(Candidate, Reverse<usize>, usize)> = lists
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.first().map(|&c| (c, Reverse(i), 0)))
        .collect();
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let Some((c, Reverse(list), pos)) = heads.pop() else { break };
        out.push(c);
        if let Some(&next) = lists[list].get(pos + 1) {
            heads.push((next, Reverse(list), pos + 1));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::REDUCED_DIM;
    use crate::search::InMemoryVectors;
    use proptest::prelude::*;

    fn onehot(i: usize, v: i8) -> [i8; REDUCED_DIM] {
        let mut a = [0i8; REDUCED_DIM];
        a[i] = v;
        a
    }

    fn qv(a: [i8; REDUCED_DIM]) -> QuantizedVector {
        QuantizedVector::from_components(a).unwrap()
    }

    #[test]
    fn self_retrieval_and_zero_rows() {
        let mut store = InMemoryVectors::new();
        store.push(10, &onehot(0, 127));
        store.push(11, &[0; REDUCED_DIM]);
        store.push(12, &onehot(1, 50));
        let hits = knn(&store, &qv(onehot(0, 127)), 10).unwrap();
        assert_eq!(hits.len(), 2);
        assert_eq!((hits[0].doc_id, hits[0].score, hits[0].rank), (10, 1.0, 1));
        assert_eq!((hits[1].doc_id, hits[1].score, hits[1].rank), (12, 0.0, 2));
    }

    #[test]
    fn ties_break_by_doc_id() {
        let mut store = InMemoryVectors::new();
        for id in [9, 3, 7] {
            store.push(id, &onehot(0, 100));
        }
        let ids: Vec<_> = knn(&store, &qv(onehot(0, 1)), 3).unwrap().iter().map(|h| h.doc_id).collect();
        assert_eq!(ids, vec![3, 7, 9]);
        assert_eq!(knn(&store, &qv(onehot(0, 1)), 2).unwrap().len(), 2);
    }

    #[test]
    fn errors_and_empty() {
        let store = InMemoryVectors::new();
        let q = qv(onehot(0, 1));
        assert!(matches!(knn(&store, &q, 0), Err(SearchError::InvalidK)));
        assert!(matches!(knn_parallel(&store, &q, 1, 0), Err(SearchError::InvalidWorkerCount)));
        assert!(knn_parallel(&store, &q, 5, 4).unwrap().is_empty());
        assert!(knn(&store, &q, 5).unwrap().is_empty());
    }

    fn arb_store() -> impl Strategy<Value = Vec<(u64, Vec<i8>)>> {
        proptest::collection::vec((0u64..60, proptest::collection::vec(-3i8..=3, REDUCED_DIM)), 0..40)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn parallel_matches_serial_and_prefixes(rows in arb_store(), k in 1usize..12, workers in 1usize..9) {
            let mut store = InMemoryVectors::new();
            let mut seen = std::collections::HashSet::new();
            for (id, v) in &rows {
                if seen.insert(*id) {
                    store.push(*id, v);
                }
            }
            let q = qv(onehot(3, 1));
            let serial = knn(&store, &q, k).unwrap();
            prop_assert_eq!(&serial, &knn_parallel(&store, &q, k, workers).unwrap());
            let longer = knn(&store, &q, k + 1).unwrap();
            prop_assert_eq!(&serial[..], &longer[..serial.len()]);
            for h in &serial {
                prop_assert!((-1.0..=1.0).contains(&h.score));
            }
        }
    }
}
