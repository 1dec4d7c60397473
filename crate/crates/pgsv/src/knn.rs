//! Brute-force exact top-k search over a dimension prefix.
//!
//! This is both the truncated-retrieval baseline and the per-stage primitive
//! of progressive retrieval. Results are ordered by `(sq_dist, doc_id)`, so
//! ties break toward the smaller document id and the output is a pure
//! function of the inputs regardless of thread count or blocking.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::distance::sq_euclidean_prefix_unchecked;
use crate::error::{Error, Result};
use crate::store::{EmbeddingMatrix, QueryBatch};

/// One search hit: a document id and its squared Euclidean distance at the
/// search width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub doc_id: u64,
    pub sq_dist: f32,
}

#[derive(Clone, Copy)]
struct Entry {
    sq_dist: f32,
    doc_id: u64,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sq_dist
            .total_cmp(&other.sq_dist)
            .then(self.doc_id.cmp(&other.doc_id))
    }
}

/// Exact top-k by squared Euclidean distance over the first `d` coordinates.
///
/// `subset`, when given, restricts candidates to those document ids;
/// duplicates in it are ignored. `k` is clamped to the candidate count.
pub fn topk(
    corpus: &EmbeddingMatrix,
    queries: &QueryBatch,
    d: usize,
    k: usize,
    subset: Option<&[u64]>,
) -> Result<Vec<Vec<Neighbor>>> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if k == 0 {
        return Err(Error::ZeroK);
    }
    let max_d = corpus.dim().min(queries.dim());
    if d == 0 || d > max_d {
        return Err(Error::DimOutOfRange { d, dim: max_d });
    }
    let rows = match subset {
        None => None,
        Some(ids) => Some(resolve_subset(corpus, ids)?),
    };
    Ok(topk_rows(corpus, queries, d, k, rows.as_deref()))
}

/// `topk` with `k = 1`, unwrapped to one neighbor per query.
pub fn top1(
    corpus: &EmbeddingMatrix,
    queries: &QueryBatch,
    d: usize,
    subset: Option<&[u64]>,
) -> Result<Vec<Neighbor>> {
    let lists = topk(corpus, queries, d, 1, subset)?;
    Ok(lists.into_iter().map(|mut l| l.remove(0)).collect())
}

/// Map subset ids to row indices, deduplicated and in memory order.
pub(crate) fn resolve_subset(corpus: &EmbeddingMatrix, ids: &[u64]) -> Result<Vec<usize>> {
    if ids.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut rows = Vec::with_capacity(ids.len());
    for &id in ids {
        rows.push(corpus.row_index(id).ok_or(Error::UnknownId(id))?);
    }
    rows.sort_unstable();
    rows.dedup();
    Ok(rows)
}

/// Core scan over resolved candidates. `rows == None` means the full corpus.
/// Queries are split into chunks that stay cache-resident while candidate
/// rows stream through; chunks run in parallel.
pub(crate) fn topk_rows(
    corpus: &EmbeddingMatrix,
    queries: &QueryBatch,
    d: usize,
    k: usize,
    rows: Option<&[usize]>,
) -> Vec<Vec<Neighbor>> {
    let n_queries = queries.n_queries();
    if n_queries == 0 {
        return Vec::new();
    }
    let n_cand = rows.map(|r| r.len()).unwrap_or(corpus.n_rows());
    // ~256 KiB of query rows per chunk, split further so every worker
    // thread gets a share. Chunking affects scheduling only, never results.
    let per_thread = n_queries.div_ceil(rayon::current_num_threads().max(1));
    let chunk = (65536 / d.max(1)).clamp(8, 512).min(per_thread).max(1);
    let mut out: Vec<Vec<Neighbor>> = vec![Vec::new(); n_queries];
    out.par_chunks_mut(chunk)
        .enumerate()
        .for_each(|(ci, out_chunk)| {
            let q0 = ci * chunk;
            scan_chunk(corpus, queries, q0, d, k, n_cand, rows, out_chunk);
        });
    out
}

/// Top-k for a single query over resolved candidate rows.
pub(crate) fn topk_one(
    corpus: &EmbeddingMatrix,
    query: &[f32],
    d: usize,
    k: usize,
    rows: &[usize],
) -> Vec<Neighbor> {
    let mut heap = BinaryHeap::with_capacity(k + 1);
    for &row in rows {
        push_candidate(&mut heap, k, corpus, query, d, row);
    }
    drain_heap(heap)
}

#[allow(clippy::too_many_arguments)]
fn scan_chunk(
    corpus: &EmbeddingMatrix,
    queries: &QueryBatch,
    q0: usize,
    d: usize,
    k: usize,
    n_cand: usize,
    rows: Option<&[usize]>,
    out_chunk: &mut [Vec<Neighbor>],
) {
    let mut heaps: Vec<BinaryHeap<Entry>> = (0..out_chunk.len())
        .map(|_| BinaryHeap::with_capacity(k + 1))
        .collect();
    // ~32 KiB of candidate rows per block keeps the block hot in L1 while
    // every query in the chunk visits it.
    let block = (8192 / d.max(1)).clamp(4, 1024);
    let mut start = 0;
    while start < n_cand {
        let end = (start + block).min(n_cand);
        for (qi, heap) in heaps.iter_mut().enumerate() {
            let query = queries.row(q0 + qi);
            match rows {
                None => {
                    for row in start..end {
                        push_candidate(heap, k, corpus, query, d, row);
                    }
                }
                Some(rows) => {
                    for &row in &rows[start..end] {
                        push_candidate(heap, k, corpus, query, d, row);
                    }
                }
            }
        }
        start = end;
    }
    for (slot, heap) in out_chunk.iter_mut().zip(heaps) {
        *slot = drain_heap(heap);
    }
}

#[inline]
fn push_candidate(
    heap: &mut BinaryHeap<Entry>,
    k: usize,
    corpus: &EmbeddingMatrix,
    query: &[f32],
    d: usize,
    row: usize,
) {
    let entry = Entry {
        sq_dist: sq_euclidean_prefix_unchecked(query, corpus.row(row), d),
        doc_id: corpus.id(row),
    };
    if heap.len() < k {
        heap.push(entry);
    } else if entry < *heap.peek().expect("nonempty heap") {
        heap.pop();
        heap.push(entry);
    }
}

fn drain_heap(heap: BinaryHeap<Entry>) -> Vec<Neighbor> {
    heap.into_sorted_vec()
        .into_iter()
        .map(|e| Neighbor {
            doc_id: e.doc_id,
            sq_dist: e.sq_dist,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn matrix(rows: Vec<Vec<f32>>) -> EmbeddingMatrix {
        let ids = (0..rows.len() as u64).collect();
        EmbeddingMatrix::from_rows(ids, rows).unwrap()
    }

    fn random_instance(rng: &mut StdRng, n: usize, q: usize, d: usize) -> (EmbeddingMatrix, QueryBatch) {
        let rows: Vec<Vec<f32>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random::<f32>() * 2.0 - 1.0).collect())
            .collect();
        let queries: Vec<Vec<f32>> = (0..q)
            .map(|_| (0..d).map(|_| rng.random::<f32>() * 2.0 - 1.0).collect())
            .collect();
        (matrix(rows), QueryBatch::from_rows(queries, None).unwrap())
    }

    /// Naive full-sort reference scan.
    fn naive_topk(
        corpus: &EmbeddingMatrix,
        queries: &QueryBatch,
        d: usize,
        k: usize,
        subset: Option<&[u64]>,
    ) -> Vec<Vec<Neighbor>> {
        (0..queries.n_queries())
            .map(|q| {
                let mut all: Vec<Neighbor> = (0..corpus.n_rows())
                    .filter(|&i| {
                        subset
                            .map(|ids| ids.contains(&corpus.id(i)))
                            .unwrap_or(true)
                    })
                    .map(|i| Neighbor {
                        doc_id: corpus.id(i),
                        sq_dist: crate::distance::sq_euclidean_prefix(
                            queries.row(q),
                            corpus.row(i),
                            d,
                        )
                        .unwrap(),
                    })
                    .collect();
                all.sort_by(|a, b| {
                    a.sq_dist
                        .total_cmp(&b.sq_dist)
                        .then(a.doc_id.cmp(&b.doc_id))
                });
                all.truncate(k);
                all
            })
            .collect()
    }

    #[test]
    fn hand_example_k2() {
        let corpus = matrix(vec![vec![0.0, 0.0], vec![3.0, 4.0], vec![1.0, 0.0]]);
        let queries = QueryBatch::from_rows(vec![vec![0.0, 0.0]], None).unwrap();
        let got = topk(&corpus, &queries, 2, 2, None).unwrap();
        assert_eq!(got[0].len(), 2);
        assert_eq!((got[0][0].doc_id, got[0][0].sq_dist), (0, 0.0));
        assert_eq!((got[0][1].doc_id, got[0][1].sq_dist), (2, 1.0));
    }

    #[test]
    fn k_at_least_n_returns_all_sorted() {
        let corpus = matrix(vec![vec![2.0], vec![0.5], vec![-1.0]]);
        let queries = QueryBatch::from_rows(vec![vec![0.0]], None).unwrap();
        let got = topk(&corpus, &queries, 1, 10, None).unwrap();
        let ids: Vec<u64> = got[0].iter().map(|n| n.doc_id).collect();
        assert_eq!(ids, vec![1, 2, 0]);
    }

    #[test]
    fn matches_naive_reference() {
        let mut rng = StdRng::seed_from_u64(42);
        let (corpus, queries) = random_instance(&mut rng, 500, 20, 32);
        let got = topk(&corpus, &queries, 32, 5, None).unwrap();
        let want = naive_topk(&corpus, &queries, 32, 5, None);
        assert_eq!(got, want);
    }

    #[test]
    fn tie_breaks_toward_smaller_id() {
        // Rows 1 and 3 are equidistant from the query.
        let corpus = EmbeddingMatrix::from_rows(
            vec![5, 3, 9],
            vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![10.0, 10.0]],
        )
        .unwrap();
        let queries = QueryBatch::from_rows(vec![vec![0.0, 0.0]], None).unwrap();
        let got = top1(&corpus, &queries, 2, None).unwrap();
        assert_eq!(got[0].doc_id, 3);
        assert_eq!(got[0].sq_dist, 1.0);
    }

    #[test]
    fn top1_query_equal_to_row() {
        let corpus = matrix(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let queries = QueryBatch::from_rows(vec![vec![3.0, 4.0]], None).unwrap();
        let got = top1(&corpus, &queries, 2, None).unwrap();
        assert_eq!(got[0].doc_id, 1);
        assert_eq!(got[0].sq_dist, 0.0);
    }

    #[test]
    fn top1_matches_topk_head() {
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..10 {
            let (corpus, queries) = random_instance(&mut rng, 100, 8, 16);
            let a = top1(&corpus, &queries, 16, None).unwrap();
            let b = topk(&corpus, &queries, 16, 1, None).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x, &y[0]);
            }
        }
    }

    #[test]
    fn subset_restricts_and_matches_postfilter() {
        let mut rng = StdRng::seed_from_u64(17);
        let (corpus, queries) = random_instance(&mut rng, 200, 10, 8);
        let subset: Vec<u64> = (0..200).filter(|i| i % 3 == 0).collect();
        let got = topk(&corpus, &queries, 8, 4, Some(&subset)).unwrap();
        let want = naive_topk(&corpus, &queries, 8, 4, Some(&subset));
        assert_eq!(got, want);
        for list in &got {
            for n in list {
                assert!(subset.contains(&n.doc_id));
            }
        }
        // With k >= |subset| the subset search equals the post-filtered full search.
        let small: Vec<u64> = vec![3, 30, 60];
        let got = topk(&corpus, &queries, 8, 8, Some(&small)).unwrap();
        let want = naive_topk(&corpus, &queries, 8, 8, Some(&small));
        assert_eq!(got, want);
    }

    #[test]
    fn k_is_clamped_to_candidates() {
        let corpus = matrix(vec![vec![0.0], vec![1.0]]);
        let queries = QueryBatch::from_rows(vec![vec![0.2]], None).unwrap();
        let got = topk(&corpus, &queries, 1, 5, Some(&[1])).unwrap();
        assert_eq!(got[0].len(), 1);
        assert_eq!(got[0][0].doc_id, 1);
    }

    #[test]
    fn monotone_containment_in_k() {
        let mut rng = StdRng::seed_from_u64(31);
        let (corpus, queries) = random_instance(&mut rng, 300, 5, 12);
        for k in 1..10 {
            let small = topk(&corpus, &queries, 12, k, None).unwrap();
            let large = topk(&corpus, &queries, 12, k + 1, None).unwrap();
            for (s, l) in small.iter().zip(&large) {
                assert_eq!(s.as_slice(), &l[..k]);
            }
        }
    }

    #[test]
    fn duplicate_subset_ids_do_not_duplicate_results() {
        let corpus = matrix(vec![vec![0.0], vec![1.0], vec![2.0]]);
        let queries = QueryBatch::from_rows(vec![vec![0.0]], None).unwrap();
        let got = topk(&corpus, &queries, 1, 3, Some(&[1, 1, 2, 2])).unwrap();
        let ids: Vec<u64> = got[0].iter().map(|n| n.doc_id).collect();
        assert_eq!(ids, vec![1, 2]);
    }

    #[test]
    fn error_cases() {
        let corpus = matrix(vec![vec![0.0, 0.0]]);
        let queries = QueryBatch::from_rows(vec![vec![0.0, 0.0]], None).unwrap();
        let empty = EmbeddingMatrix::new(2, vec![], vec![]).unwrap();
        assert!(matches!(
            topk(&empty, &queries, 2, 1, None),
            Err(Error::EmptyCorpus)
        ));
        assert!(matches!(
            topk(&corpus, &queries, 2, 0, None),
            Err(Error::ZeroK)
        ));
        assert!(matches!(
            topk(&corpus, &queries, 3, 1, None),
            Err(Error::DimOutOfRange { .. })
        ));
        assert!(matches!(
            topk(&corpus, &queries, 0, 1, None),
            Err(Error::DimOutOfRange { .. })
        ));
        assert!(matches!(
            topk(&corpus, &queries, 2, 1, Some(&[])),
            Err(Error::EmptySubset)
        ));
        assert!(matches!(
            topk(&corpus, &queries, 2, 1, Some(&[42])),
            Err(Error::UnknownId(42))
        ));
    }

    #[test]
    fn narrower_query_dim_bounds_d() {
        let corpus = matrix(vec![vec![0.0, 0.0, 0.0]]);
        let queries = QueryBatch::from_rows(vec![vec![0.0, 0.0]], None).unwrap();
        assert!(topk(&corpus, &queries, 2, 1, None).is_ok());
        assert!(topk(&corpus, &queries, 3, 1, None).is_err());
    }
}
