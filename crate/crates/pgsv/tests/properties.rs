//! Property tests for the core invariants: format round-trips, prefix-view
//! laws, kernel monotonicity, exact-search oracle equivalence, schedule
//! laws, and progressive search guarantees.

use std::collections::HashSet;

use proptest::prelude::*;

use pgsv::bench::median;
use pgsv::datagen::{generate, SynthSpec};
use pgsv::distance::sq_euclidean_prefix;
use pgsv::knn::{top1, topk, Neighbor};
use pgsv::progressive::{build_schedule, progressive_search, PoolMode, ProgressiveConfig, Stage};
use pgsv::store::EmbeddingMatrix;
use pgsv::QueryBatch;

fn finite_f32() -> impl Strategy<Value = f32> {
    // Arbitrary bit patterns (subnormals, -0.0, extremes) with NaN/Inf out.
    any::<u32>().prop_map(f32::from_bits).prop_filter("finite", |x| x.is_finite())
}

fn arb_matrix(max_rows: usize, max_dim: usize) -> impl Strategy<Value = EmbeddingMatrix> {
    (1..=max_dim, 0..=max_rows)
        .prop_flat_map(|(dim, n)| {
            (
                proptest::collection::hash_set(any::<u64>(), n),
                proptest::collection::vec(finite_f32(), n * dim),
                Just(dim),
            )
        })
        .prop_map(|(ids, data, dim)| {
            let ids: Vec<u64> = ids.into_iter().collect();
            EmbeddingMatrix::new(dim, ids, data).expect("generated matrix is valid")
        })
}

/// Independent reference scan: full sort of every candidate.
fn naive_topk(
    corpus: &EmbeddingMatrix,
    queries: &QueryBatch,
    d: usize,
    k: usize,
    subset: Option<&HashSet<u64>>,
) -> Vec<Vec<Neighbor>> {
    (0..queries.n_queries())
        .map(|q| {
            let mut all: Vec<Neighbor> = (0..corpus.n_rows())
                .filter(|&i| subset.map(|s| s.contains(&corpus.id(i))).unwrap_or(true))
                .map(|i| Neighbor {
                    doc_id: corpus.id(i),
                    sq_dist: sq_euclidean_prefix(queries.row(q), corpus.row(i), d).unwrap(),
                })
                .collect();
            all.sort_by(|a, b| a.sq_dist.total_cmp(&b.sq_dist).then(a.doc_id.cmp(&b.doc_id)));
            all.truncate(k);
            all
        })
        .collect()
}

fn arb_instance() -> impl Strategy<Value = (EmbeddingMatrix, QueryBatch)> {
    (1usize..=48, 1usize..=12, 1usize..=6).prop_flat_map(|(n, dim, q)| {
        (
            proptest::collection::vec(-8i32..=8, n * dim),
            proptest::collection::vec(-8i32..=8, q * dim),
            Just((n, dim)),
        )
            .prop_map(|(corpus_vals, query_vals, (n, dim))| {
                // Small-integer coordinates force genuine distance ties.
                let data: Vec<f32> = corpus_vals.into_iter().map(|v| v as f32).collect();
                let qdata: Vec<f32> = query_vals.into_iter().map(|v| v as f32).collect();
                let m = EmbeddingMatrix::new(dim, (0..n as u64).collect(), data).unwrap();
                let qb = QueryBatch::new(dim, qdata, None).unwrap();
                (m, qb)
            })
    })
}

proptest! {
    #[test]
    fn save_load_is_identity(m in arb_matrix(8, 6)) {
        let bytes = m.to_bytes();
        let back = EmbeddingMatrix::read_from(&bytes[..], Some(bytes.len() as u64)).unwrap();
        prop_assert_eq!(back.ids(), m.ids());
        prop_assert_eq!(back.dim(), m.dim());
        // Bit-exact, not just numerically equal.
        let as_bits = |xs: &[f32]| xs.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(as_bits(back.data()), as_bits(m.data()));
        prop_assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn prefix_views_compose_and_preserve_order(m in arb_matrix(6, 6), d1 in 1usize..=6, d2 in 1usize..=6) {
        prop_assume!(d1 <= d2 && d2 <= m.dim());
        let outer = m.prefix_view(d2).unwrap();
        let nested = outer.prefix(d1).unwrap();
        let direct = m.prefix_view(d1).unwrap();
        prop_assert_eq!(nested.ids(), direct.ids());
        for i in 0..m.n_rows() {
            prop_assert_eq!(nested.row(i), direct.row(i));
            prop_assert_eq!(direct.row(i), &m.row(i)[..d1]);
        }
        let owned = direct.to_owned_matrix();
        prop_assert_eq!(owned.ids(), m.ids());
    }

    #[test]
    fn prefix_distance_is_monotone(
        a in proptest::collection::vec(-100.0f32..100.0, 16),
        b in proptest::collection::vec(-100.0f32..100.0, 16),
    ) {
        let mut prev = 0.0f32;
        for d in 0..=16 {
            let cur = sq_euclidean_prefix(&a, &b, d).unwrap();
            prop_assert!(cur >= prev);
            prev = cur;
        }
    }

    #[test]
    fn topk_matches_naive_scan((corpus, queries) in arb_instance(), k in 1usize..=8) {
        let d = corpus.dim();
        let got = topk(&corpus, &queries, d, k, None).unwrap();
        let want = naive_topk(&corpus, &queries, d, k, None);
        prop_assert_eq!(got, want);
    }

    #[test]
    fn topk_subset_consistency((corpus, queries) in arb_instance(), k in 1usize..=8, pick in any::<u64>()) {
        // Deterministic pseudo-random subset of about half the ids.
        let subset: Vec<u64> = corpus
            .ids()
            .iter()
            .copied()
            .filter(|id| (id.wrapping_mul(0x9e3779b97f4a7c15) ^ pick).count_ones() % 2 == 0)
            .collect();
        prop_assume!(!subset.is_empty());
        let set: HashSet<u64> = subset.iter().copied().collect();
        let got = topk(&corpus, &queries, corpus.dim(), k, Some(&subset)).unwrap();
        let want = naive_topk(&corpus, &queries, corpus.dim(), k, Some(&set));
        prop_assert_eq!(&got, &want);
        for list in &got {
            for n in list {
                prop_assert!(set.contains(&n.doc_id));
            }
        }
    }

    #[test]
    fn topk_prefix_of_larger_k((corpus, queries) in arb_instance(), k in 1usize..=6) {
        let d = corpus.dim();
        let small = topk(&corpus, &queries, d, k, None).unwrap();
        let large = topk(&corpus, &queries, d, k + 1, None).unwrap();
        for (s, l) in small.iter().zip(&large) {
            prop_assert_eq!(s.as_slice(), &l[..s.len().min(l.len())]);
        }
    }

    #[test]
    fn schedule_law(ds_exp in 0u32..=10, extra in 0usize..=3000, k in 1usize..=1024) {
        let ds = 1usize << ds_exp;
        let dm = ds + extra;
        let cfg = ProgressiveConfig::new(ds, dm, k, PoolMode::PerQuery);
        let schedule = build_schedule(&cfg).unwrap();
        let stages = schedule.stages();
        prop_assert_eq!(*stages.last().unwrap(), Stage { dim: dm, k: 1 });
        if ds == dm {
            prop_assert_eq!(stages.len(), 1);
        } else {
            prop_assert_eq!(stages[0], Stage { dim: ds, k });
            for (s, stage) in stages[..stages.len() - 1].iter().enumerate() {
                prop_assert_eq!(stage.dim, ds << s);
                prop_assert_eq!(stage.k, (k >> s).max(1));
            }
            for pair in stages.windows(2) {
                prop_assert!(pair[1].dim > pair[0].dim);
            }
            let last_doubled = stages[stages.len() - 2].dim;
            prop_assert!(last_doubled * 2 >= dm, "doubling stopped early");
        }
    }

    #[test]
    fn progressive_dominates_exact_distance((corpus, queries) in arb_instance(), k in 1usize..=8, shared in any::<bool>()) {
        let dm = corpus.dim();
        let ds = (dm / 2).max(1);
        let mode = if shared { PoolMode::Shared } else { PoolMode::PerQuery };
        let cfg = ProgressiveConfig::new(ds, dm, k, mode);
        let exact = top1(&corpus, &queries, dm, None).unwrap();
        let prog = progressive_search(&corpus, &queries, &cfg).unwrap();
        for (p, e) in prog.iter().zip(&exact) {
            prop_assert!(p.sq_dist >= e.sq_dist);
            // On equal distance the answers tie; exact holds the smallest
            // tied id globally, progressive the smallest in its pool.
            if p.sq_dist == e.sq_dist {
                prop_assert!(p.doc_id >= e.doc_id);
            }
        }
    }

    #[test]
    fn degenerate_progressive_is_exact((corpus, queries) in arb_instance(), k in 1usize..=8, shared in any::<bool>()) {
        let dm = corpus.dim();
        let mode = if shared { PoolMode::Shared } else { PoolMode::PerQuery };
        let cfg = ProgressiveConfig::new(dm, dm, k, mode);
        let exact = top1(&corpus, &queries, dm, None).unwrap();
        let prog = progressive_search(&corpus, &queries, &cfg).unwrap();
        prop_assert_eq!(prog, exact);
    }

    #[test]
    fn median_matches_sort_reference(xs in proptest::collection::vec(-1e9f64..1e9, 1..64)) {
        let mut sorted = xs.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let n = sorted.len();
        let want = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        prop_assert_eq!(median(&xs).unwrap(), want);
    }

    #[test]
    fn datagen_is_deterministic_per_seed(seed in any::<u64>()) {
        let spec = SynthSpec {
            n_docs: 40,
            dim: 8,
            n_clusters: 4,
            noise_sigma: 0.5,
            decay: 0.9,
            n_queries: 10,
            query_sigma: 0.1,
            seed,
        };
        let (c1, q1) = generate(&spec).unwrap();
        let (c2, q2) = generate(&spec).unwrap();
        prop_assert_eq!(c1.content_hash(), c2.content_hash());
        prop_assert_eq!(q1.content_hash(), q2.content_hash());
        let other = SynthSpec { seed: seed.wrapping_add(1), ..spec };
        let (c3, _) = generate(&other).unwrap();
        prop_assert_ne!(c1.content_hash(), c3.content_hash());
    }
}
