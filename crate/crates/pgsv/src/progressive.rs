//! Progressive retrieval: multi-stage coarse-to-fine search.
//!
//! Stage 1 runs top-K over the whole corpus at a low starting dimension.
//! The search then doubles the dimension and halves K (floor 1) at each
//! stage, keeping only surviving candidate ids, and finishes with a 1-NN
//! pass over the remaining pool at the max dimension. Early stages discard
//! most of the corpus cheaply; only a small candidate set ever sees the
//! full-width distance computation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::{self, Neighbor};
use crate::store::{EmbeddingMatrix, QueryBatch};

/// How surviving candidates are pooled between stages.
///
/// `PerQuery` keeps an independent pool per query and is the default.
/// `Shared` merges every query's survivors into one batch-wide pool, the
/// behavior described for batched benchmark runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    #[default]
    PerQuery,
    Shared,
}

impl PoolMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PoolMode::PerQuery => "per_query",
            PoolMode::Shared => "shared",
        }
    }

    /// Accepts `per_query`, `per-query`, or `shared`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "per_query" | "per-query" => Ok(PoolMode::PerQuery),
            "shared" => Ok(PoolMode::Shared),
            other => Err(Error::InvalidConfig(format!("unknown pool mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for PoolMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parameters of a progressive search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressiveConfig {
    pub start_dim: usize,
    pub max_dim: usize,
    pub initial_k: usize,
    #[serde(default)]
    pub pool_mode: PoolMode,
}

impl ProgressiveConfig {
    pub fn new(start_dim: usize, max_dim: usize, initial_k: usize, pool_mode: PoolMode) -> Self {
        Self {
            start_dim,
            max_dim,
            initial_k,
            pool_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.start_dim == 0 {
            return Err(Error::InvalidConfig("start_dim must be at least 1".into()));
        }
        if self.start_dim > self.max_dim {
            return Err(Error::InvalidConfig(format!(
                "start_dim {} exceeds max_dim {}",
                self.start_dim, self.max_dim
            )));
        }
        if self.initial_k == 0 {
            return Err(Error::InvalidConfig("initial_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// One (dimension, k) rung of the stage ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub dim: usize,
    pub k: usize,
}

/// The derived ladder of stages. The last entry is always `(max_dim, 1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageSchedule {
    stages: Vec<Stage>,
}

impl StageSchedule {
    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

/// Expand a config into its stage ladder.
///
/// The first stage is `(start_dim, initial_k)`. Each iteration doubles the
/// dimension; while the doubled dimension is still below `max_dim`, k is
/// halved (floor 1) and the stage is appended. Once doubling reaches or
/// exceeds `max_dim` the loop stops and the final `(max_dim, 1)` pass is
/// appended. `start_dim == max_dim` degenerates to the single final stage.
pub fn build_schedule(cfg: &ProgressiveConfig) -> Result<StageSchedule> {
    cfg.validate()?;
    let mut stages = Vec::new();
    if cfg.start_dim < cfg.max_dim {
        stages.push(Stage {
            dim: cfg.start_dim,
            k: cfg.initial_k,
        });
        let mut dim = cfg.start_dim;
        let mut k = cfg.initial_k;
        loop {
            let doubled = dim * 2;
            if doubled >= cfg.max_dim {
                break;
            }
            k = (k / 2).max(1);
            stages.push(Stage { dim: doubled, k });
            dim = doubled;
        }
    }
    stages.push(Stage {
        dim: cfg.max_dim,
        k: 1,
    });
    Ok(StageSchedule { stages })
}

/// Surviving candidate ids between stages. Id lists are sorted and
/// deduplicated, so they behave as sets.
#[derive(Debug, Clone)]
pub enum CandidatePool {
    PerQuery(Vec<Vec<u64>>),
    Shared(Vec<u64>),
}

impl CandidatePool {
    fn from_stage_results(mode: PoolMode, results: &[Vec<Neighbor>]) -> Self {
        match mode {
            PoolMode::PerQuery => CandidatePool::PerQuery(
                results
                    .iter()
                    .map(|list| {
                        let mut ids: Vec<u64> = list.iter().map(|n| n.doc_id).collect();
                        ids.sort_unstable();
                        ids
                    })
                    .collect(),
            ),
            PoolMode::Shared => {
                let mut ids: Vec<u64> = results
                    .iter()
                    .flat_map(|list| list.iter().map(|n| n.doc_id))
                    .collect();
                ids.sort_unstable();
                ids.dedup();
                CandidatePool::Shared(ids)
            }
        }
    }

    /// Candidate ids visible to query `q`.
    pub fn for_query(&self, q: usize) -> &[u64] {
        match self {
            CandidatePool::PerQuery(pools) => &pools[q],
            CandidatePool::Shared(ids) => ids,
        }
    }

    pub fn len_for_query(&self, q: usize) -> usize {
        self.for_query(q).len()
    }

    pub fn contains(&self, q: usize, id: u64) -> bool {
        self.for_query(q).binary_search(&id).is_ok()
    }
}

/// Per-stage observability record for one query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTrace {
    pub dim: usize,
    pub k: usize,
    /// Candidates this query searched at this stage.
    pub pool_before: usize,
    /// Size of this query's surviving pool after the stage (1 for the final
    /// stage; batch-wide pool size in shared mode).
    pub pool_after: usize,
    /// Whether the query's final answer survived this stage's pool.
    pub final_id_present: bool,
}

/// Run the full progressive search, returning one `(doc_id, sq_dist at
/// max_dim)` answer per query.
pub fn progressive_search(
    corpus: &EmbeddingMatrix,
    queries: &QueryBatch,
    cfg: &ProgressiveConfig,
) -> Result<Vec<Neighbor>> {
    let (answers, _) = run(corpus, queries, cfg, false)?;
    Ok(answers)
}

/// `progressive_search` plus a per-query, per-stage trace. The answers are
/// computed by the same path and are identical to `progressive_search`.
pub fn explain_search(
    corpus: &EmbeddingMatrix,
    queries: &QueryBatch,
    cfg: &ProgressiveConfig,
) -> Result<(Vec<Neighbor>, QueryTraces)> {
    let (answers, traces) = run(corpus, queries, cfg, true)?;
    Ok((answers, traces.expect("tracing was requested")))
}

/// Per-stage record kept while tracing: the stage, per-query candidate
/// counts before and after, and the surviving pool snapshot.
type StageLogEntry = (Stage, Vec<usize>, Vec<usize>, Option<CandidatePool>);

/// One trace per stage for every query.
pub type QueryTraces = Vec<Vec<StageTrace>>;

fn run(
    corpus: &EmbeddingMatrix,
    queries: &QueryBatch,
    cfg: &ProgressiveConfig,
    trace: bool,
) -> Result<(Vec<Neighbor>, Option<QueryTraces>)> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if cfg.max_dim > corpus.dim() {
        return Err(Error::InvalidConfig(format!(
            "max_dim {} exceeds corpus dim {}",
            cfg.max_dim,
            corpus.dim()
        )));
    }
    if queries.dim() < cfg.max_dim {
        return Err(Error::DimOutOfRange {
            d: cfg.max_dim,
            dim: queries.dim(),
        });
    }
    let n_queries = queries.n_queries();
    if n_queries == 0 {
        return Ok((Vec::new(), trace.then(Vec::new)));
    }

    let schedule = build_schedule(cfg)?;
    let n_stages = schedule.len();
    let mut pool: Option<CandidatePool> = None;
    let mut stage_log: Vec<StageLogEntry> = Vec::new();
    let mut answers: Vec<Neighbor> = Vec::new();

    for (s, stage) in schedule.stages().iter().enumerate() {
        let last = s + 1 == n_stages;
        let before: Vec<usize> = (0..n_queries)
            .map(|q| {
                pool.as_ref()
                    .map(|p| p.len_for_query(q))
                    .unwrap_or(corpus.n_rows())
            })
            .collect();
        let results = search_stage(corpus, queries, stage, pool.as_ref());
        if last {
            answers = results
                .into_iter()
                .map(|mut list| list.remove(0))
                .collect();
            if trace {
                stage_log.push((*stage, before, vec![1; n_queries], None));
            }
        } else {
            let next = CandidatePool::from_stage_results(cfg.pool_mode, &results);
            let after: Vec<usize> = (0..n_queries).map(|q| next.len_for_query(q)).collect();
            if trace {
                stage_log.push((*stage, before, after, Some(next.clone())));
            }
            pool = Some(next);
        }
    }

    let traces = trace.then(|| {
        (0..n_queries)
            .map(|q| {
                stage_log
                    .iter()
                    .map(|(stage, before, after, snapshot)| StageTrace {
                        dim: stage.dim,
                        k: stage.k,
                        pool_before: before[q],
                        pool_after: after[q],
                        // The final stage's answer trivially came from it.
                        final_id_present: snapshot
                            .as_ref()
                            .map(|p| p.contains(q, answers[q].doc_id))
                            .unwrap_or(true),
                    })
                    .collect()
            })
            .collect()
    });
    Ok((answers, traces))
}

fn search_stage(
    corpus: &EmbeddingMatrix,
    queries: &QueryBatch,
    stage: &Stage,
    pool: Option<&CandidatePool>,
) -> Vec<Vec<Neighbor>> {
    match pool {
        None => knn::topk_rows(corpus, queries, stage.dim, stage.k, None),
        Some(CandidatePool::Shared(ids)) => {
            let rows = resolve_rows(corpus, ids);
            knn::topk_rows(corpus, queries, stage.dim, stage.k, Some(&rows))
        }
        Some(CandidatePool::PerQuery(pools)) => (0..queries.n_queries())
            .into_par_iter()
            .map(|q| {
                let rows = resolve_rows(corpus, &pools[q]);
                knn::topk_one(corpus, queries.row(q), stage.dim, stage.k, &rows)
            })
            .collect(),
    }
}

fn resolve_rows(corpus: &EmbeddingMatrix, ids: &[u64]) -> Vec<usize> {
    let mut rows: Vec<usize> = ids
        .iter()
        .map(|&id| corpus.row_index(id).expect("pool ids come from the corpus"))
        .collect();
    rows.sort_unstable();
    rows
}
