//! Measurement harness: top-1 accuracy, repeated timed runs with median
//! aggregation, parameter-grid sweeps, and CSV/JSON report emission.
//!
//! Timing covers the search call only. Every benchmark does one untimed
//! warm-up run, then `n_repeats` timed runs on identical inputs; the search
//! result must be bit-identical across repeats and the median of the
//! recorded wall-clock durations is the reported runtime.

use std::io::{BufRead, BufReader, Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::{top1, Neighbor};
use crate::progressive::{progressive_search, PoolMode, ProgressiveConfig};
use crate::store::{EmbeddingMatrix, QueryBatch};

/// The search under measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Exact top-1 over the first `dim` coordinates.
    Truncated { dim: usize },
    Progressive(ProgressiveConfig),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Truncated { .. } => "truncated",
            Method::Progressive(_) => "progressive",
        }
    }

    /// Sort key for report ordering: (method, Dm or d, Ds, K, pool mode).
    fn sort_key(&self) -> (u8, usize, usize, usize, u8) {
        match self {
            Method::Truncated { dim } => (0, *dim, 0, 0, 0),
            Method::Progressive(c) => (
                1,
                c.max_dim,
                c.start_dim,
                c.initial_k,
                match c.pool_mode {
                    PoolMode::PerQuery => 0,
                    PoolMode::Shared => 1,
                },
            ),
        }
    }
}

/// Result of benchmarking one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub method: Method,
    /// Queries whose answer matched ground truth, as a percentage.
    pub accuracy_pct: f64,
    /// Per-repeat wall-clock durations of the search call.
    pub timings_sec: Vec<f64>,
    pub median_runtime_sec: f64,
    pub n_repeats: usize,
    pub n_queries: usize,
    pub n_docs: usize,
    pub corpus_hash: String,
    pub query_hash: String,
    /// Worker threads available to the search.
    pub threads: usize,
    /// Whether an untimed warm-up run preceded the timings.
    pub warmup: bool,
    /// False when the report came from a parallel (accuracy-only) sweep.
    pub timing_valid: bool,
}

/// Percentage of results equal to ground truth.
pub fn top1_accuracy(results: &[u64], truth: &[u64]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::EmptyTruth);
    }
    if results.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: results.len(),
            right: truth.len(),
        });
    }
    let matches = results.iter().zip(truth).filter(|(r, t)| r == t).count();
    Ok(100.0 * matches as f64 / truth.len() as f64)
}

/// Exact median: middle element for odd lengths, mean of the two middles for
/// even lengths. Selection-based rather than sort-based.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    let n = v.len();
    let (lower, mid, _) = v.select_nth_unstable_by(n / 2, |a, b| a.total_cmp(b));
    let hi = *mid;
    if n % 2 == 1 {
        Some(hi)
    } else {
        let lo = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some((lo + hi) / 2.0)
    }
}

fn run_method(
    corpus: &EmbeddingMatrix,
    queries: &QueryBatch,
    method: &Method,
) -> Result<Vec<Neighbor>> {
    match method {
        Method::Truncated { dim } => top1(corpus, queries, *dim, None),
        Method::Progressive(cfg) => progressive_search(corpus, queries, cfg),
    }
}

/// Benchmark one configuration: warm up once, then time `n_repeats`
/// identical runs. Accuracy is computed once and each repeat's result is
/// checked against the first.
pub fn run_benchmark(
    corpus: &EmbeddingMatrix,
    queries: &QueryBatch,
    method: &Method,
    n_repeats: usize,
) -> Result<BenchReport> {
    if n_repeats == 0 {
        return Err(Error::InvalidConfig("n_repeats must be at least 1".into()));
    }
    let truth = queries.ground_truth().ok_or(Error::MissingTruth)?;
    queries.validate_truth_against(corpus)?;

    let baseline = run_method(corpus, queries, method)?;
    let ids: Vec<u64> = baseline.iter().map(|n| n.doc_id).collect();
    let accuracy_pct = top1_accuracy(&ids, truth)?;

    let mut timings_sec = Vec::with_capacity(n_repeats);
    for _ in 0..n_repeats {
        let t0 = Instant::now();
        let result = run_method(corpus, queries, method)?;
        timings_sec.push(t0.elapsed().as_secs_f64());
        if result != baseline {
            return Err(Error::UnstableAccuracy);
        }
    }
    let median_runtime_sec = median(&timings_sec).expect("n_repeats >= 1");
    Ok(BenchReport {
        method: *method,
        accuracy_pct,
        timings_sec,
        median_runtime_sec,
        n_repeats,
        n_queries: queries.n_queries(),
        n_docs: corpus.n_rows(),
        corpus_hash: corpus.content_hash(),
        query_hash: queries.content_hash(),
        threads: rayon::current_num_threads(),
        warmup: true,
        timing_valid: true,
    })
}

/// Parameter grid for a sweep. Progressive configs are the cartesian product
/// of the three parameter lists and the pool modes.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SweepGrid {
    pub truncated_dims: Vec<usize>,
    pub start_dims: Vec<usize>,
    pub max_dims: Vec<usize>,
    pub initial_ks: Vec<usize>,
    pub pool_modes: Vec<PoolMode>,
}

impl SweepGrid {
    fn is_empty(&self) -> bool {
        let progressive = !self.start_dims.is_empty()
            && !self.max_dims.is_empty()
            && !self.initial_ks.is_empty()
            && !self.pool_modes.is_empty();
        self.truncated_dims.is_empty() && !progressive
    }
}

/// Run every valid configuration in the grid. Invalid combinations are
/// skipped and logged, not fatal. Sequential by default; `parallel` runs
/// configurations concurrently and marks their timings invalid
/// (accuracy-only mode).
pub fn run_sweep(
    corpus: &EmbeddingMatrix,
    queries: &QueryBatch,
    grid: &SweepGrid,
    n_repeats: usize,
    parallel: bool,
) -> Result<(Vec<BenchReport>, Vec<String>)> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty sweep grid".into()));
    }
    let max_d = corpus.dim().min(queries.dim());
    let mut methods = Vec::new();
    let mut skipped = Vec::new();
    for &d in &grid.truncated_dims {
        if d == 0 || d > max_d {
            skipped.push(format!("skip truncated d={d}: out of range 1..={max_d}"));
        } else {
            methods.push(Method::Truncated { dim: d });
        }
    }
    for &ds in &grid.start_dims {
        for &dm in &grid.max_dims {
            for &k in &grid.initial_ks {
                for &pm in &grid.pool_modes {
                    let cfg = ProgressiveConfig::new(ds, dm, k, pm);
                    let fit = cfg.validate().and_then(|()| {
                        if dm > max_d {
                            Err(Error::InvalidConfig(format!(
                                "max_dim {dm} exceeds available dim {max_d}"
                            )))
                        } else {
                            Ok(())
                        }
                    });
                    match fit {
                        Ok(()) => methods.push(Method::Progressive(cfg)),
                        Err(e) => skipped.push(format!(
                            "skip progressive ({ds}, {dm}, {k}, {pm}): {e}"
                        )),
                    }
                }
            }
        }
    }

    let mut reports: Vec<BenchReport> = if parallel {
        let mut reports = methods
            .par_iter()
            .map(|m| run_benchmark(corpus, queries, m, n_repeats))
            .collect::<Result<Vec<_>>>()?;
        for r in &mut reports {
            r.timing_valid = false;
        }
        reports
    } else {
        methods
            .iter()
            .map(|m| run_benchmark(corpus, queries, m, n_repeats))
            .collect::<Result<Vec<_>>>()?
    };
    reports.sort_by_key(|r| r.method.sort_key());
    Ok((reports, skipped))
}

pub const CSV_HEADER: &str = "method,start_dim,max_dim,initial_k,pool_mode,accuracy_pct,\
median_runtime_sec,n_repeats,n_queries,n_docs,corpus_hash";

/// The fields a report projects into the CSV schema.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub method: Method,
    pub accuracy_pct: f64,
    pub median_runtime_sec: f64,
    pub n_repeats: usize,
    pub n_queries: usize,
    pub n_docs: usize,
    pub corpus_hash: String,
}

impl BenchReport {
    pub fn csv_row(&self) -> CsvRow {
        CsvRow {
            method: self.method,
            accuracy_pct: self.accuracy_pct,
            median_runtime_sec: self.median_runtime_sec,
            n_repeats: self.n_repeats,
            n_queries: self.n_queries,
            n_docs: self.n_docs,
            corpus_hash: self.corpus_hash.clone(),
        }
    }
}

/// Emit reports as CSV. Truncated rows put the truncation dim in `max_dim`
/// and leave `start_dim`, `initial_k`, and `pool_mode` empty.
pub fn write_reports_csv<W: Write>(reports: &[BenchReport], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in reports {
        let (start_dim, max_dim, initial_k, pool_mode) = match &r.method {
            Method::Truncated { dim } => (String::new(), *dim, String::new(), String::new()),
            Method::Progressive(c) => (
                c.start_dim.to_string(),
                c.max_dim,
                c.initial_k.to_string(),
                c.pool_mode.to_string(),
            ),
        };
        writeln!(
            w,
            "{},{},{},{},{},{:?},{:?},{},{},{},{}",
            r.method.name(),
            start_dim,
            max_dim,
            initial_k,
            pool_mode,
            r.accuracy_pct,
            r.median_runtime_sec,
            r.n_repeats,
            r.n_queries,
            r.n_docs,
            r.corpus_hash,
        )?;
    }
    Ok(())
}

/// Parse a CSV produced by `write_reports_csv`.
pub fn parse_reports_csv<R: Read>(r: R) -> Result<Vec<CsvRow>> {
    let reader = BufReader::new(r);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end();
        if i == 0 {
            if trimmed != CSV_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("unexpected header {trimmed:?}"),
                });
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 11 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected 11 fields, found {}", fields.len()),
            });
        }
        let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
        let max_dim: usize = fields[2]
            .parse()
            .map_err(|_| parse_err(format!("bad max_dim {:?}", fields[2])))?;
        let method = match fields[0] {
            "truncated" => Method::Truncated { dim: max_dim },
            "progressive" => Method::Progressive(ProgressiveConfig::new(
                fields[1]
                    .parse()
                    .map_err(|_| parse_err(format!("bad start_dim {:?}", fields[1])))?,
                max_dim,
                fields[3]
                    .parse()
                    .map_err(|_| parse_err(format!("bad initial_k {:?}", fields[3])))?,
                PoolMode::parse(fields[4])?,
            )),
            other => return Err(parse_err(format!("unknown method {other:?}"))),
        };
        out.push(CsvRow {
            method,
            accuracy_pct: fields[5]
                .parse()
                .map_err(|_| parse_err(format!("bad accuracy {:?}", fields[5])))?,
            median_runtime_sec: fields[6]
                .parse()
                .map_err(|_| parse_err(format!("bad median {:?}", fields[6])))?,
            n_repeats: fields[7]
                .parse()
                .map_err(|_| parse_err(format!("bad n_repeats {:?}", fields[7])))?,
            n_queries: fields[8]
                .parse()
                .map_err(|_| parse_err(format!("bad n_queries {:?}", fields[8])))?,
            n_docs: fields[9]
                .parse()
                .map_err(|_| parse_err(format!("bad n_docs {:?}", fields[9])))?,
            corpus_hash: fields[10].to_string(),
        });
    }
    Ok(out)
}

/// JSON mirror of the CSV schema with per-repeat timing arrays and harness
/// metadata included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_dim: Option<usize>,
    pub max_dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_mode: Option<PoolMode>,
    pub accuracy_pct: f64,
    pub median_runtime_sec: f64,
    pub n_repeats: usize,
    pub n_queries: usize,
    pub n_docs: usize,
    pub corpus_hash: String,
    pub query_hash: String,
    pub timings_sec: Vec<f64>,
    pub threads: usize,
    pub warmup: bool,
    pub timing_valid: bool,
}

impl From<&BenchReport> for JsonReport {
    fn from(r: &BenchReport) -> Self {
        let (start_dim, max_dim, initial_k, pool_mode) = match &r.method {
            Method::Truncated { dim } => (None, *dim, None, None),
            Method::Progressive(c) => {
                (Some(c.start_dim), c.max_dim, Some(c.initial_k), Some(c.pool_mode))
            }
        };
        JsonReport {
            method: r.method.name().to_string(),
            start_dim,
            max_dim,
            initial_k,
            pool_mode,
            accuracy_pct: r.accuracy_pct,
            median_runtime_sec: r.median_runtime_sec,
            n_repeats: r.n_repeats,
            n_queries: r.n_queries,
            n_docs: r.n_docs,
            corpus_hash: r.corpus_hash.clone(),
            query_hash: r.query_hash.clone(),
            timings_sec: r.timings_sec.clone(),
            threads: r.threads,
            warmup: r.warmup,
            timing_valid: r.timing_valid,
        }
    }
}

impl JsonReport {
    pub fn into_report(self) -> Result<BenchReport> {
        let method = match self.method.as_str() {
            "truncated" => Method::Truncated { dim: self.max_dim },
            "progressive" => {
                let missing = |what: &str| {
                    Error::Parse {
                        line: 0,
                        msg: format!("progressive report lacks {what}"),
                    }
                };
                Method::Progressive(ProgressiveConfig::new(
                    self.start_dim.ok_or_else(|| missing("start_dim"))?,
                    self.max_dim,
                    self.initial_k.ok_or_else(|| missing("initial_k"))?,
                    self.pool_mode.ok_or_else(|| missing("pool_mode"))?,
                ))
            }
            other => {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("unknown method {other:?}"),
                })
            }
        };
        Ok(BenchReport {
            method,
            accuracy_pct: self.accuracy_pct,
            timings_sec: self.timings_sec,
            median_runtime_sec: self.median_runtime_sec,
            n_repeats: self.n_repeats,
            n_queries: self.n_queries,
            n_docs: self.n_docs,
            corpus_hash: self.corpus_hash,
            query_hash: self.query_hash,
            threads: self.threads,
            warmup: self.warmup,
            timing_valid: self.timing_valid,
        })
    }
}

pub fn write_reports_json<W: Write>(reports: &[BenchReport], w: W) -> Result<()> {
    let json: Vec<JsonReport> = reports.iter().map(JsonReport::from).collect();
    serde_json::to_writer_pretty(w, &json).map_err(|e| Error::Parse {
        line: 0,
        msg: e.to_string(),
    })
}

pub fn parse_reports_json<R: Read>(r: R) -> Result<Vec<BenchReport>> {
    let json: Vec<JsonReport> = serde_json::from_reader(r).map_err(|e| Error::Parse {
        line: 0,
        msg: e.to_string(),
    })?;
    json.into_iter().map(JsonReport::into_report).collect()
}
