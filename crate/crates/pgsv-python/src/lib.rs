//! Python bindings: the `pgsv_py` extension module.
//!
//! Exposes the matrix store, exact and progressive search, the synthetic
//! data generator, and the benchmark harness with plain-Python types
//! (lists, tuples, dicts) at the boundary.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pgsv::bench::{run_benchmark, JsonReport, Method};
use pgsv::datagen::{self, SynthSpec};
use pgsv::error::Error;
use pgsv::progressive::{self, PoolMode, StageTrace};
use pgsv::store;
use pgsv::{knn, EmbeddingMatrix, QueryBatch};

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Dense corpus of f32 vectors with stable u64 document ids.
#[pyclass(name = "EmbeddingMatrix")]
struct PyEmbeddingMatrix {
    inner: EmbeddingMatrix,
}

#[pymethods]
impl PyEmbeddingMatrix {
    /// Build a matrix from parallel lists of ids and rows.
    #[staticmethod]
    fn from_rows(ids: Vec<u64>, rows: Vec<Vec<f32>>) -> PyResult<Self> {
        Ok(Self {
            inner: EmbeddingMatrix::from_rows(ids, rows).map_err(to_py_err)?,
        })
    }

    /// Load from the binary matrix format.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: store::load_matrix(path).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        store::save_matrix(&self.inner, path).map_err(to_py_err)
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn ids(&self) -> Vec<u64> {
        self.inner.ids().to_vec()
    }

    fn row(&self, i: usize) -> PyResult<Vec<f32>> {
        if i >= self.inner.n_rows() {
            return Err(PyValueError::new_err(format!(
                "row {i} out of range 0..{}",
                self.inner.n_rows()
            )));
        }
        Ok(self.inner.row(i).to_vec())
    }

    /// First `d` coordinates of row `i` (truncation view).
    fn row_prefix(&self, i: usize, d: usize) -> PyResult<Vec<f32>> {
        let view = self.inner.prefix_view(d).map_err(to_py_err)?;
        if i >= self.inner.n_rows() {
            return Err(PyValueError::new_err(format!(
                "row {i} out of range 0..{}",
                self.inner.n_rows()
            )));
        }
        Ok(view.row(i).to_vec())
    }

    fn content_hash(&self) -> String {
        self.inner.content_hash()
    }

    fn __repr__(&self) -> String {
        format!(
            "EmbeddingMatrix(n_rows={}, dim={})",
            self.inner.n_rows(),
            self.inner.dim()
        )
    }
}

/// A batch of query vectors with optional ground-truth document ids.
#[pyclass(name = "QueryBatch")]
struct PyQueryBatch {
    inner: QueryBatch,
}

#[pymethods]
impl PyQueryBatch {
    #[staticmethod]
    #[pyo3(signature = (rows, ground_truth=None))]
    fn from_rows(rows: Vec<Vec<f32>>, ground_truth: Option<Vec<u64>>) -> PyResult<Self> {
        Ok(Self {
            inner: QueryBatch::from_rows(rows, ground_truth).map_err(to_py_err)?,
        })
    }

    /// Load queries stored in the binary matrix format, optionally with a
    /// `query_index,truth_doc_id` CSV.
    #[staticmethod]
    #[pyo3(signature = (path, truth_path=None))]
    fn load(path: &str, truth_path: Option<&str>) -> PyResult<Self> {
        let mut inner = QueryBatch::from_matrix(store::load_matrix(path).map_err(to_py_err)?);
        if let Some(truth_path) = truth_path {
            let truth = store::load_truth_csv(truth_path).map_err(to_py_err)?;
            inner.set_ground_truth(truth).map_err(to_py_err)?;
        }
        Ok(Self { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        store::save_matrix(&self.inner.to_matrix(), path).map_err(to_py_err)
    }

    #[getter]
    fn n_queries(&self) -> usize {
        self.inner.n_queries()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn ground_truth(&self) -> Option<Vec<u64>> {
        self.inner.ground_truth().map(|t| t.to_vec())
    }

    fn row(&self, q: usize) -> PyResult<Vec<f32>> {
        if q >= self.inner.n_queries() {
            return Err(PyValueError::new_err(format!(
                "query {q} out of range 0..{}",
                self.inner.n_queries()
            )));
        }
        Ok(self.inner.row(q).to_vec())
    }

    fn content_hash(&self) -> String {
        self.inner.content_hash()
    }

    fn __repr__(&self) -> String {
        format!(
            "QueryBatch(n_queries={}, dim={}, ground_truth={})",
            self.inner.n_queries(),
            self.inner.dim(),
            self.inner.ground_truth().is_some()
        )
    }
}

/// Progressive search parameters.
#[pyclass(name = "ProgressiveConfig", from_py_object)]
#[derive(Clone)]
struct PyProgressiveConfig {
    inner: progressive::ProgressiveConfig,
}

#[pymethods]
impl PyProgressiveConfig {
    #[new]
    #[pyo3(signature = (start_dim, max_dim, initial_k, pool_mode="per-query"))]
    fn new(start_dim: usize, max_dim: usize, initial_k: usize, pool_mode: &str) -> PyResult<Self> {
        let mode = PoolMode::parse(pool_mode).map_err(to_py_err)?;
        let inner = progressive::ProgressiveConfig::new(start_dim, max_dim, initial_k, mode);
        inner.validate().map_err(to_py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn start_dim(&self) -> usize {
        self.inner.start_dim
    }

    #[getter]
    fn max_dim(&self) -> usize {
        self.inner.max_dim
    }

    #[getter]
    fn initial_k(&self) -> usize {
        self.inner.initial_k
    }

    #[getter]
    fn pool_mode(&self) -> &'static str {
        self.inner.pool_mode.as_str()
    }

    fn __repr__(&self) -> String {
        format!(
            "ProgressiveConfig(start_dim={}, max_dim={}, initial_k={}, pool_mode='{}')",
            self.inner.start_dim, self.inner.max_dim, self.inner.initial_k, self.inner.pool_mode
        )
    }
}

/// Generate a deterministic synthetic corpus and query batch.
#[pyfunction]
#[pyo3(signature = (n_docs, dim, n_queries, seed, n_clusters=50, noise_sigma=0.35, decay=0.99, query_sigma=0.44))]
#[allow(clippy::too_many_arguments)]
fn generate(
    n_docs: usize,
    dim: usize,
    n_queries: usize,
    seed: u64,
    n_clusters: usize,
    noise_sigma: f32,
    decay: f32,
    query_sigma: f32,
) -> PyResult<(PyEmbeddingMatrix, PyQueryBatch)> {
    let spec = SynthSpec {
        n_docs,
        dim,
        n_clusters,
        noise_sigma,
        decay,
        n_queries,
        query_sigma,
        seed,
    };
    let (corpus, queries) = datagen::generate(&spec).map_err(to_py_err)?;
    Ok((
        PyEmbeddingMatrix { inner: corpus },
        PyQueryBatch { inner: queries },
    ))
}

/// Exact top-k per query as `[(doc_id, sq_dist), ...]` lists.
#[pyfunction]
#[pyo3(signature = (corpus, queries, d, k, subset=None))]
fn topk(
    corpus: PyRef<'_, PyEmbeddingMatrix>,
    queries: PyRef<'_, PyQueryBatch>,
    d: usize,
    k: usize,
    subset: Option<Vec<u64>>,
) -> PyResult<Vec<Vec<(u64, f32)>>> {
    let lists = knn::topk(&corpus.inner, &queries.inner, d, k, subset.as_deref())
        .map_err(to_py_err)?;
    Ok(lists
        .into_iter()
        .map(|l| l.into_iter().map(|n| (n.doc_id, n.sq_dist)).collect())
        .collect())
}

/// Exact top-1 per query as `(doc_id, sq_dist)` pairs.
#[pyfunction]
#[pyo3(signature = (corpus, queries, d, subset=None))]
fn top1(
    corpus: PyRef<'_, PyEmbeddingMatrix>,
    queries: PyRef<'_, PyQueryBatch>,
    d: usize,
    subset: Option<Vec<u64>>,
) -> PyResult<Vec<(u64, f32)>> {
    let hits = knn::top1(&corpus.inner, &queries.inner, d, subset.as_deref())
        .map_err(to_py_err)?;
    Ok(hits.into_iter().map(|n| (n.doc_id, n.sq_dist)).collect())
}

/// Progressive search: one `(doc_id, sq_dist at max_dim)` pair per query.
#[pyfunction]
fn progressive_search(
    corpus: PyRef<'_, PyEmbeddingMatrix>,
    queries: PyRef<'_, PyQueryBatch>,
    config: PyProgressiveConfig,
) -> PyResult<Vec<(u64, f32)>> {
    let hits = progressive::progressive_search(&corpus.inner, &queries.inner, &config.inner)
        .map_err(to_py_err)?;
    Ok(hits.into_iter().map(|n| (n.doc_id, n.sq_dist)).collect())
}

fn trace_dict<'py>(py: Python<'py>, t: &StageTrace) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("dim", t.dim)?;
    d.set_item("k", t.k)?;
    d.set_item("pool_before", t.pool_before)?;
    d.set_item("pool_after", t.pool_after)?;
    d.set_item("final_id_present", t.final_id_present)?;
    Ok(d)
}

/// Stage traces for every query, each stage rendered as a dict.
type PyTraces<'py> = Vec<Vec<Bound<'py, PyDict>>>;

/// Progressive search plus per-query stage traces (list of dicts).
#[pyfunction]
fn explain_search<'py>(
    py: Python<'py>,
    corpus: PyRef<'_, PyEmbeddingMatrix>,
    queries: PyRef<'_, PyQueryBatch>,
    config: PyProgressiveConfig,
) -> PyResult<(Vec<(u64, f32)>, PyTraces<'py>)> {
    let (answers, traces) =
        progressive::explain_search(&corpus.inner, &queries.inner, &config.inner)
            .map_err(to_py_err)?;
    let answers = answers.into_iter().map(|n| (n.doc_id, n.sq_dist)).collect();
    let traces = traces
        .iter()
        .map(|per_query| per_query.iter().map(|t| trace_dict(py, t)).collect())
        .collect::<PyResult<Vec<Vec<_>>>>()?;
    Ok((answers, traces))
}

/// The (dim, k) stage ladder for a config, final stage included.
#[pyfunction]
fn build_schedule(config: PyProgressiveConfig) -> PyResult<Vec<(usize, usize)>> {
    let schedule = progressive::build_schedule(&config.inner).map_err(to_py_err)?;
    Ok(schedule.stages().iter().map(|s| (s.dim, s.k)).collect())
}

#[pyfunction]
fn sq_euclidean_prefix(a: Vec<f32>, b: Vec<f32>, d: usize) -> PyResult<f32> {
    pgsv::distance::sq_euclidean_prefix(&a, &b, d).map_err(to_py_err)
}

#[pyfunction]
fn euclidean(a: Vec<f32>, b: Vec<f32>) -> PyResult<f32> {
    pgsv::distance::euclidean(&a, &b).map_err(to_py_err)
}

#[pyfunction]
fn cosine_sim(a: Vec<f32>, b: Vec<f32>) -> PyResult<f32> {
    pgsv::distance::cosine_sim(&a, &b).map_err(to_py_err)
}

#[pyfunction]
fn top1_accuracy(results: Vec<u64>, truth: Vec<u64>) -> PyResult<f64> {
    pgsv::bench::top1_accuracy(&results, &truth).map_err(to_py_err)
}

/// Benchmark one configuration; returns the report as a dict. Exactly one
/// of `truncated_dim` and `config` must be given.
#[pyfunction]
#[pyo3(signature = (corpus, queries, truncated_dim=None, config=None, repeats=10))]
fn benchmark<'py>(
    py: Python<'py>,
    corpus: PyRef<'_, PyEmbeddingMatrix>,
    queries: PyRef<'_, PyQueryBatch>,
    truncated_dim: Option<usize>,
    config: Option<PyProgressiveConfig>,
    repeats: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let method = match (truncated_dim, config) {
        (Some(dim), None) => Method::Truncated { dim },
        (None, Some(cfg)) => Method::Progressive(cfg.inner),
        _ => {
            return Err(PyValueError::new_err(
                "give exactly one of truncated_dim and config",
            ))
        }
    };
    let report = run_benchmark(&corpus.inner, &queries.inner, &method, repeats)
        .map_err(to_py_err)?;
    let json = JsonReport::from(&report);
    let d = PyDict::new(py);
    d.set_item("method", &json.method)?;
    d.set_item("start_dim", json.start_dim)?;
    d.set_item("max_dim", json.max_dim)?;
    d.set_item("initial_k", json.initial_k)?;
    d.set_item("pool_mode", json.pool_mode.map(|m| m.as_str()))?;
    d.set_item("accuracy_pct", json.accuracy_pct)?;
    d.set_item("median_runtime_sec", json.median_runtime_sec)?;
    d.set_item("n_repeats", json.n_repeats)?;
    d.set_item("n_queries", json.n_queries)?;
    d.set_item("n_docs", json.n_docs)?;
    d.set_item("corpus_hash", &json.corpus_hash)?;
    d.set_item("query_hash", &json.query_hash)?;
    d.set_item("timings_sec", &json.timings_sec)?;
    d.set_item("threads", json.threads)?;
    d.set_item("warmup", json.warmup)?;
    d.set_item("timing_valid", json.timing_valid)?;
    Ok(d)
}

#[pymodule]
fn pgsv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEmbeddingMatrix>()?;
    m.add_class::<PyQueryBatch>()?;
    m.add_class::<PyProgressiveConfig>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(topk, m)?)?;
    m.add_function(wrap_pyfunction!(top1, m)?)?;
    m.add_function(wrap_pyfunction!(progressive_search, m)?)?;
    m.add_function(wrap_pyfunction!(explain_search, m)?)?;
    m.add_function(wrap_pyfunction!(build_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(sq_euclidean_prefix, m)?)?;
    m.add_function(wrap_pyfunction!(euclidean, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_sim, m)?)?;
    m.add_function(wrap_pyfunction!(top1_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
