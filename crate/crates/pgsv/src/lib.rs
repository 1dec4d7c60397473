//! Prefix-truncated exact KNN retrieval and progressive coarse-to-fine
//! search over dense f32 embedding matrices, plus the benchmark harness
//! that measures top-1 accuracy and median runtime across parameter grids.
//!
//! Modules:
//! - [`store`]: embedding matrices, query batches, prefix views, file formats
//! - [`distance`]: Euclidean / cosine kernels over dimension prefixes
//! - [`knn`]: brute-force exact top-k (the truncated-retrieval baseline)
//! - [`progressive`]: dimension-doubling, K-halving staged search
//! - [`bench`]: accuracy / median-runtime measurement and sweeps
//! - [`datagen`]: deterministic synthetic corpora with planted ground truth

pub mod bench;
pub mod datagen;
pub mod distance;
pub mod error;
pub mod knn;
pub mod progressive;
pub mod store;

pub use bench::{run_benchmark, run_sweep, top1_accuracy, BenchReport, Method, SweepGrid};
pub use datagen::{generate, SynthSpec};
pub use distance::{batch_sq_euclidean, cosine_sim, euclidean, sq_euclidean_prefix, Metric};
pub use error::{Error, Result};
pub use knn::{top1, topk, Neighbor};
pub use progressive::{
    build_schedule, explain_search, progressive_search, CandidatePool, PoolMode,
    ProgressiveConfig, Stage, StageSchedule, StageTrace,
};
pub use store::{load_matrix, save_matrix, EmbeddingMatrix, PrefixView, QueryBatch};
