//! `pgsv` binary: generate, import, search, bench, sweep, info.
//!
//! Exit codes are a stable contract: 0 success, 2 validation failure,
//! 3 I/O failure, 4 empty input.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};

use config::{resolve, resolve_opt, ConfigMap};
use pgsv::bench::{run_benchmark, run_sweep, write_reports_csv, write_reports_json, Method};
use pgsv::datagen::{generate, SynthSpec, RNG_ALGORITHM};
use pgsv::error::Error;
use pgsv::knn::top1;
use pgsv::progressive::{progressive_search, PoolMode, ProgressiveConfig};
use pgsv::store::{
    import_csv, load_matrix, load_meta_sidecar, load_truth_csv, save_matrix, save_truth_csv,
};
use pgsv::{EmbeddingMatrix, Neighbor, QueryBatch, SweepGrid};

#[derive(Parser)]
#[command(
    name = "pgsv",
    version,
    about = "Prefix-truncated and progressive vector search with a benchmark harness"
)]
struct Cli {
    /// Key=value config file mirroring the long flags; flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads for search. Defaults to machine parallelism; the
    /// PGSV_THREADS environment variable applies when this flag is absent.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus, query set, and ground-truth file.
    Gen(GenArgs),
    /// Convert a CSV of `id,f1,f2,...` lines into the binary matrix format.
    ImportCsv(ImportCsvArgs),
    /// Search a corpus; prints one `query_index,doc_id,distance` line per query.
    Search(SearchArgs),
    /// Benchmark one configuration (accuracy + median runtime).
    Bench(BenchArgs),
    /// Benchmark a parameter grid and emit CSV/JSON reports.
    Sweep(SweepArgs),
    /// Print a matrix file's header.
    Info(InfoArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Corpus output path; queries, truth, and a generation manifest are
    /// written next to it.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long)]
    docs: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long = "noise-sigma")]
    noise_sigma: Option<f32>,
    #[arg(long)]
    decay: Option<f32>,
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long = "query-sigma")]
    query_sigma: Option<f32>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ImportCsvArgs {
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// L2-normalize each row on import (off by default; vectors are
    /// otherwise preserved verbatim).
    #[arg(long, action = ArgAction::SetTrue)]
    normalize: Option<bool>,
}

#[derive(Args)]
struct MethodArgs {
    /// Exact top-1 over the first --dim coordinates.
    #[arg(long, action = ArgAction::SetTrue)]
    truncated: Option<bool>,
    /// Progressive coarse-to-fine search.
    #[arg(long, action = ArgAction::SetTrue)]
    progressive: Option<bool>,
    /// Truncation width (with --truncated).
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long = "start-dim")]
    start_dim: Option<usize>,
    #[arg(long = "max-dim")]
    max_dim: Option<usize>,
    /// Initial neighbor count K (with --progressive).
    #[arg(long)]
    k: Option<usize>,
    /// Candidate pool mode: per-query | shared.
    #[arg(long)]
    pool: Option<String>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    queries: Option<PathBuf>,
    #[command(flatten)]
    method: MethodArgs,
    /// Write result lines here instead of stdout.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    queries: Option<PathBuf>,
    /// Ground-truth CSV (query_index,truth_doc_id). Required.
    #[arg(long, value_name = "FILE")]
    truth: Option<PathBuf>,
    #[command(flatten)]
    method: MethodArgs,
    /// Timed repetitions per configuration.
    #[arg(long)]
    repeats: Option<usize>,
    /// Write the CSV report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// Also write a JSON report (includes per-repeat timings).
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    queries: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    truth: Option<PathBuf>,
    /// Comma-separated truncation widths, e.g. 16,32,64.
    #[arg(long = "truncated-dims")]
    truncated_dims: Option<String>,
    /// Comma-separated progressive start dimensions.
    #[arg(long = "start-dims")]
    start_dims: Option<String>,
    /// Comma-separated progressive max dimensions.
    #[arg(long = "max-dims")]
    max_dims: Option<String>,
    /// Comma-separated initial K values.
    #[arg(long)]
    ks: Option<String>,
    /// Comma-separated pool modes (per-query, shared).
    #[arg(long)]
    pools: Option<String>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Run configurations concurrently. Accuracy-only: timings in the
    /// resulting reports are marked invalid.
    #[arg(long, action = ArgAction::SetTrue)]
    parallel: Option<bool>,
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct InfoArgs {
    /// Matrix file to describe.
    path: Option<PathBuf>,
}

enum CliError {
    Validation(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Lib(e) => match e {
                Error::Io(_) => 3,
                Error::EmptyCorpus
                | Error::EmptySubset
                | Error::EmptyQueries
                | Error::EmptyTruth => 4,
                _ => 2,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Validation(msg) => msg.clone(),
            CliError::Lib(e) => e.to_string(),
        }
    }
}

fn validation(problems: Vec<String>) -> CliError {
    CliError::Validation(problems.join("; "))
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    });
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => ConfigMap::load(path).map_err(CliError::Validation)?,
        None => ConfigMap::default(),
    };
    init_threads(cli.threads, &cfg)?;
    match cli.command {
        Command::Gen(args) => cmd_gen(args, &cfg),
        Command::ImportCsv(args) => cmd_import_csv(args, &cfg),
        Command::Search(args) => cmd_search(args, &cfg),
        Command::Bench(args) => cmd_bench(args, &cfg),
        Command::Sweep(args) => cmd_sweep(args, &cfg),
        Command::Info(args) => cmd_info(args, &cfg),
    }
}

/// Thread count precedence: --threads, config `threads`, PGSV_THREADS,
/// machine parallelism.
fn init_threads(flag: Option<usize>, cfg: &ConfigMap) -> Result<(), CliError> {
    let mut problems = Vec::new();
    let mut n = resolve_opt(flag, cfg, "threads", &mut problems);
    if !problems.is_empty() {
        return Err(validation(problems));
    }
    if n.is_none() {
        if let Ok(raw) = std::env::var("PGSV_THREADS") {
            n = Some(raw.parse().map_err(|_| {
                CliError::Validation(format!("PGSV_THREADS={raw:?} is not a thread count"))
            })?);
        }
    }
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Validation("threads must be at least 1".into()));
        }
        // Ignore the error from re-initializing; only the first call counts.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// `<stem>.<suffix>` next to `path`.
fn derived_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.with_extension("");
    PathBuf::from(format!("{}.{suffix}", stem.display()))
}

fn cmd_gen(args: GenArgs, cfg: &ConfigMap) -> Result<(), CliError> {
    let mut problems = Vec::new();
    let out = resolve_opt(args.out, cfg, "out", &mut problems);
    let spec = SynthSpec {
        n_docs: resolve(args.docs, cfg, "docs", 1000, &mut problems),
        dim: resolve(args.dim, cfg, "dim", 64, &mut problems),
        n_clusters: resolve(args.clusters, cfg, "clusters", 50, &mut problems),
        noise_sigma: resolve(args.noise_sigma, cfg, "noise-sigma", 0.35, &mut problems),
        decay: resolve(args.decay, cfg, "decay", 0.99, &mut problems),
        n_queries: resolve(args.queries, cfg, "queries", 100, &mut problems),
        query_sigma: resolve(args.query_sigma, cfg, "query-sigma", 0.44, &mut problems),
        seed: resolve(args.seed, cfg, "seed", 0, &mut problems),
    };
    if out.is_none() {
        problems.push("--out is required".into());
    }
    if let Err(e) = spec.validate() {
        problems.push(e.to_string());
    }
    if !problems.is_empty() {
        return Err(validation(problems));
    }
    let out = out.expect("validated above");

    let (corpus, queries) = generate(&spec)?;
    let queries_path = derived_path(&out, "queries.pgsv");
    let truth_path = derived_path(&out, "truth.csv");
    let manifest_path = derived_path(&out, "gen.json");
    save_matrix(&corpus, &out)?;
    save_matrix(&queries.to_matrix(), &queries_path)?;
    save_truth_csv(&truth_path, queries.ground_truth().expect("generated"))?;
    let manifest = serde_json::json!({ "rng": RNG_ALGORITHM, "spec": spec });
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(Error::from)?;
    eprintln!(
        "wrote {} ({} x {}), {}, {}, {}",
        out.display(),
        corpus.n_rows(),
        corpus.dim(),
        queries_path.display(),
        truth_path.display(),
        manifest_path.display()
    );
    Ok(())
}

fn cmd_import_csv(args: ImportCsvArgs, cfg: &ConfigMap) -> Result<(), CliError> {
    let mut problems = Vec::new();
    let input = resolve_opt(args.input, cfg, "input", &mut problems);
    let out = resolve_opt(args.out, cfg, "out", &mut problems);
    let normalize = resolve(args.normalize, cfg, "normalize", false, &mut problems);
    if input.is_none() {
        problems.push("--input is required".into());
    }
    if out.is_none() {
        problems.push("--out is required".into());
    }
    if !problems.is_empty() {
        return Err(validation(problems));
    }
    let (input, out) = (input.unwrap(), out.unwrap());
    let file = std::fs::File::open(&input).map_err(Error::from)?;
    let matrix = import_csv(file, normalize)?;
    save_matrix(&matrix, &out)?;
    eprintln!(
        "imported {} rows x {} dims into {}",
        matrix.n_rows(),
        matrix.dim(),
        out.display()
    );
    Ok(())
}

impl MethodArgs {
    fn resolve(self, cfg: &ConfigMap) -> Result<Method, CliError> {
        let mut problems = Vec::new();
        let truncated = resolve(self.truncated, cfg, "truncated", false, &mut problems);
        let progressive = resolve(self.progressive, cfg, "progressive", false, &mut problems);
        let dim = resolve_opt(self.dim, cfg, "dim", &mut problems);
        let start_dim = resolve_opt(self.start_dim, cfg, "start-dim", &mut problems);
        let max_dim = resolve_opt(self.max_dim, cfg, "max-dim", &mut problems);
        let k = resolve_opt(self.k, cfg, "k", &mut problems);
        let pool: Option<String> = resolve_opt(self.pool, cfg, "pool", &mut problems);

        if truncated == progressive {
            problems.push("exactly one of --truncated and --progressive is required".into());
        }
        let method = if truncated && !progressive {
            for (given, name) in [
                (start_dim.is_some(), "--start-dim"),
                (max_dim.is_some(), "--max-dim"),
                (k.is_some(), "--k"),
                (pool.is_some(), "--pool"),
            ] {
                if given {
                    problems.push(format!("{name} only applies to --progressive"));
                }
            }
            match dim {
                Some(dim) => Some(Method::Truncated { dim }),
                None => {
                    problems.push("--truncated requires --dim".into());
                    None
                }
            }
        } else if progressive && !truncated {
            if dim.is_some() {
                problems.push("--dim only applies to --truncated".into());
            }
            let pool_mode = match pool.as_deref() {
                None => Some(PoolMode::PerQuery),
                Some(raw) => match PoolMode::parse(raw) {
                    Ok(m) => Some(m),
                    Err(e) => {
                        problems.push(e.to_string());
                        None
                    }
                },
            };
            for (missing, name) in [
                (start_dim.is_none(), "--start-dim"),
                (max_dim.is_none(), "--max-dim"),
                (k.is_none(), "--k"),
            ] {
                if missing {
                    problems.push(format!("--progressive requires {name}"));
                }
            }
            match (start_dim, max_dim, k, pool_mode) {
                (Some(ds), Some(dm), Some(k), Some(pm)) => {
                    let cfg = ProgressiveConfig::new(ds, dm, k, pm);
                    if let Err(e) = cfg.validate() {
                        problems.push(e.to_string());
                    }
                    Some(Method::Progressive(cfg))
                }
                _ => None,
            }
        } else {
            None
        };
        match method {
            Some(m) if problems.is_empty() => Ok(m),
            _ => Err(validation(problems)),
        }
    }
}

fn load_inputs(
    corpus: Option<PathBuf>,
    queries: Option<PathBuf>,
    cfg: &ConfigMap,
) -> Result<(EmbeddingMatrix, QueryBatch), CliError> {
    let mut problems = Vec::new();
    let corpus = resolve_opt(corpus, cfg, "corpus", &mut problems);
    let queries = resolve_opt(queries, cfg, "queries", &mut problems);
    if corpus.is_none() {
        problems.push("--corpus is required".into());
    }
    if queries.is_none() {
        problems.push("--queries is required".into());
    }
    if !problems.is_empty() {
        return Err(validation(problems));
    }
    let corpus = load_matrix(corpus.unwrap())?;
    let queries = QueryBatch::from_matrix(load_matrix(queries.unwrap())?);
    Ok((corpus, queries))
}

fn out_stream(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(std::fs::File::create(p).map_err(Error::from)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn cmd_search(args: SearchArgs, cfg: &ConfigMap) -> Result<(), CliError> {
    let method = args.method.resolve(cfg)?;
    let (corpus, queries) = load_inputs(args.corpus, args.queries, cfg)?;
    let results: Vec<Neighbor> = match &method {
        Method::Truncated { dim } => top1(&corpus, &queries, *dim, None)?,
        Method::Progressive(pcfg) => progressive_search(&corpus, &queries, pcfg)?,
    };
    let mut out = out_stream(&args.output)?;
    for (i, n) in results.iter().enumerate() {
        // True Euclidean distance at the output boundary.
        writeln!(out, "{},{},{:?}", i, n.doc_id, n.sq_dist.sqrt()).map_err(Error::from)?;
    }
    Ok(())
}

fn attach_truth(
    queries: &mut QueryBatch,
    truth: Option<PathBuf>,
    cfg: &ConfigMap,
) -> Result<(), CliError> {
    let mut problems = Vec::new();
    let truth = resolve_opt(truth, cfg, "truth", &mut problems);
    let Some(truth) = truth else {
        problems.push("--truth is required".into());
        return Err(validation(problems));
    };
    let ids = load_truth_csv(truth)?;
    queries.set_ground_truth(ids)?;
    Ok(())
}

fn cmd_bench(args: BenchArgs, cfg: &ConfigMap) -> Result<(), CliError> {
    let method = args.method.resolve(cfg)?;
    let mut problems = Vec::new();
    let repeats = resolve(args.repeats, cfg, "repeats", 10, &mut problems);
    if !problems.is_empty() {
        return Err(validation(problems));
    }
    let (corpus, mut queries) = load_inputs(args.corpus, args.queries, cfg)?;
    attach_truth(&mut queries, args.truth, cfg)?;
    let report = run_benchmark(&corpus, &queries, &method, repeats)?;
    let reports = [report];
    write_reports_csv(&reports, out_stream(&args.csv)?)?;
    if let Some(json_path) = &args.json {
        write_reports_json(&reports, std::fs::File::create(json_path).map_err(Error::from)?)?;
    }
    Ok(())
}

fn parse_list<T: std::str::FromStr>(raw: &Option<String>, what: &str) -> Result<Vec<T>, String> {
    let Some(raw) = raw else {
        return Ok(Vec::new());
    };
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| format!("bad {what} entry {s:?}"))
        })
        .collect()
}

fn cmd_sweep(args: SweepArgs, cfg: &ConfigMap) -> Result<(), CliError> {
    let mut problems = Vec::new();
    let repeats = resolve(args.repeats, cfg, "repeats", 10, &mut problems);
    let parallel = resolve(args.parallel, cfg, "parallel", false, &mut problems);
    let truncated_dims: Option<String> =
        resolve_opt(args.truncated_dims, cfg, "truncated-dims", &mut problems);
    let start_dims: Option<String> = resolve_opt(args.start_dims, cfg, "start-dims", &mut problems);
    let max_dims: Option<String> = resolve_opt(args.max_dims, cfg, "max-dims", &mut problems);
    let ks: Option<String> = resolve_opt(args.ks, cfg, "ks", &mut problems);
    let pools: Option<String> = resolve_opt(args.pools, cfg, "pools", &mut problems);

    let mut grid = SweepGrid::default();
    let mut collect = |field: &mut Vec<usize>, raw: &Option<String>, what: &str| {
        match parse_list::<usize>(raw, what) {
            Ok(v) => *field = v,
            Err(e) => problems.push(e),
        }
    };
    collect(&mut grid.truncated_dims, &truncated_dims, "truncated-dims");
    collect(&mut grid.start_dims, &start_dims, "start-dims");
    collect(&mut grid.max_dims, &max_dims, "max-dims");
    collect(&mut grid.initial_ks, &ks, "ks");
    match parse_list::<String>(&pools, "pools") {
        Ok(raw_pools) => {
            let raw_pools = if raw_pools.is_empty() && !grid.start_dims.is_empty() {
                vec!["per-query".to_string()]
            } else {
                raw_pools
            };
            for raw in raw_pools {
                match PoolMode::parse(&raw) {
                    Ok(m) => grid.pool_modes.push(m),
                    Err(e) => problems.push(e.to_string()),
                }
            }
        }
        Err(e) => problems.push(e),
    }
    if !problems.is_empty() {
        return Err(validation(problems));
    }

    let (corpus, mut queries) = load_inputs(args.corpus, args.queries, cfg)?;
    attach_truth(&mut queries, args.truth, cfg)?;
    let (reports, skipped) = run_sweep(&corpus, &queries, &grid, repeats, parallel)?;
    for line in &skipped {
        eprintln!("{line}");
    }
    write_reports_csv(&reports, out_stream(&args.csv)?)?;
    if let Some(json_path) = &args.json {
        write_reports_json(&reports, std::fs::File::create(json_path).map_err(Error::from)?)?;
    }
    Ok(())
}

fn cmd_info(args: InfoArgs, cfg: &ConfigMap) -> Result<(), CliError> {
    let mut problems = Vec::new();
    let path = resolve_opt(args.path, cfg, "path", &mut problems);
    let Some(path) = path else {
        problems.push("matrix path is required".into());
        return Err(validation(problems));
    };
    let matrix = load_matrix(&path)?;
    println!("path: {}", path.display());
    println!("format_version: {}", pgsv::store::FORMAT_VERSION);
    println!("n_rows: {}", matrix.n_rows());
    println!("dim: {}", matrix.dim());
    println!("content_hash: {}", matrix.content_hash());
    match load_meta_sidecar(&path)? {
        Some(records) => println!("meta_sidecar: {} records", records.len()),
        None => println!("meta_sidecar: absent"),
    }
    Ok(())
}
