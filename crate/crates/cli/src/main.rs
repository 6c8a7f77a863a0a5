//! `vxs`: build, search and evaluate vector indexes from the command line.
//!
//! Reports go to stdout as JSON, data artifacts to the paths given by the
//! flags, and progress messages to stderr. Exit status is 0 on success, 2
//! for usage or input errors, and 1 for anything else.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use vxsearch::dataset::{
    load_groundtruth, load_vectors, recall_at_k, write_fvecs, write_ivecs, GaussianMixture,
    RecallMode, VectorFormat,
};
use vxsearch::eval::{
    default_dst_grid, dst_tune, min_nprobe_for_recall, recall_sweep, write_tuning_csv,
};
use vxsearch::graph::{
    bfs_search_with, dst_search_with, knn_graph_build, load_graph, par_map_queries,
    parse_adjacency_text, save_graph, BloomVisitedSet, ProximityGraph, SearchOptions,
    TraversalParams, VisitedConfig,
};
use vxsearch::ivf::{default_nlist, ivf_build, load_index, save_index, IvfBuildParams, IvfIndex, IvfMode, IvfSearchParams};
use vxsearch::pq::OpqMatrix;
use vxsearch::topk::{ahpq_l1_length, hpq_hold_probability};
use vxsearch::{Dataset, GroundTruth, SearchResult, SearchStats};

#[derive(Parser)]
#[command(name = "vxs", version, about = "IVF-PQ and proximity-graph vector search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample base and query sets from a seeded Gaussian mixture.
    GenSynthetic(GenSyntheticArgs),
    /// Exact k nearest neighbors of each query, written as ivecs.
    Groundtruth(GroundtruthArgs),
    /// Train and write an IVF index (VXIV).
    #[command(name = "build-ivfpq")]
    BuildIvf(BuildIvfArgs),
    /// Build a kNN proximity graph, or ingest an adjacency list (VXGR).
    BuildGraph(BuildGraphArgs),
    SearchIvf(SearchIvfArgs),
    SearchGraph(SearchGraphArgs),
    /// Mean recall for a list of nprobe values, as CSV.
    RecallSweep(RecallSweepArgs),
    /// Smallest nprobe that reaches each recall goal.
    MinNprobe(MinNprobeArgs),
    /// Rank (mg, mc) settings for delayed-synchronization traversal.
    TuneDst(TuneDstArgs),
    /// First-level queue length for an approximate hierarchical queue.
    SizeAhpq(SizeAhpqArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Auto,
    Fvecs,
    Bvecs,
}

#[derive(Clone, Copy, ValueEnum)]
enum RecallArg {
    Intersection,
    FirstHit,
}

impl From<RecallArg> for RecallMode {
    fn from(r: RecallArg) -> Self {
        match r {
            RecallArg::Intersection => RecallMode::Intersection,
            RecallArg::FirstHit => RecallMode::FirstHit,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Bfs,
    Mcs,
    Dst,
}

#[derive(Args)]
struct GenSyntheticArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    base: usize,
    #[arg(long, default_value_t = 0)]
    queries: usize,
    #[arg(long, default_value_t = 16)]
    clusters: usize,
    #[arg(long, default_value_t = 10.0)]
    sigma: f32,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    base_out: PathBuf,
    /// Required when --queries is positive.
    #[arg(long)]
    query_out: Option<PathBuf>,
}

#[derive(Args)]
struct GroundtruthArgs {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildIvfArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    format: FormatArg,
    /// Defaults to round(sqrt(N)).
    #[arg(long)]
    nlist: Option<usize>,
    /// PQ sub-spaces; ignored in flat mode.
    #[arg(long, default_value_t = 8)]
    m: usize,
    #[arg(long, default_value_t = IvfMode::PqResidual)]
    mode: IvfMode,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// D×D rotation stored as D fvecs records of length D.
    #[arg(long)]
    opq: Option<PathBuf>,
    #[arg(long, default_value_t = vxsearch::clustering::DEFAULT_ITERS)]
    iters: usize,
}

#[derive(Args)]
struct BuildGraphArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    format: FormatArg,
    /// Neighbors per node for the kNN builder.
    #[arg(long, required_unless_present = "adjacency")]
    degree: Option<usize>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Ingest `id: n1 n2 ...` lines instead of building.
    #[arg(long)]
    adjacency: Option<PathBuf>,
}

#[derive(Args)]
struct EvalOutputs {
    /// Ground truth (ivecs) for recall columns.
    #[arg(long)]
    groundtruth: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RecallArg::Intersection)]
    recall_mode: RecallArg,
    /// Result ids, one ivecs record per query.
    #[arg(long)]
    out: PathBuf,
    /// Per-query CSV of recall and search counters.
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct SearchIvfArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    nprobe: usize,
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    outputs: EvalOutputs,
}

#[derive(Args)]
struct VisitedArgs {
    #[arg(long, default_value_t = BloomVisitedSet::DEFAULT_BITS)]
    bloom_bits: u64,
    #[arg(long, default_value_t = BloomVisitedSet::DEFAULT_HASHES)]
    bloom_hashes: u32,
    /// Track visited nodes exactly instead of with a Bloom filter.
    #[arg(long)]
    exact_visited: bool,
    #[arg(long)]
    candidate_cap: Option<usize>,
}

impl VisitedArgs {
    fn options(&self, seed: u64) -> SearchOptions {
        let visited = if self.exact_visited {
            VisitedConfig::Exact
        } else {
            VisitedConfig::Bloom {
                bits: self.bloom_bits,
                hashes: self.bloom_hashes,
                seed,
            }
        };
        SearchOptions {
            visited,
            candidate_cap: self.candidate_cap,
        }
    }
}

#[derive(Args)]
struct SearchGraphArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, value_enum, default_value_t = Algorithm::Bfs)]
    alg: Algorithm,
    #[arg(long)]
    l: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    mg: usize,
    #[arg(long, default_value_t = 1)]
    mc: usize,
    /// Seeds the Bloom filter hashes.
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    visited: VisitedArgs,
    #[command(flatten)]
    outputs: EvalOutputs,
}

#[derive(Args)]
struct RecallSweepArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    groundtruth: PathBuf,
    #[arg(long)]
    k: usize,
    /// Comma-separated, strictly increasing. Defaults to powers of two
    /// followed by nlist.
    #[arg(long, value_delimiter = ',')]
    nprobe: Vec<usize>,
    #[arg(long, value_enum, default_value_t = RecallArg::Intersection)]
    recall_mode: RecallArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug)]
struct Goal {
    k: usize,
    recall: f64,
}

fn parse_goal(s: &str) -> Result<Goal, String> {
    let (k, r) = s
        .split_once(':')
        .ok_or_else(|| format!("expected K:RECALL, got {s:?}"))?;
    let k: usize = k.trim().parse().map_err(|e| format!("bad K in {s:?}: {e}"))?;
    let recall: f64 = r.trim().parse().map_err(|e| format!("bad recall in {s:?}: {e}"))?;
    if k == 0 || !(0.0..=1.0).contains(&recall) {
        return Err(format!("goal {s:?} needs K >= 1 and 0 <= RECALL <= 1"));
    }
    Ok(Goal { k, recall })
}

#[derive(Args)]
struct MinNprobeArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    groundtruth: PathBuf,
    /// Recall goal as K:RECALL, e.g. 10:0.8. Repeatable.
    #[arg(long = "goal", required = true, value_parser = parse_goal)]
    goals: Vec<Goal>,
}

#[derive(Args)]
struct TuneDstArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    groundtruth: PathBuf,
    #[arg(long)]
    l: usize,
    #[arg(long)]
    k: usize,
    /// Comma-separated mg values; default 1..=8.
    #[arg(long, value_delimiter = ',')]
    mg: Vec<usize>,
    /// Comma-separated mc values; default 1,2,4.
    #[arg(long, value_delimiter = ',')]
    mc: Vec<usize>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[command(flatten)]
    visited: VisitedArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SizeAhpqArgs {
    #[arg(long = "K")]
    k: usize,
    #[arg(long)]
    queues: usize,
    #[arg(long, default_value_t = 0.99)]
    target: f64,
}

/// Failure with the exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

type CliResult<T = ()> = Result<T, Failure>;

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

/// Input and parameter problems exit with 2; anything else with 1.
fn library(err: vxsearch::Error) -> Failure {
    use vxsearch::Error;
    let code = match err {
        Error::Malformed { .. } | Error::DimensionMismatch { .. } | Error::InvalidParameter(_) => 2,
        Error::Io { .. } | Error::Write(_) => 1,
    };
    Failure { code, message: err.to_string() }
}

fn read_input<T>(path: &Path, load: impl FnOnce(&Path) -> vxsearch::Result<T>) -> CliResult<T> {
    load(path).map_err(|e| match e {
        vxsearch::Error::Io { source, .. } => usage(format!("cannot read {}: {source}", path.display())),
        other => usage(format!("{}: {other}", path.display())),
    })
}

fn vectors(path: &Path, format: FormatArg) -> CliResult<Dataset> {
    let format = match format {
        FormatArg::Auto => VectorFormat::from_path(path),
        FormatArg::Fvecs => VectorFormat::Fvecs,
        FormatArg::Bvecs => VectorFormat::Bvecs,
    };
    read_input(path, |p| load_vectors(p, format))
}

fn groundtruth(path: &Path) -> CliResult<GroundTruth> {
    read_input(path, |p| load_groundtruth(p))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure { code: 1, message: format!("cannot create {}: {e}", path.display()) })
}

fn finish(path: &Path, out: BufWriter<File>) -> CliResult {
    out.into_inner()
        .map_err(|e| e.into_error())
        .and_then(|f| f.sync_all())
        .map_err(|e| Failure { code: 1, message: format!("cannot write {}: {e}", path.display()) })
}

fn write_with(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> vxsearch::Result<()>) -> CliResult {
    let mut out = create(path)?;
    body(&mut out).map_err(|e| Failure { code: 1, message: format!("{}: {e}", path.display()) })?;
    finish(path, out)
}

fn emit(report: Value) {
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    // a closed pipe downstream is not an error worth reporting
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn log(message: impl AsRef<str>) {
    eprintln!("vxs: {}", message.as_ref());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenSynthetic(a) => gen_synthetic(a),
        Command::Groundtruth(a) => groundtruth_cmd(a),
        Command::BuildIvf(a) => build_ivf(a),
        Command::BuildGraph(a) => build_graph(a),
        Command::SearchIvf(a) => search_ivf(a),
        Command::SearchGraph(a) => search_graph(a),
        Command::RecallSweep(a) => recall_sweep_cmd(a),
        Command::MinNprobe(a) => min_nprobe(a),
        Command::TuneDst(a) => tune_dst(a),
        Command::SizeAhpq(a) => size_ahpq(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("vxs: error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn gen_synthetic(a: GenSyntheticArgs) -> CliResult {
    let mix = GaussianMixture::new(a.dim, a.clusters, a.sigma, a.seed).map_err(library)?;
    let base = mix.sample(a.base, a.seed.wrapping_add(1)).map_err(library)?;
    write_with(&a.base_out, |w| write_fvecs(w, &base))?;
    let mut report = json!({ "dim": a.dim, "base": a.base, "clusters": a.clusters, "seed": a.seed });
    if a.queries > 0 {
        let path = a.query_out.ok_or_else(|| usage("--query-out is required with --queries"))?;
        let queries = mix.sample(a.queries, a.seed.wrapping_add(2)).map_err(library)?;
        write_with(&path, |w| write_fvecs(w, &queries))?;
        report["queries"] = json!(a.queries);
    }
    emit(report);
    Ok(())
}

fn groundtruth_cmd(a: GroundtruthArgs) -> CliResult {
    let base = vectors(&a.base, FormatArg::Auto)?;
    let queries = vectors(&a.queries, FormatArg::Auto)?;
    let truth = GroundTruth::compute(&base, &queries, a.k).map_err(library)?;
    write_with(&a.out, |w| write_ivecs(w, truth.rows()))?;
    emit(json!({ "queries": truth.len(), "k": a.k }));
    Ok(())
}

fn histogram(lengths: &[usize], buckets: usize) -> Value {
    let min = lengths.iter().copied().min().unwrap_or(0);
    let max = lengths.iter().copied().max().unwrap_or(0);
    let width = ((max - min) / buckets + 1).max(1);
    let mut counts = vec![0usize; buckets];
    for &len in lengths {
        counts[((len - min) / width).min(buckets - 1)] += 1;
    }
    let mean = lengths.iter().sum::<usize>() as f64 / lengths.len().max(1) as f64;
    json!({ "min": min, "max": max, "mean": mean, "bucket_width": width, "counts": counts })
}

fn build_ivf(a: BuildIvfArgs) -> CliResult {
    let data = vectors(&a.input, a.format)?;
    let nlist = a.nlist.unwrap_or_else(|| default_nlist(data.len()));
    let m = if a.mode.uses_pq() { a.m } else { 0 };
    let mut params = IvfBuildParams::new(nlist, m, a.mode, a.seed).with_iters(a.iters);
    if let Some(path) = &a.opq {
        let rows = vectors(path, FormatArg::Fvecs)?;
        let rotation = OpqMatrix::new(rows.dim(), rows.as_slice().to_vec())
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        params = params.with_opq(rotation);
    }
    log(format!("training {} index: N={}, D={}, nlist={nlist}, m={m}", a.mode, data.len(), data.dim()));
    let start = Instant::now();
    let index = ivf_build(&data, &params).map_err(library)?;
    let build_secs = start.elapsed().as_secs_f64();
    save_index(&index, &a.out).map_err(library)?;
    let bytes = std::fs::metadata(&a.out).map(|m| m.len()).unwrap_or(0);
    emit(json!({
        "out": a.out,
        "mode": a.mode.to_string(),
        "n": index.len(),
        "dim": index.dim(),
        "nlist": index.nlist(),
        "m": m,
        "opq": a.opq.is_some(),
        "seed": a.seed,
        "file_bytes": bytes,
        "build_seconds": build_secs,
        "list_lengths": histogram(&index.list_lengths(), 10),
    }));
    Ok(())
}

fn build_graph(a: BuildGraphArgs) -> CliResult {
    let data = vectors(&a.input, a.format)?;
    let start = Instant::now();
    let (graph, stats) = match &a.adjacency {
        Some(path) => {
            let text = read_input(path, |p| {
                std::fs::read_to_string(p).map_err(|e| vxsearch::Error::Io { path: p.into(), source: e })
            })?;
            let rows = parse_adjacency_text(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            ProximityGraph::from_adjacency(rows, &data).map_err(library)?
        }
        None => {
            let degree = a.degree.ok_or_else(|| usage("--degree is required"))?;
            log(format!("building {degree}-NN graph over {} vectors", data.len()));
            knn_graph_build(&data, degree).map_err(library)?
        }
    };
    let build_secs = start.elapsed().as_secs_f64();
    save_graph(&graph, &a.out).map_err(library)?;
    let degrees: Vec<usize> = graph.rows().iter().map(Vec::len).collect();
    emit(json!({
        "out": a.out,
        "nodes": graph.len(),
        "max_degree": graph.max_degree(),
        "entry": graph.entry(),
        "edges": graph.edge_count(),
        "repair_edges": stats.repair_edges,
        "seed": a.seed,
        "build_seconds": build_secs,
        "degrees": histogram(&degrees, 10),
    }));
    Ok(())
}

/// Writes result ids and the metrics CSV, and returns the summary report.
fn write_search_outputs(
    outputs: &EvalOutputs,
    results: &[(SearchResult, SearchStats)],
    k: usize,
    base_len: usize,
) -> CliResult<Value> {
    let mode = RecallMode::from(outputs.recall_mode);
    let recalls = match &outputs.groundtruth {
        Some(path) => {
            let truth = groundtruth(path)?;
            if truth.len() != results.len() {
                return Err(usage(format!(
                    "{} has {} rows for {} queries",
                    path.display(),
                    truth.len(),
                    results.len()
                )));
            }
            truth.validate(base_len).map_err(library)?;
            let r = results
                .iter()
                .zip(truth.rows())
                .map(|((res, _), row)| recall_at_k(&res.ids(), row, k, mode))
                .collect::<vxsearch::Result<Vec<_>>>()
                .map_err(library)?;
            Some(r)
        }
        None => None,
    };

    let ids: Vec<Vec<u32>> = results.iter().map(|(r, _)| r.ids()).collect();
    write_with(&outputs.out, |w| write_ivecs(w, &ids))?;
    if let Some(path) = &outputs.metrics {
        write_with(path, |w| {
            writeln!(w, "query,recall,hops,nodes_visited,distance_computations,underfilled")?;
            for (q, (_, s)) in results.iter().enumerate() {
                let recall = recalls.as_ref().map(|r| r[q].to_string()).unwrap_or_default();
                writeln!(
                    w,
                    "{q},{recall},{},{},{},{}",
                    s.hops, s.nodes_visited, s.distance_computations, s.underfilled
                )?;
            }
            Ok(())
        })?;
    }

    let n = results.len().max(1) as f64;
    let mean = |f: fn(&SearchStats) -> u64| results.iter().map(|(_, s)| f(s) as f64).sum::<f64>() / n;
    let mut report = json!({
        "queries": results.len(),
        "k": k,
        "mean_hops": mean(|s| s.hops),
        "mean_nodes_visited": mean(|s| s.nodes_visited),
        "mean_distance_computations": mean(|s| s.distance_computations),
        "underfilled": results.iter().filter(|(_, s)| s.underfilled).count(),
    });
    if let Some(r) = recalls {
        report["recall"] = json!(r.iter().sum::<f64>() / n);
        report["recall_mode"] = json!(mode);
    }
    Ok(report)
}

fn search_ivf(a: SearchIvfArgs) -> CliResult {
    let index: IvfIndex = read_input(&a.index, |p| load_index(p))?;
    let queries = vectors(&a.queries, FormatArg::Auto)?;
    let params = IvfSearchParams { nprobe: a.nprobe, k: a.k };
    let rows: Vec<&[f32]> = queries.iter().collect();
    let start = Instant::now();
    let results = par_map_queries(&rows, a.outputs.workers, |q| index.search(q, &params)).map_err(library)?;
    let secs = start.elapsed().as_secs_f64();
    let mut report = write_search_outputs(&a.outputs, &results, a.k, index.len())?;
    report["nprobe"] = json!(a.nprobe);
    report["search_seconds"] = json!(secs);
    emit(report);
    Ok(())
}

fn search_graph(a: SearchGraphArgs) -> CliResult {
    let graph = read_input(&a.graph, |p| load_graph(p))?;
    let base = vectors(&a.base, FormatArg::Auto)?;
    let queries = vectors(&a.queries, FormatArg::Auto)?;
    let options = a.visited.options(a.seed);
    let params = match a.alg {
        Algorithm::Bfs => TraversalParams::bfs(a.l, a.k),
        Algorithm::Mcs => TraversalParams { l: a.l, k: a.k, mg: 1, mc: a.mc },
        Algorithm::Dst => TraversalParams { l: a.l, k: a.k, mg: a.mg, mc: a.mc },
    };
    let rows: Vec<&[f32]> = queries.iter().collect();
    let start = Instant::now();
    let results = par_map_queries(&rows, a.outputs.workers, |q| match a.alg {
        Algorithm::Bfs => bfs_search_with(&graph, &base, q, a.l, a.k, &options),
        _ => dst_search_with(&graph, &base, q, &params, &options),
    })
    .map_err(library)?;
    let secs = start.elapsed().as_secs_f64();
    let mut report = write_search_outputs(&a.outputs, &results, a.k, base.len())?;
    let fp = results
        .iter()
        .map(|(_, s)| s.bloom_false_positive_upper)
        .fold(0.0, f64::max);
    report["params"] = json!(params);
    report["max_bloom_false_positive_rate"] = json!(fp);
    report["search_seconds"] = json!(secs);
    emit(report);
    Ok(())
}

fn recall_sweep_cmd(a: RecallSweepArgs) -> CliResult {
    let index = read_input(&a.index, |p| load_index(p))?;
    let queries = vectors(&a.queries, FormatArg::Auto)?;
    let truth = groundtruth(&a.groundtruth)?;
    let nprobes = if a.nprobe.is_empty() {
        let mut v: Vec<usize> = std::iter::successors(Some(1usize), |&p| Some(p * 2))
            .take_while(|&p| p < index.nlist())
            .collect();
        v.push(index.nlist());
        v
    } else {
        a.nprobe.clone()
    };
    let curve = recall_sweep(&index, &queries, &truth, a.k, &nprobes, a.recall_mode.into()).map_err(library)?;
    write_with(&a.out, |w| curve.write_csv(w))?;
    emit(json!(curve));
    Ok(())
}

fn min_nprobe(a: MinNprobeArgs) -> CliResult {
    let index = read_input(&a.index, |p| load_index(p))?;
    let queries = vectors(&a.queries, FormatArg::Auto)?;
    let truth = groundtruth(&a.groundtruth)?;
    let mut out = Vec::new();
    for goal in &a.goals {
        let found = min_nprobe_for_recall(&index, &queries, &truth, goal.k, goal.recall).map_err(library)?;
        out.push(json!({ "k": goal.k, "goal": goal.recall, "result": found }));
    }
    emit(json!({ "nlist": index.nlist(), "goals": out }));
    Ok(())
}

fn tune_dst(a: TuneDstArgs) -> CliResult {
    let graph = read_input(&a.graph, |p| load_graph(p))?;
    let base = vectors(&a.base, FormatArg::Auto)?;
    let queries = vectors(&a.queries, FormatArg::Auto)?;
    let truth = groundtruth(&a.groundtruth)?;
    let grid: Vec<(usize, usize)> = if a.mg.is_empty() && a.mc.is_empty() {
        default_dst_grid()
    } else {
        let mgs = if a.mg.is_empty() { (1..=8).collect() } else { a.mg.clone() };
        let mcs = if a.mc.is_empty() { vec![1, 2, 4] } else { a.mc.clone() };
        mgs.iter().flat_map(|&mg| mcs.iter().map(move |&mc| (mg, mc))).collect()
    };
    let options = a.visited.options(a.seed);
    log(format!("evaluating {} (mg, mc) settings on {} queries", grid.len(), queries.len()));
    let table = dst_tune(&graph, &base, &queries, &truth, a.k, a.l, &grid, &options, a.workers)
        .map_err(library)?;
    write_with(&a.out, |w| write_tuning_csv(&table, w))?;
    emit(json!({ "best": table[0], "configurations": table.len() }));
    Ok(())
}

fn size_ahpq(a: SizeAhpqArgs) -> CliResult {
    let l1 = ahpq_l1_length(a.k, a.queues, a.target).map_err(library)?;
    let tail: f64 = (l1 + 1..=a.k)
        .map(|j| hpq_hold_probability(a.k, a.queues, j))
        .sum::<vxsearch::Result<f64>>()
        .map_err(library)?;
    emit(json!({
        "k": a.k,
        "queues": a.queues,
        "target": a.target,
        "l1_len": l1,
        "overflow_bound": a.queues as f64 * tail,
    }));
    Ok(())
}
