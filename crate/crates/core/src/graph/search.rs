//! Best-first search (BFS) and delayed-synchronization traversal (DST).
//!
//! Both keep a candidate queue `C` ordered by distance, a result queue `R`
//! bounded to `l` entries, and a visited set. BFS evaluates the single best
//! candidate per iteration. DST keeps up to `mg` groups of up to `mc`
//! candidates in flight; whenever the oldest group finishes, the pipeline
//! is refilled from `C` against the current `R` threshold, without waiting
//! for the other in-flight groups. With `mg = 1` DST degenerates to
//! multi-candidate search (MCS), and with `mg = mc = 1` to BFS.
//!
//! The model is a deterministic serialization of the pipelined hardware:
//! groups complete in launch order, and a group's neighbor evaluations take
//! effect at completion.

use std::collections::{BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::neighbor::{l2_sq, Neighbor, SearchResult, SearchStats};
use crate::topk::BoundedMinSet;

use super::bloom::{BloomVisitedSet, ExactVisitedSet, VisitedSet};
use super::ProximityGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraversalParams {
    /// Result queue capacity.
    pub l: usize,
    pub k: usize,
    /// Candidate groups in flight.
    pub mg: usize,
    /// Candidates per group.
    pub mc: usize,
}

impl TraversalParams {
    pub fn bfs(l: usize, k: usize) -> Self {
        Self { l, k, mg: 1, mc: 1 }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.l {
            return Err(Error::param(format!(
                "need 1 <= k <= l, got k = {}, l = {}",
                self.k, self.l
            )));
        }
        if self.mg == 0 || self.mc == 0 {
            return Err(Error::param(format!(
                "mg and mc must be positive, got mg = {}, mc = {}",
                self.mg, self.mc
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VisitedConfig {
    Bloom { bits: u64, hashes: u32, seed: u64 },
    Exact,
}

impl Default for VisitedConfig {
    fn default() -> Self {
        VisitedConfig::Bloom {
            bits: BloomVisitedSet::DEFAULT_BITS,
            hashes: BloomVisitedSet::DEFAULT_HASHES,
            seed: BloomVisitedSet::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub visited: VisitedConfig,
    /// Cap on the candidate queue; the farthest candidates are dropped
    /// beyond it. Unbounded by default.
    pub candidate_cap: Option<usize>,
}

fn check_inputs(graph: &ProximityGraph, data: &Dataset, query: &[f32]) -> Result<()> {
    if graph.len() != data.len() {
        return Err(Error::param(format!(
            "graph has {} nodes for {} vectors",
            graph.len(),
            data.len()
        )));
    }
    data.check_query(query)
}

/// Candidate queue: exact ordered set with an optional size cap.
struct Candidates {
    set: BTreeSet<Neighbor>,
    cap: usize,
}

impl Candidates {
    fn new(cap: Option<usize>) -> Self {
        Self {
            set: BTreeSet::new(),
            cap: cap.unwrap_or(usize::MAX).max(1),
        }
    }

    fn add(&mut self, n: Neighbor) {
        self.set.insert(n);
        if self.set.len() > self.cap {
            self.set.pop_last();
        }
    }

    fn min_distance(&self) -> Option<f32> {
        self.set.first().map(|n| n.distance)
    }

    fn pop_min(&mut self) -> Option<Neighbor> {
        self.set.pop_first()
    }
}

struct Traversal<'a, V> {
    graph: &'a ProximityGraph,
    data: &'a Dataset,
    query: &'a [f32],
    candidates: Candidates,
    results: BoundedMinSet,
    visited: V,
    stats: SearchStats,
}

impl<'a, V: VisitedSet> Traversal<'a, V> {
    fn start(
        graph: &'a ProximityGraph,
        data: &'a Dataset,
        query: &'a [f32],
        l: usize,
        cap: Option<usize>,
        mut visited: V,
    ) -> Self {
        let entry = graph.entry();
        let first = Neighbor::new(entry, l2_sq(query, data.get(entry as usize)));
        visited.insert(entry);
        let mut results = BoundedMinSet::new(l);
        results.insert(first);
        let stats = SearchStats {
            nodes_visited: 1,
            distance_computations: 1,
            ..SearchStats::default()
        };
        Self {
            graph,
            data,
            query,
            candidates: Candidates::new(cap),
            results,
            visited,
            stats,
        }
    }

    /// Visits every unvisited neighbor of `node`, adding it to `C` and `R`.
    fn expand(&mut self, node: u32) {
        for &n in self.graph.neighbors(node) {
            if self.visited.contains(n) {
                continue;
            }
            let d = l2_sq(self.query, self.data.get(n as usize));
            self.stats.distance_computations += 1;
            self.stats.nodes_visited += 1;
            self.visited.insert(n);
            let item = Neighbor::new(n, d);
            self.candidates.add(item);
            self.results.insert(item);
        }
    }

    /// `Min(C.dist) <= Max(R.dist)`, with `Max` infinite while `R` has room.
    fn has_qualified(&self) -> bool {
        self.candidates
            .min_distance()
            .is_some_and(|d| d <= self.results.threshold())
    }

    fn finish(mut self, k: usize) -> (SearchResult, SearchStats) {
        self.stats.bloom_false_positive_upper = self.visited.false_positive_rate();
        self.stats.underfilled = self.results.len() < k;
        (self.results.into_result(k), self.stats)
    }
}

fn with_visited<T>(
    graph: &ProximityGraph,
    options: &SearchOptions,
    run: impl FnOnce(Box<dyn VisitedSet>) -> T,
) -> T {
    match options.visited {
        VisitedConfig::Bloom { bits, hashes, seed } => {
            run(Box::new(BloomVisitedSet::new(bits, hashes, seed)))
        }
        VisitedConfig::Exact => run(Box::new(ExactVisitedSet::new(graph.len()))),
    }
}

impl VisitedSet for Box<dyn VisitedSet> {
    fn contains(&self, id: u32) -> bool {
        (**self).contains(id)
    }
    fn insert(&mut self, id: u32) {
        (**self).insert(id)
    }
    fn inserted(&self) -> u64 {
        (**self).inserted()
    }
    fn false_positive_rate(&self) -> f64 {
        (**self).false_positive_rate()
    }
}

pub fn bfs_search(
    graph: &ProximityGraph,
    data: &Dataset,
    query: &[f32],
    l: usize,
    k: usize,
) -> Result<(SearchResult, SearchStats)> {
    bfs_search_with(graph, data, query, l, k, &SearchOptions::default())
}

/// Best-first search from the graph's entry node.
pub fn bfs_search_with(
    graph: &ProximityGraph,
    data: &Dataset,
    query: &[f32],
    l: usize,
    k: usize,
    options: &SearchOptions,
) -> Result<(SearchResult, SearchStats)> {
    TraversalParams::bfs(l, k).validate()?;
    check_inputs(graph, data, query)?;
    Ok(with_visited(graph, options, |visited| {
        let mut t = Traversal::start(graph, data, query, l, options.candidate_cap, visited);
        t.candidates.add(*t.results.max().expect("entry was inserted"));
        while t.has_qualified() {
            let c = t.candidates.pop_min().expect("qualified candidate exists");
            t.stats.hops += 1;
            t.expand(c.id);
        }
        t.finish(k)
    }))
}

pub fn dst_search(
    graph: &ProximityGraph,
    data: &Dataset,
    query: &[f32],
    params: &TraversalParams,
) -> Result<(SearchResult, SearchStats)> {
    dst_search_with(graph, data, query, params, &SearchOptions::default())
}

/// Multi-candidate search: DST with a single group in flight.
pub fn mcs_search(
    graph: &ProximityGraph,
    data: &Dataset,
    query: &[f32],
    l: usize,
    k: usize,
    mc: usize,
) -> Result<(SearchResult, SearchStats)> {
    dst_search(graph, data, query, &TraversalParams { l, k, mg: 1, mc })
}

/// Delayed-synchronization traversal.
///
/// The entry node forms the first in-flight group. Each loop iteration
/// completes the oldest group, then launches new groups of up to `mc`
/// candidates whose distance is within the current `R` threshold
/// (recomputed before each extraction) until `mg` groups are in flight or
/// no candidate qualifies. The search ends when nothing is in flight.
pub fn dst_search_with(
    graph: &ProximityGraph,
    data: &Dataset,
    query: &[f32],
    params: &TraversalParams,
    options: &SearchOptions,
) -> Result<(SearchResult, SearchStats)> {
    params.validate()?;
    check_inputs(graph, data, query)?;
    Ok(with_visited(graph, options, |visited| {
        let mut t = Traversal::start(graph, data, query, params.l, options.candidate_cap, visited);
        let mut in_flight: VecDeque<Vec<u32>> = VecDeque::with_capacity(params.mg);
        in_flight.push_back(vec![graph.entry()]);

        while let Some(group) = in_flight.pop_front() {
            t.stats.hops += 1;
            for node in group {
                t.expand(node);
            }
            while in_flight.len() < params.mg {
                let mut next = Vec::with_capacity(params.mc);
                while next.len() < params.mc && t.has_qualified() {
                    next.push(t.candidates.pop_min().expect("qualified candidate exists").id);
                }
                if next.is_empty() {
                    break;
                }
                in_flight.push_back(next);
            }
        }
        t.finish(params.k)
    }))
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::param("workers must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::param(format!("cannot start worker pool: {e}")))
}

/// Maps `search` over every query on a pool of `workers` threads. Output
/// order follows query order, so results do not depend on `workers`.
pub fn par_map_queries<Q, T, F>(queries: &[Q], workers: usize, search: F) -> Result<Vec<T>>
where
    Q: AsRef<[f32]> + Sync,
    T: Send,
    F: Fn(&[f32]) -> Result<T> + Sync,
{
    let pool = worker_pool(workers)?;
    pool.install(|| queries.par_iter().map(|q| search(q.as_ref())).collect())
}

/// Independent DST searches, one per query.
pub fn batch_search<Q: AsRef<[f32]> + Sync>(
    graph: &ProximityGraph,
    data: &Dataset,
    queries: &[Q],
    params: &TraversalParams,
    options: &SearchOptions,
    workers: usize,
) -> Result<Vec<(SearchResult, SearchStats)>> {
    par_map_queries(queries, workers, |q| {
        dst_search_with(graph, data, q, params, options)
    })
}
