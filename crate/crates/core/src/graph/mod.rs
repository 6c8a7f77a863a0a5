//! Proximity graphs and their traversal.
//!
//! Every graph, whether built here or ingested from an external builder's
//! base layer, is reduced to the same representation: adjacency rows with
//! a maximum degree and a single fixed entry node.

mod bloom;
mod io;
mod search;

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::neighbor::{l2_sq, Neighbor};

pub use bloom::{bloom_fp_rate, murmur64a, BloomVisitedSet, ExactVisitedSet, VisitedSet};
pub use io::{
    load_graph, parse_adjacency_text, parse_graph, save_graph, write_adjacency_text, write_graph,
    FORMAT_VERSION, MAGIC, PADDING,
};
pub use search::{
    batch_search, bfs_search, bfs_search_with, dst_search, dst_search_with, mcs_search,
    par_map_queries, SearchOptions, TraversalParams, VisitedConfig,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProximityGraph {
    max_degree: usize,
    entry: u32,
    rows: Vec<Vec<u32>>,
}

/// Counters from [`knn_graph_build`] and [`ProximityGraph::from_adjacency`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct GraphBuildStats {
    /// Edges added to make every node reachable from the entry.
    pub repair_edges: usize,
    /// Largest row length after repair; may exceed the requested degree.
    pub max_row_len: usize,
}

impl ProximityGraph {
    /// Validates ids, duplicate-freedom, row widths, and reachability of
    /// every node from `entry`.
    pub fn new(rows: Vec<Vec<u32>>, entry: u32, max_degree: usize) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::param("graph must contain at least one node"));
        }
        if entry as usize >= n {
            return Err(Error::param(format!("entry {entry} out of range 0..{n}")));
        }
        let mut mark = vec![u32::MAX; n];
        for (u, row) in rows.iter().enumerate() {
            if row.len() > max_degree {
                return Err(Error::param(format!(
                    "node {u} has {} neighbors, above the maximum degree {max_degree}",
                    row.len()
                )));
            }
            for &v in row {
                if v as usize >= n {
                    return Err(Error::param(format!("node {u} links to missing node {v}")));
                }
                if v as usize == u {
                    return Err(Error::param(format!("node {u} links to itself")));
                }
                if mark[v as usize] == u as u32 {
                    return Err(Error::param(format!("node {u} lists neighbor {v} twice")));
                }
                mark[v as usize] = u as u32;
            }
        }
        let graph = Self {
            max_degree,
            entry,
            rows,
        };
        let reached = graph.reachable_from(entry);
        if let Some(u) = reached.iter().position(|r| !r) {
            return Err(Error::param(format!(
                "node {u} is not reachable from entry {entry}"
            )));
        }
        Ok(graph)
    }

    /// Ingests externally built adjacency (for instance an HNSW base layer):
    /// the entry becomes the dataset medoid and unreachable components are
    /// linked in as in [`knn_graph_build`].
    pub fn from_adjacency(
        mut rows: Vec<Vec<u32>>,
        data: &Dataset,
    ) -> Result<(Self, GraphBuildStats)> {
        if rows.len() != data.len() {
            return Err(Error::param(format!(
                "adjacency has {} rows for {} vectors",
                rows.len(),
                data.len()
            )));
        }
        let declared = rows.iter().map(Vec::len).max().unwrap_or(0);
        let sums: Vec<f64> = (0..data.len())
            .into_par_iter()
            .map(|i| distance_sum(data, i, 0..data.len()))
            .collect();
        let entry = argmin(&sums);
        let repair_edges = repair_reachability(&mut rows, data, entry);
        let max_row_len = rows.iter().map(Vec::len).max().unwrap_or(0);
        let graph = Self::new(rows, entry, declared.max(max_row_len))?;
        Ok((
            graph,
            GraphBuildStats {
                repair_edges,
                max_row_len,
            },
        ))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn entry(&self) -> u32 {
        self.entry
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    #[inline]
    pub fn neighbors(&self, node: u32) -> &[u32] {
        &self.rows[node as usize]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn reachable_from(&self, start: u32) -> Vec<bool> {
        let mut reached = vec![false; self.rows.len()];
        mark_reachable(&self.rows, start, &mut reached);
        reached
    }
}

fn mark_reachable(rows: &[Vec<u32>], start: u32, reached: &mut [bool]) {
    if reached[start as usize] {
        return;
    }
    reached[start as usize] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in &rows[u as usize] {
            if !reached[v as usize] {
                reached[v as usize] = true;
                queue.push_back(v);
            }
        }
    }
}

fn distance_sum(data: &Dataset, i: usize, others: impl IntoIterator<Item = usize>) -> f64 {
    let v = data.get(i);
    others
        .into_iter()
        .map(|j| f64::from(l2_sq(v, data.get(j))))
        .sum()
}

/// Smallest value, ties to the smaller index.
fn argmin(values: &[f64]) -> u32 {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best as u32
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Links unreachable parts of the graph back to the reachable part until
/// every node is reachable from `entry`. Each round takes the weakly
/// connected component (among unreached nodes) holding the smallest
/// unreached id, and adds one edge from the reached node nearest to that
/// component's medoid. Returns the number of edges added.
fn repair_reachability(rows: &mut [Vec<u32>], data: &Dataset, entry: u32) -> usize {
    let n = rows.len();
    let mut reached = vec![false; n];
    mark_reachable(rows, entry, &mut reached);
    let mut repairs = 0;
    while let Some(first) = reached.iter().position(|r| !r) {
        let mut parent: Vec<usize> = (0..n).collect();
        for u in 0..n {
            if reached[u] {
                continue;
            }
            for &v in &rows[u] {
                let v = v as usize;
                if !reached[v] {
                    let (a, b) = (find(&mut parent, u), find(&mut parent, v));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let root = find(&mut parent, first);
        let component: Vec<usize> = (0..n)
            .filter(|&u| !reached[u] && find(&mut parent, u) == root)
            .collect();
        let sums: Vec<f64> = component
            .par_iter()
            .map(|&i| distance_sum(data, i, component.iter().copied()))
            .collect();
        let medoid = component[argmin(&sums) as usize];
        let target = data.get(medoid);
        let source = (0..n)
            .filter(|&u| reached[u])
            .map(|u| Neighbor::new(u as u32, l2_sq(target, data.get(u))))
            .min()
            .expect("entry is always reached");
        rows[source.id as usize].push(medoid as u32);
        repairs += 1;
        mark_reachable(rows, medoid as u32, &mut reached);
    }
    repairs
}

/// Exact kNN graph: every node links to its `degree` nearest neighbors
/// (ties to the smaller id), the entry is the medoid, and unreachable
/// components are linked in afterwards. Repair edges may push a row past
/// `degree`; the resulting maximum is reported in the stats and becomes
/// the graph's `max_degree`.
pub fn knn_graph_build(data: &Dataset, degree: usize) -> Result<(ProximityGraph, GraphBuildStats)> {
    let n = data.len();
    if degree == 0 || degree >= n {
        return Err(Error::param(format!(
            "degree R = {degree} must be in 1..{n} (needs R < N)"
        )));
    }
    let per_node: Vec<(Vec<u32>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let v = data.get(i);
            let mut all: Vec<Neighbor> = (0..n)
                .filter(|&j| j != i)
                .map(|j| Neighbor::new(j as u32, l2_sq(v, data.get(j))))
                .collect();
            let sum = all.iter().map(|nb| f64::from(nb.distance)).sum();
            all.select_nth_unstable(degree - 1);
            all.truncate(degree);
            all.sort_unstable();
            (all.into_iter().map(|nb| nb.id).collect(), sum)
        })
        .collect();
    let (mut rows, sums): (Vec<Vec<u32>>, Vec<f64>) = per_node.into_iter().unzip();
    let entry = argmin(&sums);
    let repair_edges = repair_reachability(&mut rows, data, entry);
    let max_row_len = rows.iter().map(Vec::len).max().unwrap_or(0);
    let graph = ProximityGraph::new(rows, entry, max_row_len.max(degree))?;
    Ok((
        graph,
        GraphBuildStats {
            repair_edges,
            max_row_len,
        },
    ))
}
