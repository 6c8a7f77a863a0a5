//! Recall sweeps, minimum-nprobe search and DST parameter tuning.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{recall_at_k, Dataset, GroundTruth, RecallMode};
use crate::error::{Error, Result};
use crate::graph::{par_map_queries, dst_search_with, ProximityGraph, SearchOptions, TraversalParams};
use crate::ivf::{IvfIndex, IvfSearchParams};

/// Largest `mg` or `mc` accepted by [`dst_tune`].
pub const MAX_GROUP_PARAM: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecallCurve {
    pub k: usize,
    pub mode: RecallMode,
    /// `(nprobe, mean recall)`, nprobe strictly increasing.
    pub points: Vec<(usize, f64)>,
}

impl RecallCurve {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "nprobe,recall")?;
        for (nprobe, recall) in &self.points {
            writeln!(out, "{nprobe},{recall}")?;
        }
        Ok(())
    }
}

fn check_truth(queries: &Dataset, truth: &GroundTruth, count: usize) -> Result<()> {
    if queries.len() != truth.len() {
        return Err(Error::param(format!(
            "{} queries but {} ground-truth rows",
            queries.len(),
            truth.len()
        )));
    }
    truth.validate(count)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean recall over `queries` at one nprobe.
pub fn ivf_mean_recall(
    index: &IvfIndex,
    queries: &Dataset,
    truth: &GroundTruth,
    k: usize,
    nprobe: usize,
    mode: RecallMode,
) -> Result<f64> {
    check_truth(queries, truth, index.len())?;
    let params = IvfSearchParams { nprobe, k };
    let per_query = (0..queries.len())
        .into_par_iter()
        .map(|q| {
            let (res, _) = index.search(queries.get(q), &params)?;
            recall_at_k(&res.ids(), truth.row(q), k, mode)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean(&per_query))
}

pub fn recall_sweep(
    index: &IvfIndex,
    queries: &Dataset,
    truth: &GroundTruth,
    k: usize,
    nprobes: &[usize],
    mode: RecallMode,
) -> Result<RecallCurve> {
    if nprobes.is_empty() {
        return Err(Error::param("nprobe list is empty"));
    }
    if nprobes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("nprobe list must be strictly increasing"));
    }
    let points = nprobes
        .iter()
        .map(|&np| Ok((np, ivf_mean_recall(index, queries, truth, k, np, mode)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RecallCurve { k, mode, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum NprobeSearch {
    Reached { nprobe: usize, recall: f64 },
    Unreachable { best_recall: f64 },
}

/// Smallest nprobe whose mean intersection recall meets `goal`.
///
/// Doubles nprobe until the goal is met, then binary-searches the last
/// interval. A goal of zero or below is met by nprobe 1.
pub fn min_nprobe_for_recall(
    index: &IvfIndex,
    queries: &Dataset,
    truth: &GroundTruth,
    k: usize,
    goal: f64,
) -> Result<NprobeSearch> {
    if goal.is_nan() || goal > 1.0 {
        return Err(Error::param(format!("recall goal {goal} outside (0, 1]")));
    }
    let nlist = index.nlist();
    let eval = |np: usize| ivf_mean_recall(index, queries, truth, k, np, RecallMode::Intersection);

    let first = eval(1)?;
    if first >= goal {
        return Ok(NprobeSearch::Reached { nprobe: 1, recall: first });
    }
    // invariant: recall(lo) < goal
    let mut lo = 1;
    let (mut hi, mut hi_recall) = loop {
        let next = (lo * 2).min(nlist);
        let r = eval(next)?;
        if r >= goal {
            break (next, r);
        }
        if next == nlist {
            return Ok(NprobeSearch::Unreachable { best_recall: r });
        }
        lo = next;
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let r = eval(mid)?;
        if r >= goal {
            hi = mid;
            hi_recall = r;
        } else {
            lo = mid;
        }
    }
    Ok(NprobeSearch::Reached { nprobe: hi, recall: hi_recall })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuningRow {
    pub mg: usize,
    pub mc: usize,
    pub recall: f64,
    pub distance_computations: f64,
    pub hops: f64,
}

/// `mg` in `1..=8` crossed with `mc` in `{1, 2, 4}`.
pub fn default_dst_grid() -> Vec<(usize, usize)> {
    (1..=8).flat_map(|mg| [1, 2, 4].map(|mc| (mg, mc))).collect()
}

/// Evaluates every `(mg, mc)` in `grid` and ranks by mean recall
/// (descending), then mean distance computations, then `(mg, mc)`.
#[allow(clippy::too_many_arguments)]
pub fn dst_tune(
    graph: &ProximityGraph,
    data: &Dataset,
    queries: &Dataset,
    truth: &GroundTruth,
    k: usize,
    l: usize,
    grid: &[(usize, usize)],
    options: &SearchOptions,
    workers: usize,
) -> Result<Vec<TuningRow>> {
    if grid.is_empty() {
        return Err(Error::param("tuning grid is empty"));
    }
    if let Some(&(mg, mc)) = grid
        .iter()
        .find(|&&(mg, mc)| mg > MAX_GROUP_PARAM || mc > MAX_GROUP_PARAM)
    {
        return Err(Error::param(format!(
            "grid point ({mg}, {mc}) exceeds {MAX_GROUP_PARAM}"
        )));
    }
    check_truth(queries, truth, data.len())?;
    let rows: Vec<Vec<f32>> = queries.iter().map(<[f32]>::to_vec).collect();

    let mut table = Vec::with_capacity(grid.len());
    for &(mg, mc) in grid {
        let params = TraversalParams { l, k, mg, mc };
        let per_query = par_map_queries(&rows, workers, |q| {
            dst_search_with(graph, data, q, &params, options)
        })?;
        let mut recalls = Vec::with_capacity(per_query.len());
        let mut dcs = Vec::with_capacity(per_query.len());
        let mut hops = Vec::with_capacity(per_query.len());
        for (q, (res, stats)) in per_query.iter().enumerate() {
            recalls.push(recall_at_k(&res.ids(), truth.row(q), k, RecallMode::Intersection)?);
            dcs.push(stats.distance_computations as f64);
            hops.push(stats.hops as f64);
        }
        table.push(TuningRow {
            mg,
            mc,
            recall: mean(&recalls),
            distance_computations: mean(&dcs),
            hops: mean(&hops),
        });
    }
    table.sort_by(|a, b| {
        b.recall
            .total_cmp(&a.recall)
            .then(a.distance_computations.total_cmp(&b.distance_computations))
            .then((a.mg, a.mc).cmp(&(b.mg, b.mc)))
    });
    Ok(table)
}

pub fn write_tuning_csv<W: Write>(rows: &[TuningRow], mut out: W) -> Result<()> {
    writeln!(out, "mg,mc,recall,distance_computations,hops")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.mg, r.mc, r.recall, r.distance_computations, r.hops
        )?;
    }
    Ok(())
}
