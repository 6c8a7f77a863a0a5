//! Inverted-file index with product-quantized or exact payloads.
//!
//! A query runs through six stages:
//!
//! 1. rotate the query when an [`OpqMatrix`] is attached;
//! 2. compute the distance to every coarse centroid;
//! 3. select the `nprobe` closest cells;
//! 4. build lookup tables (one per cell for residual codes, one in total
//!    for raw codes);
//! 5. evaluate a distance for every entry in the selected lists;
//! 6. keep the `k` smallest.

mod io;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::{kmeans_assign, kmeans_train, Centroids, DEFAULT_ITERS};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::neighbor::{l2_sq, Neighbor, SearchResult, SearchStats};
use crate::pq::{adc_distance, pq_train_with_iters, OpqMatrix, PqCodebook};
use crate::topk::BoundedMinSet;

pub use io::{load_index, parse_index, save_index, write_index, FORMAT_VERSION, MAGIC};

/// What the inverted lists store per vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IvfMode {
    /// Codes of `vector − coarse centroid`.
    PqResidual,
    /// Codes of the vector itself.
    PqRaw,
    /// Full-precision vectors; distances are exact.
    Flat,
}

impl IvfMode {
    pub fn uses_pq(self) -> bool {
        !matches!(self, IvfMode::Flat)
    }

    pub(crate) fn tag(self) -> u32 {
        match self {
            IvfMode::Flat => 0,
            IvfMode::PqRaw => 1,
            IvfMode::PqResidual => 2,
        }
    }

    pub(crate) fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(IvfMode::Flat),
            1 => Some(IvfMode::PqRaw),
            2 => Some(IvfMode::PqResidual),
            _ => None,
        }
    }
}

impl fmt::Display for IvfMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IvfMode::PqResidual => "pq-residual",
            IvfMode::PqRaw => "pq-raw",
            IvfMode::Flat => "flat",
        })
    }
}

impl FromStr for IvfMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pq-residual" => Ok(IvfMode::PqResidual),
            "pq-raw" => Ok(IvfMode::PqRaw),
            "flat" => Ok(IvfMode::Flat),
            other => Err(Error::param(format!("unknown IVF mode {other:?}"))),
        }
    }
}

/// One inverted list. PQ modes fill `codes` with `m` bytes per entry; flat
/// mode fills `vectors` with `dim` floats per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedList {
    pub ids: Vec<u32>,
    pub codes: Vec<u8>,
    pub vectors: Vec<f32>,
}

impl InvertedList {
    fn empty() -> Self {
        Self {
            ids: Vec::new(),
            codes: Vec::new(),
            vectors: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvfIndex {
    mode: IvfMode,
    coarse: Centroids,
    codebook: Option<PqCodebook>,
    opq: Option<OpqMatrix>,
    lists: Vec<InvertedList>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IvfSearchParams {
    pub nprobe: usize,
    pub k: usize,
}

#[derive(Debug, Clone)]
pub struct IvfBuildParams {
    pub nlist: usize,
    pub m: usize,
    pub mode: IvfMode,
    pub opq: Option<OpqMatrix>,
    pub iters: usize,
    pub seed: u64,
}

impl IvfBuildParams {
    pub fn new(nlist: usize, m: usize, mode: IvfMode, seed: u64) -> Self {
        Self {
            nlist,
            m,
            mode,
            opq: None,
            iters: DEFAULT_ITERS,
            seed,
        }
    }

    pub fn with_opq(mut self, opq: OpqMatrix) -> Self {
        self.opq = Some(opq);
        self
    }

    pub fn with_iters(mut self, iters: usize) -> Self {
        self.iters = iters;
        self
    }
}

/// `round(sqrt(n))`, at least 1.
pub fn default_nlist(n: usize) -> usize {
    ((n as f64).sqrt().round() as usize).max(1)
}

pub fn ivf_build(data: &Dataset, params: &IvfBuildParams) -> Result<IvfIndex> {
    let n = data.len();
    if params.nlist == 0 || params.nlist > n {
        return Err(Error::param(format!(
            "nlist = {} must be in 1..={n}",
            params.nlist
        )));
    }
    if let Some(opq) = &params.opq {
        if opq.dim() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                actual: opq.dim(),
            });
        }
    }
    let rotated;
    let space = match &params.opq {
        Some(opq) => {
            rotated = opq.apply_dataset(data)?;
            &rotated
        }
        None => data,
    };

    // Coarse and PQ training draw independent seeds from the build seed.
    let coarse_seed = params.seed;
    let pq_seed = params.seed ^ 0x9e37_79b9_7f4a_7c15;

    let coarse = kmeans_train(space, params.nlist, params.iters, coarse_seed)?;
    let assignment = kmeans_assign(space, &coarse)?;

    let codebook = match params.mode {
        IvfMode::Flat => None,
        IvfMode::PqRaw => Some(pq_train_with_iters(space, params.m, params.iters, pq_seed)?),
        IvfMode::PqResidual => {
            let residuals = residual_set(space, &coarse, &assignment)?;
            Some(pq_train_with_iters(&residuals, params.m, params.iters, pq_seed)?)
        }
    };

    let mut lists: Vec<InvertedList> = (0..params.nlist).map(|_| InvertedList::empty()).collect();
    let mut scratch = Vec::with_capacity(space.dim());
    let mut code = vec![0u8; params.m];
    for (id, v) in space.iter().enumerate() {
        let cell = assignment[id] as usize;
        let list = &mut lists[cell];
        list.ids.push(id as u32);
        match (params.mode, &codebook) {
            (IvfMode::Flat, _) => list.vectors.extend_from_slice(v),
            (IvfMode::PqRaw, Some(cb)) => {
                cb.encode_into(v, &mut code);
                list.codes.extend_from_slice(&code);
            }
            (IvfMode::PqResidual, Some(cb)) => {
                residual_into(v, coarse.get(cell), &mut scratch);
                cb.encode_into(&scratch, &mut code);
                list.codes.extend_from_slice(&code);
            }
            _ => unreachable!("PQ modes always train a codebook"),
        }
    }

    Ok(IvfIndex {
        mode: params.mode,
        coarse,
        codebook,
        opq: params.opq.clone(),
        lists,
    })
}

fn residual_into(v: &[f32], centroid: &[f32], out: &mut Vec<f32>) {
    out.clear();
    out.extend(v.iter().zip(centroid).map(|(a, b)| a - b));
}

fn residual_set(data: &Dataset, coarse: &Centroids, assignment: &[u32]) -> Result<Dataset> {
    let mut out = Vec::with_capacity(data.as_slice().len());
    for (id, v) in data.iter().enumerate() {
        let c = coarse.get(assignment[id] as usize);
        out.extend(v.iter().zip(c).map(|(a, b)| a - b));
    }
    Dataset::new(data.dim(), out)
}

impl IvfIndex {
    /// Assembles an index from parts, checking every structural invariant:
    /// each id `0..N` appears in exactly one list and payload sizes match
    /// the mode.
    pub fn from_parts(
        mode: IvfMode,
        coarse: Centroids,
        codebook: Option<PqCodebook>,
        opq: Option<OpqMatrix>,
        lists: Vec<InvertedList>,
    ) -> Result<Self> {
        let dim = coarse.dim();
        if lists.len() != coarse.len() {
            return Err(Error::param(format!(
                "{} lists for {} coarse centroids",
                lists.len(),
                coarse.len()
            )));
        }
        match (&codebook, mode.uses_pq()) {
            (Some(cb), true) if cb.dim() == dim => {}
            (Some(_), true) => return Err(Error::param("codebook dimension differs from index")),
            (None, false) => {}
            (None, true) => return Err(Error::param(format!("{mode} index needs a codebook"))),
            (Some(_), false) => return Err(Error::param("flat index cannot carry a codebook")),
        }
        if let Some(opq) = &opq {
            if opq.dim() != dim {
                return Err(Error::param("rotation dimension differs from index"));
            }
        }
        let total: usize = lists.iter().map(InvertedList::len).sum();
        let mut seen = vec![false; total];
        let m = codebook.as_ref().map_or(0, PqCodebook::m);
        for (cell, list) in lists.iter().enumerate() {
            let (codes, vectors) = if mode.uses_pq() {
                (list.len() * m, 0)
            } else {
                (0, list.len() * dim)
            };
            if list.codes.len() != codes || list.vectors.len() != vectors {
                return Err(Error::param(format!("list {cell} payload size mismatch")));
            }
            if list.vectors.iter().any(|x| !x.is_finite()) {
                return Err(Error::param(format!("list {cell} holds a non-finite vector")));
            }
            for &id in &list.ids {
                let slot = seen
                    .get_mut(id as usize)
                    .ok_or_else(|| Error::param(format!("id {id} out of range 0..{total}")))?;
                if std::mem::replace(slot, true) {
                    return Err(Error::param(format!("id {id} appears in more than one slot")));
                }
            }
        }
        Ok(Self {
            mode,
            coarse,
            codebook,
            opq,
            lists,
        })
    }

    pub fn mode(&self) -> IvfMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.coarse.dim()
    }

    pub fn nlist(&self) -> usize {
        self.coarse.len()
    }

    /// Number of indexed vectors.
    pub fn len(&self) -> usize {
        self.lists.iter().map(InvertedList::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coarse(&self) -> &Centroids {
        &self.coarse
    }

    pub fn codebook(&self) -> Option<&PqCodebook> {
        self.codebook.as_ref()
    }

    pub fn opq(&self) -> Option<&OpqMatrix> {
        self.opq.as_ref()
    }

    pub fn lists(&self) -> &[InvertedList] {
        &self.lists
    }

    pub fn list_lengths(&self) -> Vec<usize> {
        self.lists.iter().map(InvertedList::len).collect()
    }

    fn prepare_query(&self, query: &[f32]) -> Result<Vec<f32>> {
        if query.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: query.len(),
            });
        }
        match &self.opq {
            Some(opq) => opq.apply(query),
            None => Ok(query.to_vec()),
        }
    }

    fn check_nprobe(&self, nprobe: usize) -> Result<()> {
        if nprobe == 0 || nprobe > self.nlist() {
            return Err(Error::param(format!(
                "nprobe = {nprobe} must be in 1..={}",
                self.nlist()
            )));
        }
        Ok(())
    }

    fn cells_for(&self, rotated: &[f32], nprobe: usize) -> Vec<Neighbor> {
        let mut all: Vec<Neighbor> = self
            .coarse
            .iter()
            .enumerate()
            .map(|(i, c)| Neighbor::new(i as u32, l2_sq(rotated, c)))
            .collect();
        all.sort_unstable();
        all.truncate(nprobe);
        all
    }

    /// The `nprobe` closest cells, nearest first, ties to the smaller id.
    pub fn select_cells(&self, query: &[f32], nprobe: usize) -> Result<Vec<u32>> {
        self.check_nprobe(nprobe)?;
        let rotated = self.prepare_query(query)?;
        Ok(self.cells_for(&rotated, nprobe).iter().map(|n| n.id).collect())
    }

    pub fn search(&self, query: &[f32], params: &IvfSearchParams) -> Result<(SearchResult, SearchStats)> {
        if params.k == 0 {
            return Err(Error::param("k must be positive"));
        }
        self.check_nprobe(params.nprobe)?;
        let rotated = self.prepare_query(query)?;
        let cells = self.cells_for(&rotated, params.nprobe);

        let mut top = BoundedMinSet::new(params.k);
        let mut stats = SearchStats::default();
        let dim = self.dim();

        let shared_lut = match (self.mode, &self.codebook) {
            (IvfMode::PqRaw, Some(cb)) => Some(cb.build_lut(&rotated)?),
            _ => None,
        };
        let mut residual = Vec::with_capacity(dim);

        for cell in &cells {
            let list = &self.lists[cell.id as usize];
            stats.hops += 1;
            stats.distance_computations += list.len() as u64;
            match (self.mode, &self.codebook) {
                (IvfMode::Flat, _) => {
                    for (id, v) in list.ids.iter().zip(list.vectors.chunks_exact(dim)) {
                        top.insert(Neighbor::new(*id, l2_sq(&rotated, v)));
                    }
                }
                (_, Some(cb)) => {
                    let owned;
                    let lut = match &shared_lut {
                        Some(lut) => lut,
                        None => {
                            residual_into(&rotated, self.coarse.get(cell.id as usize), &mut residual);
                            owned = cb.build_lut(&residual)?;
                            &owned
                        }
                    };
                    for (id, code) in list.ids.iter().zip(list.codes.chunks_exact(cb.m())) {
                        top.insert(Neighbor::new(*id, adc_distance(lut, code)));
                    }
                }
                (_, None) => unreachable!("PQ modes always carry a codebook"),
            }
        }
        stats.nodes_visited = stats.distance_computations;
        stats.underfilled = (stats.distance_computations as usize) < params.k;
        Ok((top.into_result(params.k), stats))
    }
}

pub fn select_cells(index: &IvfIndex, query: &[f32], nprobe: usize) -> Result<Vec<u32>> {
    index.select_cells(query, nprobe)
}

pub fn ivf_search(
    index: &IvfIndex,
    query: &[f32],
    params: &IvfSearchParams,
) -> Result<(SearchResult, SearchStats)> {
    index.search(query, params)
}
