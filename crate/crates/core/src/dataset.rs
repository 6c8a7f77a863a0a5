//! Benchmark vector containers, the exact-kNN oracle, and recall metrics.
//!
//! The on-disk formats are the `fvecs`/`bvecs`/`ivecs` containers used by
//! the SIFT and Deep benchmark suites: every record is a little-endian
//! `i32` length followed by that many components (`f32`, `u8`, or `i32`).

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighbor::{l2_sq, Neighbor, SearchResult};

/// Dense row-major `f32` vectors with implicit ids `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    data: Vec<f32>,
}

/// Query vectors share the dataset representation.
pub type QuerySet = Dataset;

impl Dataset {
    /// Builds a dataset from row-major data. Rejects an empty set, a zero
    /// dimension, a ragged buffer, and non-finite components.
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dimension must be positive"));
        }
        if data.is_empty() {
            return Err(Error::param("dataset must contain at least one vector"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::param(format!(
                "buffer of {} floats is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::param(format!(
                "non-finite component in vector {} at offset {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(dim * rows.len());
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::param(format!(
                    "dimension mismatch at record {i}: expected {dim}, got {}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    /// Always false for a constructed dataset; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, id: usize) -> &[f32] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Copies out columns `start..start + width` of every row.
    pub fn columns(&self, start: usize, width: usize) -> Result<Dataset> {
        if width == 0 || start + width > self.dim {
            return Err(Error::param(format!(
                "column range {start}..{} outside dimension {}",
                start + width,
                self.dim
            )));
        }
        let data = self
            .iter()
            .flat_map(|row| row[start..start + width].iter().copied())
            .collect();
        Ok(Dataset { dim: width, data })
    }

    /// Copies out the listed rows, in order.
    pub fn select(&self, ids: &[usize]) -> Result<Dataset> {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for &id in ids {
            if id >= self.len() {
                return Err(Error::param(format!("row {id} out of range")));
            }
            data.extend_from_slice(self.get(id));
        }
        Dataset::new(self.dim, data)
    }

    pub(crate) fn check_query(&self, query: &[f32]) -> Result<()> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: query.len(),
            });
        }
        Ok(())
    }
}

/// Per-query true neighbor ids, nearest first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    rows: Vec<Vec<u32>>,
}

impl GroundTruth {
    pub fn new(rows: Vec<Vec<u32>>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, query: usize) -> &[u32] {
        &self.rows[query]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    /// Checks that every id indexes into a dataset of `count` vectors and
    /// that no row repeats an id.
    pub fn validate(&self, count: usize) -> Result<()> {
        for (q, row) in self.rows.iter().enumerate() {
            let mut seen = std::collections::HashSet::with_capacity(row.len());
            for &id in row {
                if id as usize >= count {
                    return Err(Error::param(format!(
                        "ground truth row {q} references id {id} beyond dataset size {count}"
                    )));
                }
                if !seen.insert(id) {
                    return Err(Error::param(format!(
                        "ground truth row {q} repeats id {id}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Exact ground truth computed with [`brute_force_knn`].
    pub fn compute(data: &Dataset, queries: &QuerySet, k: usize) -> Result<Self> {
        use rayon::prelude::*;
        let rows = (0..queries.len())
            .into_par_iter()
            .map(|q| brute_force_knn(data, queries.get(q), k).map(|r| r.ids()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorFormat {
    Fvecs,
    Bvecs,
}

impl VectorFormat {
    /// Guesses the format from a file extension, defaulting to `fvecs`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bvecs") => VectorFormat::Bvecs,
            _ => VectorFormat::Fvecs,
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_vectors(path: impl AsRef<Path>, format: VectorFormat) -> Result<Dataset> {
    let bytes = read_file(path.as_ref())?;
    match format {
        VectorFormat::Fvecs => parse_fvecs(&bytes),
        VectorFormat::Bvecs => parse_bvecs(&bytes),
    }
}

pub fn load_groundtruth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    parse_ivecs(&read_file(path.as_ref())?)
}

/// Walks `len`-prefixed records; `width` is the byte size of one component.
fn parse_records<'a>(
    bytes: &'a [u8],
    format: &'static str,
    width: usize,
    mut on_record: impl FnMut(usize, i32, &'a [u8]) -> Result<()>,
) -> Result<usize> {
    let mut offset = 0;
    let mut index = 0;
    while offset < bytes.len() {
        if bytes.len() - offset < 4 {
            return Err(Error::malformed(
                format,
                format!("truncated length prefix at record {index}"),
            ));
        }
        let len = LittleEndian::read_i32(&bytes[offset..]);
        offset += 4;
        let body = (len.max(0) as usize).saturating_mul(width);
        if bytes.len() - offset < body {
            return Err(Error::malformed(
                format,
                format!("truncated record {index}: need {body} bytes"),
            ));
        }
        on_record(index, len, &bytes[offset..offset + body])?;
        offset += body;
        index += 1;
    }
    Ok(index)
}

fn parse_vector_records(
    bytes: &[u8],
    format: &'static str,
    width: usize,
    widen: impl Fn(&[u8], &mut Vec<f32>),
) -> Result<Dataset> {
    let mut dim: Option<usize> = None;
    let mut data = Vec::new();
    let count = parse_records(bytes, format, width, |index, len, body| {
        if len <= 0 {
            return Err(Error::malformed(
                format,
                format!("non-positive dimension {len} at record {index}"),
            ));
        }
        let len = len as usize;
        match dim {
            None => dim = Some(len),
            Some(d) if d != len => {
                return Err(Error::malformed(
                    format,
                    format!("dimension mismatch at record {index}: expected {d}, got {len}"),
                ))
            }
            Some(_) => {}
        }
        widen(body, &mut data);
        Ok(())
    })?;
    if count == 0 {
        return Err(Error::malformed(format, "no records"));
    }
    Dataset::new(dim.unwrap_or(0), data).map_err(|e| Error::malformed(format, e.to_string()))
}

pub fn parse_fvecs(bytes: &[u8]) -> Result<Dataset> {
    parse_vector_records(bytes, "fvecs", 4, |body, out| {
        out.extend(body.chunks_exact(4).map(LittleEndian::read_f32))
    })
}

pub fn parse_bvecs(bytes: &[u8]) -> Result<Dataset> {
    parse_vector_records(bytes, "bvecs", 1, |body, out| {
        out.extend(body.iter().map(|&b| f32::from(b)))
    })
}

pub fn parse_ivecs(bytes: &[u8]) -> Result<GroundTruth> {
    let mut rows = Vec::new();
    parse_records(bytes, "ivecs", 4, |index, len, body| {
        if len < 0 {
            return Err(Error::malformed(
                "ivecs",
                format!("negative length {len} at record {index}"),
            ));
        }
        let mut row = Vec::with_capacity(len as usize);
        for chunk in body.chunks_exact(4) {
            let id = LittleEndian::read_i32(chunk);
            if id < 0 {
                return Err(Error::malformed(
                    "ivecs",
                    format!("negative id {id} at record {index}"),
                ));
            }
            row.push(id as u32);
        }
        rows.push(row);
        Ok(())
    })?;
    Ok(GroundTruth { rows })
}

fn dim_prefix(len: usize) -> Result<i32> {
    i32::try_from(len).map_err(|_| Error::param(format!("record length {len} exceeds i32")))
}

pub fn write_fvecs<W: Write>(mut out: W, data: &Dataset) -> Result<()> {
    let dim = dim_prefix(data.dim())?;
    for row in data.iter() {
        out.write_i32::<LittleEndian>(dim)?;
        for &x in row {
            out.write_f32::<LittleEndian>(x)?;
        }
    }
    Ok(())
}

/// Writes one record per row; ids must fit in `i32`.
pub fn write_ivecs<W: Write, R: AsRef<[u32]>>(mut out: W, rows: &[R]) -> Result<()> {
    for row in rows {
        let row = row.as_ref();
        out.write_i32::<LittleEndian>(dim_prefix(row.len())?)?;
        for &id in row {
            let id = i32::try_from(id).map_err(|_| Error::param(format!("id {id} exceeds i32")))?;
            out.write_i32::<LittleEndian>(id)?;
        }
    }
    Ok(())
}

/// Exact k nearest neighbors by linear scan, ties broken by smaller id.
pub fn brute_force_knn(data: &Dataset, query: &[f32], k: usize) -> Result<SearchResult> {
    data.check_query(query)?;
    if k == 0 || k > data.len() {
        return Err(Error::param(format!(
            "k = {k} must be in 1..={}",
            data.len()
        )));
    }
    let mut all: Vec<Neighbor> = data
        .iter()
        .enumerate()
        .map(|(id, v)| Neighbor::new(id as u32, l2_sq(query, v)))
        .collect();
    if k < all.len() {
        all.select_nth_unstable(k - 1);
        all.truncate(k);
    }
    all.sort_unstable();
    Ok(SearchResult::from_sorted(all))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecallMode {
    /// `|returned[..k] ∩ truth[..k]| / k`.
    Intersection,
    /// 1 when the single true nearest neighbor is among `returned[..k]`.
    FirstHit,
}

/// Recall of `returned` against one ground-truth row.
///
/// `returned` may hold fewer than `k` ids (an underfilled search); missing
/// slots count as misses. `truth` must hold at least `k` ids in
/// intersection mode and at least one in first-hit mode.
pub fn recall_at_k(returned: &[u32], truth: &[u32], k: usize, mode: RecallMode) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("k must be positive"));
    }
    let returned = &returned[..returned.len().min(k)];
    match mode {
        RecallMode::Intersection => {
            if truth.len() < k {
                return Err(Error::param(format!(
                    "ground truth has {} ids, fewer than k = {k}",
                    truth.len()
                )));
            }
            let truth: std::collections::HashSet<u32> = truth[..k].iter().copied().collect();
            let mut hits: std::collections::HashSet<u32> = std::collections::HashSet::new();
            for id in returned {
                if truth.contains(id) {
                    hits.insert(*id);
                }
            }
            Ok(hits.len() as f64 / k as f64)
        }
        RecallMode::FirstHit => {
            let first = truth
                .first()
                .ok_or_else(|| Error::param("first-hit recall needs a nonempty truth row"))?;
            Ok(if returned.contains(first) { 1.0 } else { 0.0 })
        }
    }
}

/// Isotropic Gaussian clusters with centers drawn uniformly from
/// `[0, 100)^dim`. Base and query sets sampled from one mixture share its
/// centers, which gives clustered benchmark data with a known seed.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    dim: usize,
    centers: Vec<f32>,
    sigma: f32,
}

impl GaussianMixture {
    pub fn new(dim: usize, clusters: usize, sigma: f32, seed: u64) -> Result<Self> {
        if dim == 0 || clusters == 0 {
            return Err(Error::param("dimension and cluster count must be positive"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::param(format!("sigma must be positive, got {sigma}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = (0..dim * clusters).map(|_| rng.gen_range(0.0..100.0)).collect();
        Ok(Self { dim, centers, sigma })
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0f32, self.sigma).expect("sigma checked in new");
        let clusters = self.centers.len() / self.dim;
        let mut data = Vec::with_capacity(n * self.dim);
        for _ in 0..n {
            let c = rng.gen_range(0..clusters);
            let center = &self.centers[c * self.dim..(c + 1) * self.dim];
            data.extend(center.iter().map(|&x| x + noise.sample(&mut rng)));
        }
        Dataset::new(self.dim, data)
    }
}
