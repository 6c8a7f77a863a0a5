//! Seeded Lloyd's k-means, shared by the coarse quantizer and the product
//! quantizer sub-spaces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::neighbor::l2_sq;

pub const DEFAULT_ITERS: usize = 25;

/// `k` cluster centers of dimension `dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    dim: usize,
    data: Vec<f32>,
}

impl Centroids {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::param(format!(
                "{} floats do not form centroids of dimension {dim}",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("non-finite centroid component"));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Index and squared distance of the closest centroid, ties to the
    /// smaller index.
    #[inline]
    pub fn nearest(&self, v: &[f32]) -> (usize, f32) {
        let mut best = (0, f32::INFINITY);
        for (i, c) in self.iter().enumerate() {
            let d = l2_sq(v, c);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
pub struct KmeansFit {
    pub centroids: Centroids,
    pub assignments: Vec<u32>,
    /// Objective (sum of squared distances to the assigned centroid) after
    /// each assignment step, followed by the objective of the final
    /// centroids.
    pub objectives: Vec<f64>,
}

pub fn kmeans_train(data: &Dataset, k: usize, iters: usize, seed: u64) -> Result<Centroids> {
    kmeans_fit(data, k, iters, seed).map(|fit| fit.centroids)
}

pub fn kmeans_assign(data: &Dataset, centroids: &Centroids) -> Result<Vec<u32>> {
    if data.dim() != centroids.dim() {
        return Err(Error::DimensionMismatch {
            expected: centroids.dim(),
            actual: data.dim(),
        });
    }
    Ok(assign(data, centroids).0)
}

fn assign(data: &Dataset, centroids: &Centroids) -> (Vec<u32>, Vec<f32>) {
    (0..data.len())
        .into_par_iter()
        .map(|i| {
            let (c, d) = centroids.nearest(data.get(i));
            (c as u32, d)
        })
        .unzip()
}

/// k-means++ seeding followed by `iters` Lloyd iterations.
///
/// A cluster left empty by an update step receives the point farthest from
/// its centroid (taken from a cluster with at least two members), so every
/// cluster is nonempty after training.
pub fn kmeans_fit(data: &Dataset, k: usize, iters: usize, seed: u64) -> Result<KmeansFit> {
    let n = data.len();
    if k == 0 || k > n {
        return Err(Error::param(format!("k = {k} must be in 1..={n}")));
    }
    if iters == 0 {
        return Err(Error::param("iters must be at least 1"));
    }
    let dim = data.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(data, k, &mut rng);
    let mut objectives = Vec::with_capacity(iters + 1);
    let mut assignments = Vec::new();

    for _ in 0..iters {
        let (assigned, dists) = assign(data, &centroids);
        objectives.push(dists.iter().map(|&d| f64::from(d)).sum());

        let mut sums = vec![0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &c) in assigned.iter().enumerate() {
            let c = c as usize;
            counts[c] += 1;
            for (s, &x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(data.get(i)) {
                *s += f64::from(x);
            }
        }
        let mut assigned = assigned;
        repair_empty(data, &mut assigned, &mut sums, &mut counts, &dists);

        let mut next = Vec::with_capacity(k * dim);
        for c in 0..k {
            let inv = 1.0 / counts[c] as f64;
            next.extend(sums[c * dim..(c + 1) * dim].iter().map(|&s| (s * inv) as f32));
        }
        centroids = Centroids { dim, data: next };
        assignments = assigned;
    }

    let (final_assign, dists) = assign(data, &centroids);
    objectives.push(dists.iter().map(|&d| f64::from(d)).sum());
    if final_assign
        .iter()
        .fold(vec![false; k], |mut seen, &c| {
            seen[c as usize] = true;
            seen
        })
        .iter()
        .all(|&s| s)
    {
        assignments = final_assign;
    }

    Ok(KmeansFit {
        centroids,
        assignments,
        objectives,
    })
}

fn repair_empty(
    data: &Dataset,
    assigned: &mut [u32],
    sums: &mut [f64],
    counts: &mut [usize],
    dists: &[f32],
) {
    let dim = data.dim();
    for empty in 0..counts.len() {
        if counts[empty] > 0 {
            continue;
        }
        // farthest point whose cluster can spare it; ties to smaller id
        let mut pick: Option<(usize, f32)> = None;
        for (i, &c) in assigned.iter().enumerate() {
            if counts[c as usize] < 2 {
                continue;
            }
            let d = dists[i];
            if pick.is_none_or(|(_, best)| d > best) {
                pick = Some((i, d));
            }
        }
        let Some((i, _)) = pick else { break };
        let from = assigned[i] as usize;
        for (j, &x) in data.get(i).iter().enumerate() {
            sums[from * dim + j] -= f64::from(x);
            sums[empty * dim + j] = f64::from(x);
        }
        counts[from] -= 1;
        counts[empty] = 1;
        assigned[i] = empty as u32;
    }
}

fn plus_plus_init(data: &Dataset, k: usize, rng: &mut ChaCha8Rng) -> Centroids {
    let n = data.len();
    let dim = data.dim();
    let mut chosen = Vec::with_capacity(k);
    let mut is_chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen.push(first);
    is_chosen[first] = true;
    let mut nearest: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| f64::from(l2_sq(data.get(i), data.get(first))))
        .collect();

    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, &w) in nearest.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                if target < w {
                    pick = Some(i);
                    break;
                }
                target -= w;
            }
            // rounding can run past the end; fall back to the last weighted point
            pick.unwrap_or_else(|| nearest.iter().rposition(|&w| w > 0.0).unwrap_or(0))
        } else {
            // every remaining point duplicates a chosen one
            let free: Vec<usize> = (0..n).filter(|&i| !is_chosen[i]).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen.push(next);
        is_chosen[next] = true;
        let c = data.get(next);
        nearest.par_iter_mut().enumerate().for_each(|(i, w)| {
            let d = f64::from(l2_sq(data.get(i), c));
            if d < *w {
                *w = d;
            }
        });
    }

    let mut out = Vec::with_capacity(k * dim);
    for &i in &chosen {
        out.extend_from_slice(data.get(i));
    }
    Centroids { dim, data: out }
}
