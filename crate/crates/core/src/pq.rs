//! Product quantization.
//!
//! A `D`-dimensional vector is split into `m` contiguous sub-vectors of
//! `D / m` components. Each sub-space has its own 256-entry codebook, so a
//! vector is stored as `m` bytes. Distances to a query are computed
//! asymmetrically: a per-query [`LookupTable`] holds the squared distance
//! from every query sub-vector to every centroid of its sub-space, and the
//! approximate distance to a code is the sum of `m` table entries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clustering::{kmeans_train, DEFAULT_ITERS};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::neighbor::l2_sq;

/// Centroids per sub-space; one code byte addresses them all.
pub const CENTROIDS_PER_SUBSPACE: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct PqCodebook {
    dim: usize,
    m: usize,
    sub_dim: usize,
    /// `m × 256 × sub_dim`, sub-space major.
    centroids: Vec<f32>,
}

/// One byte per sub-space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PqCode(pub Vec<u8>);

impl AsRef<[u8]> for PqCode {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

/// Squared sub-distances, `m × 256`.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    m: usize,
    table: Vec<f32>,
}

impl LookupTable {
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, sub: usize, centroid: usize) -> f32 {
        self.table[sub * CENTROIDS_PER_SUBSPACE + centroid]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.table
    }
}

fn check_split(dim: usize, m: usize) -> Result<usize> {
    if m == 0 || !dim.is_multiple_of(m) {
        return Err(Error::param(format!("D not divisible by m (D = {dim}, m = {m})")));
    }
    Ok(dim / m)
}

impl PqCodebook {
    /// Wraps trained centroids laid out `m × 256 × (dim / m)`.
    pub fn from_parts(dim: usize, m: usize, centroids: Vec<f32>) -> Result<Self> {
        let sub_dim = check_split(dim, m)?;
        if centroids.len() != m * CENTROIDS_PER_SUBSPACE * sub_dim {
            return Err(Error::param(format!(
                "codebook needs {} floats, got {}",
                m * CENTROIDS_PER_SUBSPACE * sub_dim,
                centroids.len()
            )));
        }
        if centroids.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("non-finite codebook entry"));
        }
        Ok(Self {
            dim,
            m,
            sub_dim,
            centroids,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sub_dim(&self) -> usize {
        self.sub_dim
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.centroids
    }

    #[inline]
    pub fn centroid(&self, sub: usize, index: usize) -> &[f32] {
        let start = (sub * CENTROIDS_PER_SUBSPACE + index) * self.sub_dim;
        &self.centroids[start..start + self.sub_dim]
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: len,
            });
        }
        Ok(())
    }

    /// Nearest centroid per sub-space, ties to the smaller index.
    pub fn encode(&self, v: &[f32]) -> Result<PqCode> {
        self.check_dim(v.len())?;
        let mut code = vec![0u8; self.m];
        self.encode_into(v, &mut code);
        Ok(PqCode(code))
    }

    pub(crate) fn encode_into(&self, v: &[f32], out: &mut [u8]) {
        for (sub, (chunk, slot)) in v.chunks_exact(self.sub_dim).zip(out).enumerate() {
            let mut best = (0usize, f32::INFINITY);
            for j in 0..CENTROIDS_PER_SUBSPACE {
                let d = l2_sq(chunk, self.centroid(sub, j));
                if d < best.1 {
                    best = (j, d);
                }
            }
            *slot = best.0 as u8;
        }
    }

    pub fn reconstruct(&self, code: &[u8]) -> Result<Vec<f32>> {
        if code.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                actual: code.len(),
            });
        }
        let mut out = Vec::with_capacity(self.dim);
        for (sub, &c) in code.iter().enumerate() {
            out.extend_from_slice(self.centroid(sub, c as usize));
        }
        Ok(out)
    }

    pub fn build_lut(&self, query: &[f32]) -> Result<LookupTable> {
        self.check_dim(query.len())?;
        let mut table = Vec::with_capacity(self.m * CENTROIDS_PER_SUBSPACE);
        for (sub, chunk) in query.chunks_exact(self.sub_dim).enumerate() {
            table.extend((0..CENTROIDS_PER_SUBSPACE).map(|j| l2_sq(chunk, self.centroid(sub, j))));
        }
        Ok(LookupTable { m: self.m, table })
    }
}

/// Trains one 256-centroid k-means per sub-space.
pub fn pq_train(data: &Dataset, m: usize, seed: u64) -> Result<PqCodebook> {
    pq_train_with_iters(data, m, DEFAULT_ITERS, seed)
}

pub fn pq_train_with_iters(data: &Dataset, m: usize, iters: usize, seed: u64) -> Result<PqCodebook> {
    let dim = data.dim();
    let sub_dim = check_split(dim, m)?;
    if data.len() < CENTROIDS_PER_SUBSPACE {
        return Err(Error::param(format!(
            "product quantizer training needs at least {CENTROIDS_PER_SUBSPACE} vectors, got {}",
            data.len()
        )));
    }
    // independent, reproducible seed per sub-space
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = Vec::with_capacity(m * CENTROIDS_PER_SUBSPACE * sub_dim);
    for sub in 0..m {
        let slice = data.columns(sub * sub_dim, sub_dim)?;
        let c = kmeans_train(&slice, CENTROIDS_PER_SUBSPACE, iters, seeder.gen())?;
        centroids.extend_from_slice(c.as_slice());
    }
    PqCodebook::from_parts(dim, m, centroids)
}

pub fn pq_encode(codebook: &PqCodebook, v: &[f32]) -> Result<PqCode> {
    codebook.encode(v)
}

pub fn pq_reconstruct(codebook: &PqCodebook, code: &[u8]) -> Result<Vec<f32>> {
    codebook.reconstruct(code)
}

pub fn build_lut(codebook: &PqCodebook, query: &[f32]) -> Result<LookupTable> {
    codebook.build_lut(query)
}

/// Sum of the `m` table entries addressed by `code`.
#[inline]
pub fn adc_distance(lut: &LookupTable, code: &[u8]) -> f32 {
    debug_assert_eq!(lut.m, code.len());
    code.iter()
        .enumerate()
        .map(|(sub, &c)| lut.table[sub * CENTROIDS_PER_SUBSPACE + c as usize])
        .sum()
}

/// Orthonormal `D × D` rotation applied to vectors before quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct OpqMatrix {
    dim: usize,
    /// Row-major.
    data: Vec<f32>,
}

impl OpqMatrix {
    pub const ORTHONORMAL_TOLERANCE: f64 = 1e-4;

    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::param(format!(
                "rotation of dimension {dim} needs {} entries, got {}",
                dim * dim,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("rotation has non-finite entries"));
        }
        let m = Self { dim, data };
        let err = m.orthonormality_error();
        if err.is_nan() || err > Self::ORTHONORMAL_TOLERANCE {
            return Err(Error::param(format!(
                "matrix is not orthonormal (max |R·Rᵀ − I| = {err:e})"
            )));
        }
        Ok(m)
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Largest entry of `|R·Rᵀ − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let dot: f64 = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(a, b)| f64::from(*a) * f64::from(*b))
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - want).abs());
            }
        }
        worst
    }

    /// `R · v`.
    pub fn apply(&self, v: &[f32]) -> Result<Vec<f32>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: v.len(),
            });
        }
        Ok((0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn apply_dataset(&self, data: &Dataset) -> Result<Dataset> {
        let mut out = Vec::with_capacity(data.as_slice().len());
        for v in data.iter() {
            out.extend(self.apply(v)?);
        }
        Dataset::new(data.dim(), out)
    }
}

pub fn apply_opq(matrix: &OpqMatrix, query: &[f32]) -> Result<Vec<f32>> {
    matrix.apply(query)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_data(n: usize, dim: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Dataset::new(dim, (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_codebook(dim: usize, m: usize, seed: u64) -> PqCodebook {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = m * CENTROIDS_PER_SUBSPACE * (dim / m);
        PqCodebook::from_parts(dim, m, (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
    }

    fn rel_close(a: f32, b: f32, tol: f64) -> bool {
        let (a, b) = (f64::from(a), f64::from(b));
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn train_shapes_and_errors() {
        let data = random_data(300, 2, 1);
        let cb = pq_train_with_iters(&data, 2, 3, 5).unwrap();
        assert_eq!(cb.m(), 2);
        assert_eq!(cb.sub_dim(), 1);
        assert_eq!(cb.as_slice().len(), 2 * 256);

        let err = pq_train(&random_data(300, 6, 1), 4, 0).unwrap_err();
        assert!(err.to_string().contains("D not divisible by m"), "{err}");
        assert!(pq_train(&random_data(255, 2, 1), 1, 0).is_err());
    }

    #[test]
    fn train_on_exactly_256_points_is_lossless() {
        let data = random_data(256, 3, 2);
        let cb = pq_train_with_iters(&data, 1, 5, 9).unwrap();
        let mut got: Vec<Vec<u32>> = (0..256)
            .map(|j| cb.centroid(0, j).iter().map(|x| x.to_bits()).collect())
            .collect();
        let mut want: Vec<Vec<u32>> = data
            .iter()
            .map(|v| v.iter().map(|x| x.to_bits()).collect())
            .collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);
        for v in data.iter() {
            let r = cb.reconstruct(&cb.encode(v).unwrap().0).unwrap();
            assert_eq!(l2_sq(v, &r), 0.0);
        }
    }

    #[test]
    fn encode_exact_centroid() {
        let cb = random_codebook(8, 4, 3);
        let v: Vec<f32> = (0..4).flat_map(|s| cb.centroid(s, 7).to_vec()).collect();
        assert_eq!(cb.encode(&v).unwrap().0, vec![7; 4]);
        assert_eq!(cb.reconstruct(&[7; 4]).unwrap(), v);
    }

    #[test]
    fn encode_matches_exhaustive_scan() {
        let cb = random_codebook(6, 3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let v: Vec<f32> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let code = cb.encode(&v).unwrap();
            for s in 0..3 {
                let sub = &v[s * 2..s * 2 + 2];
                let best = (0..256)
                    .min_by(|&a, &b| {
                        l2_sq(sub, cb.centroid(s, a))
                            .total_cmp(&l2_sq(sub, cb.centroid(s, b)))
                            .then(a.cmp(&b))
                    })
                    .unwrap();
                assert_eq!(code.0[s] as usize, best);
            }
        }
    }

    #[test]
    fn reconstruct_concatenates() {
        let cb = random_codebook(4, 2, 6);
        let zero = cb.reconstruct(&[0, 0]).unwrap();
        assert_eq!(&zero[..2], cb.centroid(0, 0));
        assert_eq!(&zero[2..], cb.centroid(1, 0));
        let r = cb.reconstruct(&[200, 17]).unwrap();
        let mut manual = cb.centroid(0, 200).to_vec();
        manual.extend_from_slice(cb.centroid(1, 17));
        assert_eq!(r, manual);
        assert!(cb.reconstruct(&[1]).is_err());
    }

    #[test]
    fn lut_examples() {
        let mut c = vec![0.0; 512];
        c[0] = 1.0;
        c[1] = 2.0;
        let cb = PqCodebook::from_parts(2, 1, c).unwrap();
        let lut = cb.build_lut(&[2.0, 2.0]).unwrap();
        assert_eq!(lut.get(0, 0), 1.0);

        let cb = random_codebook(8, 2, 7);
        let q: Vec<f32> = [cb.centroid(0, 9), cb.centroid(1, 100)].concat();
        let lut = cb.build_lut(&q).unwrap();
        assert_eq!(lut.get(0, 9), 0.0);
        assert_eq!(lut.get(1, 100), 0.0);
        for s in 0..2 {
            for j in 0..256 {
                assert_eq!(lut.get(s, j), l2_sq(&q[s * 4..s * 4 + 4], cb.centroid(s, j)));
            }
        }
        assert!(cb.build_lut(&[0.0; 3]).is_err());
    }

    #[test]
    fn adc_sums_rows() {
        let mut table = vec![0.0; 512];
        table[3] = 1.0;
        table[256 + 5] = 4.0;
        let lut = LookupTable { m: 2, table };
        assert_eq!(adc_distance(&lut, &[3, 5]), 5.0);
    }

    #[test]
    fn adc_zero_at_reconstruction() {
        let cb = random_codebook(8, 4, 8);
        let code = [1u8, 2, 3, 4];
        let q = cb.reconstruct(&code).unwrap();
        let lut = cb.build_lut(&q).unwrap();
        assert_eq!(adc_distance(&lut, &code), 0.0);
    }

    #[test]
    fn opq_examples() {
        let q = [0.5, -1.5, 2.0];
        assert_eq!(OpqMatrix::identity(3).apply(&q).unwrap(), q.to_vec());
        let rot = OpqMatrix::new(2, vec![0.0, -1.0, 1.0, 0.0]).unwrap();
        assert_eq!(apply_opq(&rot, &[1.0, 0.0]).unwrap(), vec![0.0, 1.0]);
        assert!(OpqMatrix::new(2, vec![1.0, 1.0, 0.0, 1.0]).is_err());
        assert!(OpqMatrix::new(2, vec![1.0, 0.0, 0.0]).is_err());
        assert!(OpqMatrix::new(2, vec![f32::NAN, 0.0, 0.0, 1.0]).is_err());
    }

    /// Random orthonormal matrix by Gram-Schmidt in f64.
    pub(crate) fn random_rotation(dim: usize, seed: u64) -> OpqMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        while rows.len() < dim {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for r in &rows {
                let dot: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(r).for_each(|(a, b)| *a -= dot * b);
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-3 {
                rows.push(v.into_iter().map(|a| a / norm).collect());
            }
        }
        OpqMatrix::new(dim, rows.into_iter().flatten().map(|x| x as f32).collect()).unwrap()
    }

    #[test]
    fn random_rotation_preserves_norm() {
        let r = random_rotation(16, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let q: Vec<f32> = (0..16).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let rq = r.apply(&q).unwrap();
            let n0: f32 = q.iter().map(|x| x * x).sum::<f32>().sqrt();
            let n1: f32 = rq.iter().map(|x| x * x).sum::<f32>().sqrt();
            assert!(rel_close(n0, n1, 1e-4), "{n0} vs {n1}");
        }
    }

    proptest! {
        #[test]
        fn adc_equals_distance_to_reconstruction(
            seed in any::<u64>(),
            code in proptest::collection::vec(any::<u8>(), 4),
            q in proptest::collection::vec(-3.0f32..3.0, 8),
        ) {
            let cb = random_codebook(8, 4, seed);
            let lut = cb.build_lut(&q).unwrap();
            let direct = l2_sq(&q, &cb.reconstruct(&code).unwrap());
            prop_assert!(rel_close(adc_distance(&lut, &code), direct, 1e-4));
        }

        #[test]
        fn encoding_is_optimal_over_all_codes(
            seed in any::<u64>(),
            v in proptest::collection::vec(-2.0f32..2.0, 2),
        ) {
            // m = 2 with 1-dim sub-spaces: 65536 codes, checked exhaustively
            let cb = random_codebook(2, 2, seed);
            let code = cb.encode(&v).unwrap();
            let own = l2_sq(&v, &cb.reconstruct(&code.0).unwrap());
            for a in 0..=255u8 {
                for b in 0..=255u8 {
                    let other = l2_sq(&v, &cb.reconstruct(&[a, b]).unwrap());
                    prop_assert!(own <= other * (1.0 + 1e-6) + 1e-12);
                }
            }
        }

        #[test]
        fn encode_reconstruct_fixed_point(seed in any::<u64>(), code in proptest::collection::vec(any::<u8>(), 3)) {
            // random continuous centroids are distinct with probability one
            let cb = random_codebook(6, 3, seed);
            let r = cb.reconstruct(&code).unwrap();
            prop_assert_eq!(cb.encode(&r).unwrap().0, code);
        }
    }
}
