//! Visited-node tracking.
//!
//! The Bloom filter maps each node id through `h` seeded 64-bit
//! MurmurHash64A hashes into a `b`-bit array. A lookup can report a node
//! as visited when it was not (a false positive, which only skips work)
//! but never the reverse.

/// Visited-set contract shared by the Bloom filter and the exact bitmap.
pub trait VisitedSet {
    fn contains(&self, id: u32) -> bool;
    fn insert(&mut self, id: u32);
    /// Number of `insert` calls so far.
    fn inserted(&self) -> u64;
    /// Predicted false-positive rate at the current fill; zero for exact sets.
    fn false_positive_rate(&self) -> f64 {
        0.0
    }
}

/// MurmurHash64A.
pub fn murmur64a(key: &[u8], seed: u64) -> u64 {
    const M: u64 = 0xc6a4_a793_5bd1_e995;
    const R: u32 = 47;
    let mut h = seed ^ (key.len() as u64).wrapping_mul(M);
    let mut chunks = key.chunks_exact(8);
    for chunk in &mut chunks {
        let mut k = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        k = k.wrapping_mul(M);
        k ^= k >> R;
        k = k.wrapping_mul(M);
        h ^= k;
        h = h.wrapping_mul(M);
    }
    let tail = chunks.remainder();
    if !tail.is_empty() {
        for (i, &b) in tail.iter().enumerate() {
            h ^= u64::from(b) << (8 * i);
        }
        h = h.wrapping_mul(M);
    }
    h ^= h >> R;
    h = h.wrapping_mul(M);
    h ^= h >> R;
    h
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `(1 − e^{−h·m/b})^h` for `h` hashes, `b` bits and `m` inserted items.
pub fn bloom_fp_rate(hashes: u32, bits: u64, inserted: u64) -> f64 {
    let h = f64::from(hashes);
    let ratio = h * inserted as f64 / bits as f64;
    (-(-ratio).exp_m1()).powf(h)
}

#[derive(Debug, Clone)]
pub struct BloomVisitedSet {
    bits: u64,
    seeds: Vec<u64>,
    words: Vec<u64>,
    inserted: u64,
}

impl BloomVisitedSet {
    pub const DEFAULT_BITS: u64 = 1 << 18;
    pub const DEFAULT_HASHES: u32 = 3;
    pub const DEFAULT_SEED: u64 = 0x5eed_b100_f11e_0001;

    /// `bits` and `hashes` are clamped to at least 1. The per-hash seeds are
    /// expanded deterministically from `seed`.
    pub fn new(bits: u64, hashes: u32, seed: u64) -> Self {
        let bits = bits.max(1);
        let mut state = seed;
        let seeds = (0..hashes.max(1)).map(|_| splitmix64(&mut state)).collect();
        Self {
            bits,
            seeds,
            words: vec![0; bits.div_ceil(64) as usize],
            inserted: 0,
        }
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn hashes(&self) -> u32 {
        self.seeds.len() as u32
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    #[inline]
    fn positions(&self, id: u32) -> impl Iterator<Item = u64> + '_ {
        let key = id.to_le_bytes();
        self.seeds
            .iter()
            .map(move |&s| murmur64a(&key, s) % self.bits)
    }
}

impl Default for BloomVisitedSet {
    fn default() -> Self {
        Self::new(Self::DEFAULT_BITS, Self::DEFAULT_HASHES, Self::DEFAULT_SEED)
    }
}

impl VisitedSet for BloomVisitedSet {
    #[inline]
    fn contains(&self, id: u32) -> bool {
        self.positions(id)
            .all(|p| self.words[(p / 64) as usize] & (1 << (p % 64)) != 0)
    }

    #[inline]
    fn insert(&mut self, id: u32) {
        let key = id.to_le_bytes();
        for &s in &self.seeds {
            let p = murmur64a(&key, s) % self.bits;
            self.words[(p / 64) as usize] |= 1 << (p % 64);
        }
        self.inserted += 1;
    }

    fn inserted(&self) -> u64 {
        self.inserted
    }

    fn false_positive_rate(&self) -> f64 {
        bloom_fp_rate(self.hashes(), self.bits, self.inserted)
    }
}

/// One bit per node; the reference the Bloom filter is checked against.
#[derive(Debug, Clone)]
pub struct ExactVisitedSet {
    words: Vec<u64>,
    inserted: u64,
}

impl ExactVisitedSet {
    pub fn new(capacity: usize) -> Self {
        Self {
            words: vec![0; capacity.div_ceil(64)],
            inserted: 0,
        }
    }
}

impl VisitedSet for ExactVisitedSet {
    #[inline]
    fn contains(&self, id: u32) -> bool {
        self.words
            .get(id as usize / 64)
            .is_some_and(|w| w & (1 << (id % 64)) != 0)
    }

    #[inline]
    fn insert(&mut self, id: u32) {
        let word = id as usize / 64;
        if word >= self.words.len() {
            self.words.resize(word + 1, 0);
        }
        self.words[word] |= 1 << (id % 64);
        self.inserted += 1;
    }

    fn inserted(&self) -> u64 {
        self.inserted
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn murmur_seed_and_key_sensitivity() {
        // empty key with zero seed finalizes zero to zero
        assert_eq!(murmur64a(b"", 0), 0);
        assert_ne!(murmur64a(&1u32.to_le_bytes(), 1), murmur64a(&1u32.to_le_bytes(), 2));
        assert_ne!(murmur64a(&1u32.to_le_bytes(), 1), murmur64a(&2u32.to_le_bytes(), 1));
    }

    #[test]
    fn fresh_set_is_empty() {
        let b = BloomVisitedSet::default();
        assert!((0..10_000).all(|x| !b.contains(x)));
        assert_eq!(b.false_positive_rate(), 0.0);
    }

    #[test]
    fn inserted_ids_are_found() {
        let mut b = BloomVisitedSet::default();
        b.insert(42);
        assert!(b.contains(42));
        assert_eq!(b.inserted(), 1);
    }

    #[test]
    fn fp_formula_values() {
        assert_eq!(bloom_fp_rate(3, 1 << 18, 0), 0.0);
        assert!((bloom_fp_rate(1, 1, 10_000) - 1.0).abs() < 1e-12);
        // (1 − e^{−3000/262144})^3
        let p = bloom_fp_rate(3, 1 << 18, 1000);
        assert!((p - 1.473_316_149e-6).abs() < 1e-14, "{p}");
        assert!(p < 1.0 / 600_000.0);
    }

    #[test]
    fn exact_set_grows() {
        let mut e = ExactVisitedSet::new(4);
        assert!(!e.contains(1000));
        e.insert(1000);
        assert!(e.contains(1000));
        assert!(!e.contains(999));
    }

    proptest! {
        #[test]
        fn no_false_negatives(
            seed in any::<u64>(),
            bits in 1u64..4096,
            hashes in 1u32..6,
            ids in proptest::collection::vec(any::<u32>(), 0..300),
        ) {
            let mut b = BloomVisitedSet::new(bits, hashes, seed);
            for (i, &id) in ids.iter().enumerate() {
                b.insert(id);
                for &prev in &ids[..=i] {
                    prop_assert!(b.contains(prev));
                }
            }
        }
    }
}
