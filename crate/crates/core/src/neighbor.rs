use std::cmp::Ordering;

use serde::Serialize;

/// Squared Euclidean distance.
///
/// Every search path and oracle in the crate goes through this function so
/// that distances computed along different routes are bit-identical.
#[inline]
pub fn l2_sq(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// A candidate id with its distance to the query.
///
/// Ordered by `(distance, id)` using the IEEE total order, so equal
/// distances are broken by the smaller id.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Neighbor {
    pub id: u32,
    pub distance: f32,
}

impl Neighbor {
    pub fn new(id: u32, distance: f32) -> Self {
        Self { id, distance }
    }
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Search output: neighbors in ascending `(distance, id)` order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SearchResult {
    neighbors: Vec<Neighbor>,
}

impl SearchResult {
    /// Sorts and deduplicates by id (keeping the closest entry).
    pub fn from_unsorted(mut neighbors: Vec<Neighbor>) -> Self {
        neighbors.sort();
        let mut seen = std::collections::HashSet::with_capacity(neighbors.len());
        neighbors.retain(|n| seen.insert(n.id));
        Self { neighbors }
    }

    pub(crate) fn from_sorted(neighbors: Vec<Neighbor>) -> Self {
        debug_assert!(neighbors.windows(2).all(|w| w[0] < w[1]));
        Self { neighbors }
    }

    pub fn neighbors(&self) -> &[Neighbor] {
        &self.neighbors
    }

    pub fn ids(&self) -> Vec<u32> {
        self.neighbors.iter().map(|n| n.id).collect()
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn into_vec(self) -> Vec<Neighbor> {
        self.neighbors
    }
}

/// Work counters reported by a single search.
///
/// For graph traversal a hop is one evaluated candidate group; for IVF
/// search it is one scanned cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SearchStats {
    pub hops: u64,
    pub nodes_visited: u64,
    pub distance_computations: u64,
    /// Bloom-filter false-positive rate for the final visited count, zero
    /// when an exact visited set was used.
    pub bloom_false_positive_upper: f64,
    /// Fewer than `k` candidates were available.
    pub underfilled: bool,
}
