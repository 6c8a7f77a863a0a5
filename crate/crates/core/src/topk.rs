//! K-selection structures.
//!
//! [`BoundedMinSet`] captures the input/output contract of a replace-only
//! systolic priority queue: once full, an incoming item evicts the current
//! maximum iff it is smaller. The hierarchical queue ([`ahpq_select`]) puts
//! one such set on every input stream and merges the survivors in a second
//! level. Its first-level queues may be truncated below `K`; the binomial
//! occupancy model in [`hpq_hold_probability`] and [`ahpq_l1_length`]
//! sizes them.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::neighbor::{Neighbor, SearchResult};

/// Keeps the `capacity` smallest neighbors seen so far.
#[derive(Debug, Clone)]
pub struct BoundedMinSet {
    capacity: usize,
    heap: BinaryHeap<Neighbor>,
}

impl BoundedMinSet {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            heap: BinaryHeap::with_capacity(capacity + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.heap.len() >= self.capacity
    }

    /// Largest retained item.
    pub fn max(&self) -> Option<&Neighbor> {
        self.heap.peek()
    }

    /// Admission threshold: the largest retained distance once full,
    /// `+inf` while there is still room.
    pub fn threshold(&self) -> f32 {
        if self.is_full() {
            self.heap.peek().map_or(f32::INFINITY, |n| n.distance)
        } else {
            f32::INFINITY
        }
    }

    /// Returns true if the item was retained.
    pub fn insert(&mut self, item: Neighbor) -> bool {
        if self.heap.len() < self.capacity {
            self.heap.push(item);
            return true;
        }
        match self.heap.peek_mut() {
            Some(mut top) if item < *top => {
                *top = item;
                true
            }
            _ => false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Neighbor> {
        self.heap.iter()
    }

    pub fn into_sorted_vec(self) -> Vec<Neighbor> {
        self.heap.into_sorted_vec()
    }

    /// The `k` smallest retained items, ascending.
    pub fn into_result(self, k: usize) -> SearchResult {
        let mut v = self.heap.into_sorted_vec();
        v.truncate(k);
        SearchResult::from_unsorted(v)
    }
}

/// Exact top-`k` over a stream, via a single bounded set.
pub fn select_k<I: IntoIterator<Item = Neighbor>>(items: I, k: usize) -> SearchResult {
    let mut set = BoundedMinSet::new(k);
    for item in items {
        set.insert(item);
    }
    set.into_result(k)
}

fn check_binomial(k: usize, num_queues: usize) -> Result<()> {
    if num_queues == 0 {
        return Err(Error::param("num_queues must be at least 1"));
    }
    if k == 0 {
        return Err(Error::param("K must be at least 1"));
    }
    Ok(())
}

/// `ln C(n, j)` summed term by term.
fn ln_choose(n: usize, j: usize) -> f64 {
    let j = j.min(n - j);
    (1..=j)
        .map(|i| ((n - j + i) as f64 / i as f64).ln())
        .sum()
}

/// Probability that one of `num_queues` equally likely queues receives
/// exactly `j` of the `k` global results:
/// `C(k, j) (1/n)^j (1 - 1/n)^(k - j)`.
pub fn hpq_hold_probability(k: usize, num_queues: usize, j: usize) -> Result<f64> {
    check_binomial(k, num_queues)?;
    if j > k {
        return Err(Error::param(format!("j = {j} exceeds K = {k}")));
    }
    Ok(binomial_mass(k, num_queues, j))
}

fn binomial_mass(k: usize, num_queues: usize, j: usize) -> f64 {
    if num_queues == 1 {
        return if j == k { 1.0 } else { 0.0 };
    }
    let p = 1.0 / num_queues as f64;
    let ln = ln_choose(k, j) + j as f64 * p.ln() + (k - j) as f64 * (-p).ln_1p();
    ln.exp()
}

/// Smallest first-level queue length `L` such that, by a union bound over
/// the queues, the chance that any queue receives more than `L` of the
/// `k` results is at most `1 - target`.
pub fn ahpq_l1_length(k: usize, num_queues: usize, target: f64) -> Result<usize> {
    check_binomial(k, num_queues)?;
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::param(format!("target {target} must lie in (0, 1)")));
    }
    let budget = 1.0 - target;
    // Upper tails summed from the top so small masses are not lost to
    // cancellation against 1.
    let mut tail = 0.0;
    let mut tails = vec![0.0; k + 1];
    for len in (0..k).rev() {
        tail += binomial_mass(k, num_queues, len + 1);
        tails[len] = tail;
    }
    Ok((0..=k)
        .find(|&len| num_queues as f64 * tails[len] <= budget)
        .unwrap_or(k))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AhpqConfig {
    pub num_queues: usize,
    pub k: usize,
    pub l1_len: usize,
    pub target: f64,
}

impl AhpqConfig {
    pub const DEFAULT_TARGET: f64 = 0.99;

    pub fn new(num_queues: usize, k: usize, l1_len: usize, target: f64) -> Result<Self> {
        check_binomial(k, num_queues)?;
        if l1_len == 0 || l1_len > k {
            return Err(Error::param(format!(
                "l1_len = {l1_len} must be in 1..={k}"
            )));
        }
        if !(target > 0.0 && target < 1.0) {
            return Err(Error::param(format!("target {target} must lie in (0, 1)")));
        }
        Ok(Self {
            num_queues,
            k,
            l1_len,
            target,
        })
    }

    /// Configuration with first-level queues sized by [`ahpq_l1_length`].
    pub fn sized(num_queues: usize, k: usize, target: f64) -> Result<Self> {
        let l1_len = ahpq_l1_length(k, num_queues, target)?.max(1);
        Self::new(num_queues, k, l1_len, target)
    }

    /// Untruncated hierarchy, equivalent to exact selection.
    pub fn exact(num_queues: usize, k: usize) -> Result<Self> {
        Self::new(num_queues, k, k, Self::DEFAULT_TARGET)
    }
}

/// Two-level K-selection: each stream passes through its own bounded set
/// of `l1_len`, then a `k`-capacity set merges the survivors.
pub fn ahpq_select<S: AsRef<[Neighbor]>>(streams: &[S], config: &AhpqConfig) -> Result<SearchResult> {
    if streams.len() != config.num_queues {
        return Err(Error::param(format!(
            "{} streams for {} first-level queues",
            streams.len(),
            config.num_queues
        )));
    }
    let mut l2 = BoundedMinSet::new(config.k);
    for stream in streams {
        let mut l1 = BoundedMinSet::new(config.l1_len);
        for &item in stream.as_ref() {
            l1.insert(item);
        }
        for item in l1.into_sorted_vec() {
            l2.insert(item);
        }
    }
    Ok(l2.into_result(config.k))
}
