//! Vector search over dense `f32` datasets.
//!
//! Two retrieval families are provided:
//!
//! - [`ivf`]: inverted-file indexes with optional product quantization
//!   ([`pq`]) and an orthonormal query rotation, searched through a
//!   six-stage pipeline (rotate, coarse distances, cell selection, lookup
//!   tables, code scanning, top-k selection).
//! - [`graph`]: proximity graphs traversed with best-first search or with
//!   delayed-synchronization traversal, using a Bloom filter as the visited
//!   set.
//!
//! [`topk`] models the bounded K-selection queues used by both paths,
//! [`dataset`] holds the benchmark file formats and the exact-kNN oracle,
//! and [`eval`] drives recall sweeps and parameter exploration.
//!
//! All distances are squared L2.

pub mod clustering;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod graph;
pub mod ivf;
pub mod pq;
pub mod topk;

mod codec;
mod neighbor;

pub use dataset::{Dataset, GroundTruth};
pub use error::{Error, Result};
pub use neighbor::{l2_sq, Neighbor, SearchResult, SearchStats};
