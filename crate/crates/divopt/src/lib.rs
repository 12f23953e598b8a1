//! Diversity optimization over continuous feature spaces.
//!
//! The crate provides five algorithm drivers that all share the same
//! plumbing: a batch of solutions is drawn per emitter, evaluated by a
//! benchmark domain into feature vectors, recorded in a passive archive
//! for metrics, and ranked to update the emitter.
//!
//! * [`algorithms::run_dds_kde`]: density-descent search. Features stream
//!   through a reservoir-sampled buffer into a kernel density estimator;
//!   batches are ranked by ascending estimated density.
//! * [`algorithms::run_novelty_search`]: novelty search driving CMA-ES,
//!   ranking by descending mean distance to nearest archived neighbors.
//! * [`algorithms::run_cma_me`] / [`algorithms::run_cma_mae`]: archive
//!   improvement ranking, with CMA-MAE annealing per-cell acceptance
//!   thresholds.
//! * [`algorithms::run_map_elites_line`]: MAP-Elites with the Iso+LineDD
//!   variation operator.
//!
//! The library is `no_std`-compatible (requires `alloc`); the `std`
//! feature (default) only forwards to dependencies. All randomness comes
//! from caller-seeded ChaCha streams, and every code path is
//! deterministic for a fixed seed.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
#[macro_use]
extern crate std;

pub mod algorithms;
pub mod archive;
pub mod buffer;
pub mod cma;
pub mod density;
pub mod domains;
pub mod metrics;

mod error;

pub use error::{Error, Result};

use alloc::vec::Vec;

/// A point in search space (decision variables).
pub type Solution = Vec<f64>;

/// A point in feature (behavior descriptor) space.
pub type Feature = Vec<f64>;

/// A set of equal-dimension feature vectors in one flat allocation.
///
/// Row-major storage keeps distance scans over thousands of points cache
/// friendly; the buffer, the density estimator snapshot, the novelty
/// archive, and CVT centroids all use it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    data: Vec<f64>,
}

impl FeatureSet {
    /// Creates an empty set of `dim`-dimensional points.
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    /// Creates an empty set with room for `points` entries.
    pub fn with_capacity(dim: usize, points: usize) -> Self {
        Self { dim, data: Vec::with_capacity(dim * points) }
    }

    /// Number of points in the set.
    pub fn len(&self) -> usize {
        if self.dim == 0 { 0 } else { self.data.len() / self.dim }
    }

    /// True when the set holds no points.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Dimension of every point in the set.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Appends a point. Panics if the dimension does not match.
    pub fn push(&mut self, point: &[f64]) {
        assert_eq!(point.len(), self.dim, "point dimension mismatch");
        self.data.extend_from_slice(point);
    }

    /// Borrows the `i`-th point.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Overwrites the `i`-th point.
    pub fn set_point(&mut self, i: usize, point: &[f64]) {
        assert_eq!(point.len(), self.dim, "point dimension mismatch");
        self.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(point);
    }

    /// Iterates over the points in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    /// Copies one point into an owned vector.
    pub fn to_vec(&self, i: usize) -> Vec<f64> {
        self.point(i).to_vec()
    }

    /// The underlying row-major storage, `dim` values per point.
    pub(crate) fn flat(&self) -> &[f64] {
        &self.data
    }
}

/// Squared Euclidean distance between two equal-length slices.
#[inline]
pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}
