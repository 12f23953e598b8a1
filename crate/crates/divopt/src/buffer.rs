//! Fixed-capacity uniform sample of a feature stream.
//!
//! The buffer maintains a simple random sample of size `b` over every
//! feature ever offered, using the optimal reservoir algorithm ("L"):
//! once full, it draws geometric skip lengths instead of flipping a coin
//! per element, touching the RNG only O(b log(N/b)) times for a stream
//! of length N. Each stream element ends with inclusion probability
//! `b / N`, and at most one slot changes per accepted element, which is
//! exactly the one-exchange hypothesis the density estimator's stability
//! bound relies on.

use crate::{FeatureSet, Result};
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Reservoir-sampled feature buffer.
#[derive(Debug, Clone)]
pub struct FeatureBuffer {
    capacity: usize,
    contents: FeatureSet,
    seen: u64,
    /// 1-based stream index of the next element to admit once full.
    next_accept: u64,
    /// Running maximum of the "kept" random keys, per algorithm L.
    w: f64,
    rng: ChaCha12Rng,
}

impl FeatureBuffer {
    /// Creates an empty buffer for `dim`-dimensional features.
    pub fn new(dim: usize, capacity: usize, seed: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(crate::Error::InvalidArgument("buffer capacity must be positive"));
        }
        Ok(Self {
            capacity,
            contents: FeatureSet::with_capacity(dim, capacity),
            seen: 0,
            next_accept: 0,
            w: 1.0,
            rng: ChaCha12Rng::seed_from_u64(seed),
        })
    }

    /// Maximum number of retained features (`b`).
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of features currently retained.
    pub fn len(&self) -> usize {
        self.contents.len()
    }

    /// True before anything has been offered.
    pub fn is_empty(&self) -> bool {
        self.contents.is_empty()
    }

    /// Total number of features ever offered (`N`).
    pub fn seen_count(&self) -> u64 {
        self.seen
    }

    /// Offers one feature from the stream.
    pub fn offer_one(&mut self, feature: &[f64]) {
        self.seen += 1;
        if self.contents.len() < self.capacity {
            self.contents.push(feature);
            if self.contents.len() == self.capacity {
                self.w = self.shrink_w();
                self.schedule_next();
            }
        } else if self.seen == self.next_accept {
            let slot = self.rng.gen_range(0..self.capacity);
            self.contents.set_point(slot, feature);
            self.w = self.w * self.shrink_w();
            self.schedule_next();
        }
    }

    /// Offers a batch element by element, preserving stream order.
    pub fn offer(&mut self, features: &FeatureSet) {
        for f in features.iter() {
            self.offer_one(f);
        }
    }

    /// Copies the current contents; later offers do not affect the copy.
    pub fn snapshot(&self) -> FeatureSet {
        self.contents.clone()
    }

    /// Draws `exp(ln(u) / b)` with `u` in (0, 1].
    fn shrink_w(&mut self) -> f64 {
        let u = 1.0 - self.rng.gen::<f64>();
        (u.ln() / self.capacity as f64).exp()
    }

    /// Advances `next_accept` by a geometric skip of parameter `w`.
    fn schedule_next(&mut self) {
        let u = 1.0 - self.rng.gen::<f64>();
        let skip = (u.ln() / (1.0 - self.w).ln()).floor();
        self.next_accept = self.seen.saturating_add(skip as u64).saturating_add(1);
    }
}
