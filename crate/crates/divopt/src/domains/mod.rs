//! Benchmark domains: feature functions mapping solution vectors to
//! low-dimensional feature vectors whose range the search should cover.
//!
//! All domains are pure and deterministic, return features inside their
//! declared bounds, and report a constant objective of 1 so that
//! quality-diversity drivers degenerate to pure diversity optimization.

mod maze;

pub use maze::{MazeDomain, MazeWorld, Segment};

use crate::{Error, Feature, Result};
use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// A benchmark feature function.
pub trait Domain: Send + Sync {
    /// Dimension n of solution vectors.
    fn solution_dim(&self) -> usize;

    /// Dimension m of feature vectors.
    fn feature_dim(&self) -> usize;

    /// Per-dimension (lower, upper) bounds enclosing every reachable
    /// feature.
    fn feature_bounds(&self) -> (Vec<f64>, Vec<f64>);

    /// Computes the feature vector of a solution.
    fn evaluate(&self, solution: &[f64]) -> Result<Feature>;

    /// Solution quality; constant 1 in diversity-only mode.
    fn objective(&self, _solution: &[f64]) -> f64 {
        1.0
    }
}

/// Bounded contribution of one solution component: identity on
/// [-5.12, 5.12], reciprocal-scaled outside so large magnitudes
/// contribute almost nothing.
pub fn clip(x: f64) -> f64 {
    if x.abs() <= 5.12 {
        x
    } else {
        5.12 / x
    }
}

fn check_dim(expected: usize, solution: &[f64]) -> Result<()> {
    if solution.len() != expected {
        return Err(Error::DimensionMismatch { expected, actual: solution.len() });
    }
    Ok(())
}

/// Two features: the clipped sums of the first and second halves of the
/// solution vector. Feature range is [-2.56n, 2.56n] per dimension.
#[derive(Debug, Clone)]
pub struct LinearProjection {
    n: usize,
}

impl LinearProjection {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidConfig("linear projection needs an even dimension"));
        }
        Ok(Self { n })
    }
}

impl Domain for LinearProjection {
    fn solution_dim(&self) -> usize {
        self.n
    }

    fn feature_dim(&self) -> usize {
        2
    }

    fn feature_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let half = 5.12 * (self.n / 2) as f64;
        (vec![-half, -half], vec![half, half])
    }

    fn evaluate(&self, solution: &[f64]) -> Result<Feature> {
        check_dim(self.n, solution)?;
        let half = self.n / 2;
        let first = solution[..half].iter().copied().map(clip).sum();
        let second = solution[half..].iter().copied().map(clip).sum();
        Ok(vec![first, second])
    }
}

/// Generalization of [`LinearProjection`] to m features: the solution
/// splits into m contiguous blocks of n/m components and each feature is
/// one block's clipped sum.
#[derive(Debug, Clone)]
pub struct MultiFeatureLp {
    n: usize,
    m: usize,
}

impl MultiFeatureLp {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if m == 0 || n == 0 || n % m != 0 {
            return Err(Error::InvalidConfig(
                "multi-feature projection needs the feature count to divide the dimension",
            ));
        }
        Ok(Self { n, m })
    }
}

impl Domain for MultiFeatureLp {
    fn solution_dim(&self) -> usize {
        self.n
    }

    fn feature_dim(&self) -> usize {
        self.m
    }

    fn feature_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let reach = 5.12 * (self.n / self.m) as f64;
        (vec![-reach; self.m], vec![reach; self.m])
    }

    fn evaluate(&self, solution: &[f64]) -> Result<Feature> {
        check_dim(self.n, solution)?;
        let block = self.n / self.m;
        Ok(solution
            .chunks_exact(block)
            .map(|chunk| chunk.iter().copied().map(clip).sum())
            .collect())
    }
}

/// Planar arm with n unit-length links: the solution holds relative
/// joint angles and the feature is the end-effector position, which
/// always lies in the disk of radius n.
#[derive(Debug, Clone)]
pub struct ArmRepertoire {
    n: usize,
}

impl ArmRepertoire {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("arm needs at least one link"));
        }
        Ok(Self { n })
    }
}

impl Domain for ArmRepertoire {
    fn solution_dim(&self) -> usize {
        self.n
    }

    fn feature_dim(&self) -> usize {
        2
    }

    fn feature_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let r = self.n as f64;
        (vec![-r, -r], vec![r, r])
    }

    fn evaluate(&self, solution: &[f64]) -> Result<Feature> {
        check_dim(self.n, solution)?;
        let mut angle = 0.0;
        let mut x = 0.0;
        let mut y = 0.0;
        for theta in solution {
            angle += theta;
            x += angle.cos();
            y += angle.sin();
        }
        Ok(vec![x, y])
    }
}
