//! Coverage and cross-entropy metrics over a tessellated archive, plus
//! per-trial summary statistics.
//!
//! Cross-entropy treats the per-cell visit counts as an empirical
//! distribution and scores it against the uniform one; its floor is
//! ln(cell count), reached exactly when visits are uniform. Cells that
//! were never visited contribute one smoothing visit each, and the
//! denominator grows by the number of smoothed cells so the implied
//! probabilities still sum to one.

use crate::archive::ElitesArchive;
use crate::{Error, Result};
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// One row of a per-iteration metrics log.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSnapshot {
    pub iteration: u64,
    pub evaluations: u64,
    pub coverage: f64,
    pub cross_entropy: f64,
    pub occupied_cells: usize,
}

/// Fraction of archive cells holding an elite.
pub fn coverage(archive: &ElitesArchive) -> f64 {
    archive.occupied_cells() as f64 / archive.cell_count() as f64
}

/// Cross-entropy of the archive's visit counts against uniform.
pub fn cross_entropy(archive: &ElitesArchive) -> Result<f64> {
    cross_entropy_of_counts(archive.visit_counts())
}

/// Cross-entropy of an arbitrary visit-count vector: with smoothed
/// counts `N'_e = max(N_e, 1)` and `denom = total + #zero cells`, this
/// is `-(1/l) * sum ln(N'_e / denom)`.
pub fn cross_entropy_of_counts(counts: &[u64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::UndefinedMetric("cross-entropy needs at least one visit"));
    }
    let zero_cells = counts.iter().filter(|&&c| c == 0).count();
    let denom = (total + zero_cells as u64) as f64;
    let sum_ln: f64 = counts.iter().filter(|&&c| c > 0).map(|&c| (c as f64).ln()).sum();
    Ok(denom.ln() - sum_ln / counts.len() as f64)
}

/// Mean and standard error of one statistic across trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Standard error of the mean, sample standard deviation (n-1
    /// denominator) over sqrt(n); 0 by convention for a single trial.
    pub sem: f64,
    pub trials: usize,
}

/// Summarizes one statistic observed once per trial.
pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("summary needs at least one value"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Ok(Summary { mean, sem: 0.0, trials: 1 });
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    Ok(Summary { mean, sem: (var / n as f64).sqrt(), trials: n })
}
