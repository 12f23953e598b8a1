//! Covariance matrix adaptation evolution strategy with an ask/tell
//! interface.
//!
//! The optimizer samples a batch from `N(mean, sigma^2 * C)`, receives a
//! caller-computed ranking of that batch (rank 0 = best), and updates
//! mean, step size, covariance, and both evolution paths with the
//! standard weighted mu-selection rules. It never sees objective values,
//! only the ranking, so any scoring rule (density, novelty, archive
//! improvement, raw objective) can drive it.

use crate::{Error, Result, Solution};
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

/// Strategy constants derived from the problem dimension `n` and batch
/// size `lambda` by the standard defaults. All fields may be overridden
/// before the first ask (they are plain data).
#[derive(Debug, Clone)]
pub struct CmaParams {
    pub n: usize,
    pub lambda: usize,
    /// Number of selected parents, `lambda / 2` rounded down.
    pub mu: usize,
    /// Log-decreasing positive recombination weights, sum 1.
    pub weights: Vec<f64>,
    /// Variance-effective selection mass.
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    /// Expected norm of an n-dimensional standard normal vector.
    pub chi_n: f64,
}

impl CmaParams {
    /// Derives the default constants for dimension `n` and batch size
    /// `lambda >= 2`.
    pub fn new(n: usize, lambda: usize) -> Self {
        assert!(n >= 1 && lambda >= 2);
        let nf = n as f64;
        let mu = lambda / 2;
        let mut weights: Vec<f64> = (0..mu)
            .map(|i| ((mu as f64) + 0.5).ln() - ((i + 1) as f64).ln())
            .collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma =
            1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3) * (nf + 1.3) + mu_eff);
        let c_mu = (1.0 - c_1)
            .min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0) * (nf + 2.0) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Self { n, lambda, mu, weights, mu_eff, c_sigma, d_sigma, c_c, c_1, c_mu, chi_n }
    }

    /// Generations between eigendecomposition refreshes.
    fn eigen_interval(&self) -> u64 {
        let raw = 1.0 / (10.0 * self.n as f64 * (self.c_1 + self.c_mu));
        (raw.ceil() as u64).max(1)
    }
}

/// Optional replacements for individual strategy constants and restart
/// limits, applied on top of the defaults when an emitter is created.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CmaOverrides {
    pub c_sigma: Option<f64>,
    pub d_sigma: Option<f64>,
    pub c_c: Option<f64>,
    pub c_1: Option<f64>,
    pub c_mu: Option<f64>,
    pub sigma_floor: Option<f64>,
    pub cond_limit: Option<f64>,
}

impl CmaOverrides {
    pub fn apply(&self, state: &mut CmaEs) {
        let params = state.params_mut();
        if let Some(v) = self.c_sigma {
            params.c_sigma = v;
        }
        if let Some(v) = self.d_sigma {
            params.d_sigma = v;
        }
        if let Some(v) = self.c_c {
            params.c_c = v;
        }
        if let Some(v) = self.c_1 {
            params.c_1 = v;
        }
        if let Some(v) = self.c_mu {
            params.c_mu = v;
        }
        if let Some(v) = self.sigma_floor {
            state.sigma_floor = v;
        }
        if let Some(v) = self.cond_limit {
            state.cond_limit = v;
        }
    }
}

/// One CMA-ES instance.
#[derive(Debug, Clone)]
pub struct CmaEs {
    params: CmaParams,
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    path_sigma: DVector<f64>,
    path_c: DVector<f64>,
    generation: u64,
    /// Step-size floor for the restart rule, compared against
    /// `sigma^2 * max diag(C)`.
    pub sigma_floor: f64,
    /// Covariance condition-number ceiling for the restart rule.
    pub cond_limit: f64,
    // Cached eigendecomposition of cov, refreshed lazily.
    basis: DMatrix<f64>,
    scale: DVector<f64>,
    inv_sqrt: DMatrix<f64>,
    eigen_generation: u64,
    eigen_ok: bool,
}

impl CmaEs {
    /// Starts a fresh strategy at `initial_mean` with isotropic spread
    /// `initial_step` and batch size `batch_size >= 2`.
    pub fn new(initial_mean: &[f64], initial_step: f64, batch_size: usize) -> Result<Self> {
        if !(initial_step > 0.0) {
            return Err(Error::InvalidArgument("initial step size must be positive"));
        }
        if batch_size < 2 {
            return Err(Error::InvalidArgument("batch size must be at least 2"));
        }
        if initial_mean.is_empty() {
            return Err(Error::InvalidArgument("mean must have at least one dimension"));
        }
        let n = initial_mean.len();
        let mut state = Self {
            params: CmaParams::new(n, batch_size),
            mean: DVector::from_column_slice(initial_mean),
            sigma: initial_step,
            cov: DMatrix::identity(n, n),
            path_sigma: DVector::zeros(n),
            path_c: DVector::zeros(n),
            generation: 0,
            sigma_floor: 1e-32,
            cond_limit: 1e14,
            basis: DMatrix::identity(n, n),
            scale: DVector::from_element(n, 1.0),
            inv_sqrt: DMatrix::identity(n, n),
            eigen_generation: 0,
            eigen_ok: true,
        };
        state.refresh_eigen();
        Ok(state)
    }

    /// Draws `lambda` solutions from `N(mean, sigma^2 * C)`.
    ///
    /// Only the RNG advances; the strategy state is untouched. Fails
    /// with [`Error::RestartRequired`] if the covariance lost positive
    /// definiteness at its last refresh.
    pub fn ask<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Solution>> {
        if !self.eigen_ok {
            return Err(Error::RestartRequired);
        }
        let n = self.params.n;
        let mut batch = Vec::with_capacity(self.params.lambda);
        for _ in 0..self.params.lambda {
            let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = &self.mean + self.sigma * (&self.basis * z.component_mul(&self.scale));
            batch.push(x.as_slice().to_vec());
        }
        Ok(batch)
    }

    /// Applies one weighted mu-selection update.
    ///
    /// `order` lists solution indices best first (`order[0]` is rank 1)
    /// and must be a permutation of `0..lambda`.
    pub fn tell(&mut self, solutions: &[Solution], order: &[usize]) -> Result<()> {
        let p = &self.params;
        if solutions.len() != p.lambda || order.len() != p.lambda {
            return Err(Error::InvalidArgument("batch and ranking must have length lambda"));
        }
        let mut seen = vec![false; p.lambda];
        for &i in order {
            if i >= p.lambda || seen[i] {
                return Err(Error::InvalidArgument("ranking is not a permutation"));
            }
            seen[i] = true;
        }
        for s in solutions {
            if s.len() != p.n {
                return Err(Error::DimensionMismatch { expected: p.n, actual: s.len() });
            }
        }

        let n = p.n;
        let old_mean = self.mean.clone();
        // Normalized displacements of the mu best, best first.
        let selected: Vec<DVector<f64>> = order[..p.mu]
            .iter()
            .map(|&i| (DVector::from_column_slice(&solutions[i]) - &old_mean) / self.sigma)
            .collect();
        let mut y_w = DVector::zeros(n);
        for (w, y) in p.weights.iter().zip(&selected) {
            y_w += *w * y;
        }

        self.mean = &old_mean + self.sigma * &y_w;

        let csn = (p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff).sqrt();
        self.path_sigma = (1.0 - p.c_sigma) * &self.path_sigma + csn * (&self.inv_sqrt * &y_w);
        let ps_norm = self.path_sigma.norm();

        let expected_decay =
            (1.0 - (1.0 - p.c_sigma).powi(2 * (self.generation as i32 + 1))).sqrt();
        let h_sigma = if ps_norm / expected_decay / p.chi_n < 1.4 + 2.0 / (n as f64 + 1.0) {
            1.0
        } else {
            0.0
        };

        let ccn = (p.c_c * (2.0 - p.c_c) * p.mu_eff).sqrt();
        self.path_c = (1.0 - p.c_c) * &self.path_c + h_sigma * ccn * &y_w;

        // Rank-one plus rank-mu covariance update; the (1 - h_sigma) term
        // compensates variance lost when the rank-one path is stalled.
        let delta_h = (1.0 - h_sigma) * p.c_c * (2.0 - p.c_c);
        let mut rank_mu = DMatrix::zeros(n, n);
        for (w, y) in p.weights.iter().zip(&selected) {
            rank_mu += *w * y * y.transpose();
        }
        self.cov = (1.0 - p.c_1 - p.c_mu) * &self.cov
            + p.c_1 * (&self.path_c * self.path_c.transpose() + delta_h * &self.cov)
            + p.c_mu * rank_mu;
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;

        self.sigma *= ((p.c_sigma / p.d_sigma) * (ps_norm / p.chi_n - 1.0)).exp();
        self.generation += 1;

        if self.generation - self.eigen_generation >= p.eigen_interval() {
            self.refresh_eigen();
        }
        Ok(())
    }

    /// True when the strategy has degenerated numerically and should be
    /// re-initialized by the caller: covariance factorization failed,
    /// `sigma^2 * max diag(C)` fell below [`Self::sigma_floor`], the
    /// condition number of C exceeds [`Self::cond_limit`], or the
    /// rank-one covariance update can no longer change C.
    pub fn needs_restart(&self) -> bool {
        if !self.eigen_ok {
            return true;
        }
        let max_diag = self.cov.diagonal().max();
        if self.sigma * self.sigma * max_diag < self.sigma_floor {
            return true;
        }
        let d_max = self.scale.max();
        let d_min = self.scale.min();
        if d_max * d_max > self.cond_limit * d_min * d_min {
            return true;
        }
        // A nonzero evolution path too small to change any diagonal
        // entry means covariance adaptation has stalled. An exactly
        // zero path is an ordinary no-op (the initial state), not
        // stagnation.
        let rank_one_stalled = self.path_c.iter().any(|&p| p != 0.0)
            && (0..self.params.n).all(|i| {
                let c_ii = self.cov[(i, i)];
                c_ii + self.params.c_1 * self.path_c[i] * self.path_c[i] == c_ii
            });
        rank_one_stalled && self.generation > 0
    }

    /// Current distribution mean.
    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    /// Current global step size.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Completed update count.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Covariance before sigma scaling.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Strategy constants (mutable so callers can override defaults
    /// before the run starts).
    pub fn params_mut(&mut self) -> &mut CmaParams {
        &mut self.params
    }

    /// Strategy constants.
    pub fn params(&self) -> &CmaParams {
        &self.params
    }

    fn refresh_eigen(&mut self) {
        let eigen = self.cov.clone().symmetric_eigen();
        if eigen.eigenvalues.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            self.eigen_ok = false;
            self.eigen_generation = self.generation;
            return;
        }
        self.scale = eigen.eigenvalues.map(f64::sqrt);
        self.basis = eigen.eigenvectors;
        let inv = DMatrix::from_diagonal(&self.scale.map(|d| 1.0 / d));
        self.inv_sqrt = &self.basis * inv * self.basis.transpose();
        self.eigen_ok = true;
        self.eigen_generation = self.generation;
    }

    #[cfg(test)]
    pub(crate) fn force_state_for_tests(&mut self, cov: Option<DMatrix<f64>>, sigma: Option<f64>) {
        if let Some(c) = cov {
            self.cov = c;
        }
        if let Some(s) = sigma {
            self.sigma = s;
        }
        self.refresh_eigen();
    }
}
