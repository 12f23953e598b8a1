//! The five diversity-optimization drivers.
//!
//! Four of them steer CMA-ES emitters with different batch rankings:
//! density-descent ranks ascending by a kernel density estimate over a
//! streaming feature buffer, novelty search ranks descending by distance
//! to an unbounded archive, and the two improvement-ranking drivers rank
//! by what an insertion did to a tessellated archive (annealed
//! thresholds, or new-cell-first tiers). The fifth is archive-sampling
//! MAP-Elites with the iso+line variation operator. Every driver funnels
//! all evaluated solutions through one shared passive archive, from
//! which the per-iteration metrics are taken.

use crate::archive::{AddStatus, ElitesArchive, NoveltyArchive, Tessellation};
use crate::buffer::FeatureBuffer;
use crate::cma::{CmaEs, CmaOverrides};
use crate::density::{novelty_score, DensityEstimator, KdeEstimator, Kernel};
use crate::domains::Domain;
use crate::metrics::{coverage, cross_entropy, MetricsSnapshot};
use crate::{Error, Result, Solution};
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Which driver to run, with its specific hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Algorithm {
    DdsKde { bandwidth: f64, kernel: Kernel, buffer_capacity: usize, sigma0: f64 },
    NoveltySearch { k: usize, acceptance_threshold: f64, sigma0: f64, include_batch: bool },
    CmaMae { learning_rate: f64, threshold_min: f64, sigma0: f64 },
    CmaMe { sigma0: f64, restart_patience: usize },
    MapElitesLine { sigma_iso: f64, sigma_line: f64 },
}

/// Scale-independent run parameters shared by every driver.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmConfig {
    pub algorithm: Algorithm,
    pub emitters: usize,
    pub batch_size: usize,
    pub iterations: u64,
    pub seed: u64,
    pub cma_overrides: CmaOverrides,
}

/// Everything one trial produces: the per-iteration metrics trace, the
/// final passive archive, and how many emitter restarts occurred.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub snapshots: Vec<MetricsSnapshot>,
    pub archive: ElitesArchive,
    pub restarts: u64,
}

/// Indices of `scores` from lowest to highest, ties in index order.
pub fn rank_ascending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    order
}

/// Indices of `scores` from highest to lowest, ties in index order.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Iso+line variation: `parent` plus isotropic noise plus noise along
/// the direction toward `other`.
pub fn iso_line_child<R: Rng + ?Sized>(
    parent: &[f64],
    other: &[f64],
    sigma_iso: f64,
    sigma_line: f64,
    rng: &mut R,
) -> Solution {
    let line: f64 = rng.sample(StandardNormal);
    parent
        .iter()
        .zip(other)
        .map(|(&a, &b)| a + sigma_iso * rng.sample::<f64, _>(StandardNormal) + sigma_line * line * (b - a))
        .collect()
}

/// Runs the configured driver against `domain` on a fresh passive
/// archive over `tessellation`.
pub fn run(
    config: &AlgorithmConfig,
    domain: &dyn Domain,
    tessellation: Tessellation,
) -> Result<RunRecord> {
    if config.emitters == 0 {
        return Err(Error::InvalidConfig("at least one emitter is required"));
    }
    if config.iterations == 0 {
        return Err(Error::InvalidConfig("at least one iteration is required"));
    }
    if tessellation.dim() != domain.feature_dim() {
        return Err(Error::InvalidConfig("archive and domain feature dimensions differ"));
    }
    match config.algorithm {
        Algorithm::DdsKde { bandwidth, kernel, buffer_capacity, sigma0 } => {
            run_dds_kde(config, domain, tessellation, bandwidth, kernel, buffer_capacity, sigma0)
        }
        Algorithm::NoveltySearch { k, acceptance_threshold, sigma0, include_batch } => {
            run_novelty_search(config, domain, tessellation, k, acceptance_threshold, sigma0, include_batch)
        }
        Algorithm::CmaMae { learning_rate, threshold_min, sigma0 } => {
            run_cma_mae(config, domain, tessellation, learning_rate, threshold_min, sigma0)
        }
        Algorithm::CmaMe { sigma0, restart_patience } => {
            run_cma_me(config, domain, tessellation, sigma0, restart_patience)
        }
        Algorithm::MapElitesLine { sigma_iso, sigma_line } => {
            run_map_elites_line(config, domain, tessellation, sigma_iso, sigma_line)
        }
    }
}

struct Trial<'a> {
    config: &'a AlgorithmConfig,
    domain: &'a dyn Domain,
    passive: ElitesArchive,
    rng: ChaCha12Rng,
    x0: Solution,
    snapshots: Vec<MetricsSnapshot>,
    evaluations: u64,
    restarts: u64,
}

impl<'a> Trial<'a> {
    fn new(config: &'a AlgorithmConfig, domain: &'a dyn Domain, tessellation: Tessellation) -> Self {
        Self {
            config,
            domain,
            passive: ElitesArchive::new_elitist(tessellation),
            rng: ChaCha12Rng::seed_from_u64(config.seed),
            x0: vec![0.0; domain.solution_dim()],
            snapshots: Vec::with_capacity(config.iterations as usize),
            evaluations: 0,
            restarts: 0,
        }
    }

    fn new_emitter(&mut self, sigma0: f64) -> Result<CmaEs> {
        let mut es = CmaEs::new(&self.x0, sigma0, self.config.batch_size)?;
        self.config.cma_overrides.apply(&mut es);
        Ok(es)
    }

    /// Re-initializes an emitter at a uniformly random archive elite
    /// (or at the origin while the archive is still empty).
    fn restart_emitter(&mut self, sigma0: f64) -> Result<CmaEs> {
        let mean = match self.passive.random_elite(&mut self.rng) {
            Some(elite) => elite.solution.clone(),
            None => self.x0.clone(),
        };
        let mut es = CmaEs::new(&mean, sigma0, self.config.batch_size)?;
        self.config.cma_overrides.apply(&mut es);
        self.restarts += 1;
        Ok(es)
    }

    fn ask(&mut self, emitter: &mut CmaEs, sigma0: f64) -> Result<Vec<Solution>> {
        match emitter.ask(&mut self.rng) {
            Ok(batch) => Ok(batch),
            Err(Error::RestartRequired) => {
                *emitter = self.restart_emitter(sigma0)?;
                emitter.ask(&mut self.rng)
            }
            Err(e) => Err(e),
        }
    }

    fn evaluate_batch(&mut self, batch: &[Solution]) -> Result<Vec<Solution>> {
        let features = batch
            .iter()
            .map(|s| self.domain.evaluate(s))
            .collect::<Result<Vec<_>>>()?;
        self.evaluations += batch.len() as u64;
        Ok(features)
    }

    fn record_iteration(&mut self, iteration: u64) -> Result<()> {
        self.snapshots.push(MetricsSnapshot {
            iteration,
            evaluations: self.evaluations,
            coverage: coverage(&self.passive),
            cross_entropy: cross_entropy(&self.passive)?,
            occupied_cells: self.passive.occupied_cells(),
        });
        Ok(())
    }

    fn finish(self) -> RunRecord {
        RunRecord { snapshots: self.snapshots, archive: self.passive, restarts: self.restarts }
    }
}

fn run_dds_kde(
    config: &AlgorithmConfig,
    domain: &dyn Domain,
    tessellation: Tessellation,
    bandwidth: f64,
    kernel: Kernel,
    buffer_capacity: usize,
    sigma0: f64,
) -> Result<RunRecord> {
    let mut trial = Trial::new(config, domain, tessellation);
    let mut emitters = Vec::with_capacity(config.emitters);
    for _ in 0..config.emitters {
        let emitter = trial.new_emitter(sigma0)?;
        emitters.push(emitter);
    }
    let buffer_seed = trial.rng.gen();
    let mut buffer = FeatureBuffer::new(domain.feature_dim(), buffer_capacity, buffer_seed)?;
    let mut estimator = KdeEstimator::new(domain.feature_dim(), bandwidth, kernel)?;

    for iteration in 1..=config.iterations {
        for emitter in &mut emitters {
            let batch = trial.ask(emitter, sigma0)?;
            let features = trial.evaluate_batch(&batch)?;
            // Densities come from the estimator as refreshed at the end
            // of the previous iteration; before the first refresh every
            // candidate scores 0 and the ranking is the sample order.
            let densities = if estimator.is_ready() {
                features
                    .iter()
                    .map(|y| estimator.query(y))
                    .collect::<Result<Vec<_>>>()?
            } else {
                vec![0.0; features.len()]
            };
            for (solution, feature) in batch.iter().zip(&features) {
                trial.passive.add(solution, feature, domain.objective(solution))?;
                buffer.offer_one(feature);
            }
            let order = rank_ascending(&densities);
            emitter.tell(&batch, &order)?;
            if emitter.needs_restart() {
                *emitter = trial.restart_emitter(sigma0)?;
            }
        }
        estimator.refresh(&buffer);
        trial.record_iteration(iteration)?;
    }
    Ok(trial.finish())
}

fn run_novelty_search(
    config: &AlgorithmConfig,
    domain: &dyn Domain,
    tessellation: Tessellation,
    k: usize,
    acceptance_threshold: f64,
    sigma0: f64,
    include_batch: bool,
) -> Result<RunRecord> {
    let mut trial = Trial::new(config, domain, tessellation);
    let mut emitters = Vec::with_capacity(config.emitters);
    for _ in 0..config.emitters {
        let emitter = trial.new_emitter(sigma0)?;
        emitters.push(emitter);
    }
    let mut novelty_archive = NoveltyArchive::new(domain.feature_dim(), acceptance_threshold, k)?;

    for iteration in 1..=config.iterations {
        for emitter in &mut emitters {
            let batch = trial.ask(emitter, sigma0)?;
            let features = trial.evaluate_batch(&batch)?;
            let ranked = if include_batch {
                None
            } else {
                Some(novelty_archive.rank_batch(&features))
            };
            let novelties: Vec<f64> = match &ranked {
                Some(ranked) => ranked.scores.clone(),
                None => (0..features.len())
                    .map(|i| {
                        let mut reference = novelty_archive.features().clone();
                        for (j, y) in features.iter().enumerate() {
                            if j != i {
                                reference.push(y);
                            }
                        }
                        novelty_score(&features[i], &reference, k)
                    })
                    .collect(),
            };
            let order = rank_descending(&novelties);
            emitter.tell(&batch, &order)?;
            if emitter.needs_restart() {
                *emitter = trial.restart_emitter(sigma0)?;
            }
            match ranked {
                Some(ranked) => {
                    novelty_archive.commit_batch(&ranked, &batch, &features);
                }
                None => {
                    for (solution, feature) in batch.iter().zip(&features) {
                        novelty_archive.try_add(solution, feature);
                    }
                }
            }
            for (solution, feature) in batch.iter().zip(&features) {
                trial.passive.add(solution, feature, domain.objective(solution))?;
            }
        }
        trial.record_iteration(iteration)?;
    }
    Ok(trial.finish())
}

fn run_cma_mae(
    config: &AlgorithmConfig,
    domain: &dyn Domain,
    tessellation: Tessellation,
    learning_rate: f64,
    threshold_min: f64,
    sigma0: f64,
) -> Result<RunRecord> {
    let annealed_tessellation = tessellation.clone();
    let mut trial = Trial::new(config, domain, tessellation);
    let mut emitters = Vec::with_capacity(config.emitters);
    for _ in 0..config.emitters {
        let emitter = trial.new_emitter(sigma0)?;
        emitters.push(emitter);
    }
    let mut annealed =
        ElitesArchive::new_annealed(annealed_tessellation, learning_rate, threshold_min)?;

    for iteration in 1..=config.iterations {
        for emitter in &mut emitters {
            let batch = trial.ask(emitter, sigma0)?;
            let features = trial.evaluate_batch(&batch)?;
            let mut improvements = Vec::with_capacity(batch.len());
            for (solution, feature) in batch.iter().zip(&features) {
                let objective = domain.objective(solution);
                let result = annealed.add(solution, feature, objective)?;
                improvements.push(result.value);
                trial.passive.add(solution, feature, objective)?;
            }
            let order = rank_descending(&improvements);
            emitter.tell(&batch, &order)?;
            if emitter.needs_restart() {
                *emitter = trial.restart_emitter(sigma0)?;
            }
        }
        trial.record_iteration(iteration)?;
    }
    Ok(trial.finish())
}

fn run_cma_me(
    config: &AlgorithmConfig,
    domain: &dyn Domain,
    tessellation: Tessellation,
    sigma0: f64,
    restart_patience: usize,
) -> Result<RunRecord> {
    if restart_patience == 0 {
        return Err(Error::InvalidConfig("restart patience must be positive"));
    }
    let mut trial = Trial::new(config, domain, tessellation);
    let mut emitters = Vec::with_capacity(config.emitters);
    for _ in 0..config.emitters {
        let emitter = trial.new_emitter(sigma0)?;
        emitters.push(emitter);
    }
    let mut stale_batches = vec![0usize; config.emitters];

    for iteration in 1..=config.iterations {
        for (emitter, stale) in emitters.iter_mut().zip(&mut stale_batches) {
            let batch = trial.ask(emitter, sigma0)?;
            let features = trial.evaluate_batch(&batch)?;
            let mut found_new_cell = Vec::with_capacity(batch.len());
            for (solution, feature) in batch.iter().zip(&features) {
                let result = trial.passive.add(solution, feature, domain.objective(solution))?;
                found_new_cell.push(result.status == AddStatus::NewCell);
            }
            // Two tiers: solutions that filled a new cell lead in sample
            // order, everything else follows in sample order.
            let mut order = Vec::with_capacity(batch.len());
            order.extend((0..batch.len()).filter(|&i| found_new_cell[i]));
            order.extend((0..batch.len()).filter(|&i| !found_new_cell[i]));
            emitter.tell(&batch, &order)?;

            if found_new_cell.iter().any(|&n| n) {
                *stale = 0;
            } else {
                *stale += 1;
            }
            if *stale >= restart_patience || emitter.needs_restart() {
                *emitter = trial.restart_emitter(sigma0)?;
                *stale = 0;
            }
        }
        trial.record_iteration(iteration)?;
    }
    Ok(trial.finish())
}

fn run_map_elites_line(
    config: &AlgorithmConfig,
    domain: &dyn Domain,
    tessellation: Tessellation,
    sigma_iso: f64,
    sigma_line: f64,
) -> Result<RunRecord> {
    let mut trial = Trial::new(config, domain, tessellation);
    let per_iteration = config.emitters * config.batch_size;

    for iteration in 1..=config.iterations {
        // Parents come from the archive as it stood when the batch
        // started; all of the batch's children are inserted afterwards.
        let bootstrap = trial.passive.occupied_cells() < 2;
        let mut children = Vec::with_capacity(per_iteration);
        for _ in 0..per_iteration {
            let child = if bootstrap {
                trial
                    .x0
                    .iter()
                    .map(|&v| v + sigma_iso * trial.rng.sample::<f64, _>(StandardNormal))
                    .collect()
            } else {
                let occupied = trial.passive.occupied_cells();
                let first = trial.rng.gen_range(0..occupied);
                let second = if occupied >= 2 {
                    loop {
                        let j = trial.rng.gen_range(0..occupied);
                        if j != first {
                            break j;
                        }
                    }
                } else {
                    first
                };
                let parent = trial.passive.elite_at(first).solution.clone();
                let other = trial.passive.elite_at(second).solution.clone();
                iso_line_child(&parent, &other, sigma_iso, sigma_line, &mut trial.rng)
            };
            children.push(child);
        }
        for child in &children {
            let feature = trial.domain.evaluate(child)?;
            trial.passive.add(child, &feature, trial.domain.objective(child))?;
        }
        trial.evaluations += per_iteration as u64;
        trial.record_iteration(iteration)?;
    }
    Ok(trial.finish())
}
