//! Experiment execution: builds the domain and archive from a resolved
//! configuration, runs seeded trials (parallel by default, one worker
//! per trial), and writes the output directory.
//!
//! A plain run's directory contains exactly one `meta.txt`, one
//! `trial_<i>.csv` per successful trial, one `summary.csv`, per-trial
//! `heatmap_<i>.csv`/`heatmap_<i>.pgm` pairs when the archive is a 2-D
//! grid, and `centroids.csv` when it is a CVT. A bandwidth sweep
//! produces one `h0_<value>` subdirectory per swept value, each with
//! that same layout, plus a top-level `meta.txt`.

use crate::config::{AlgorithmKind, ArchiveKind, DomainKind, RunConfig};
use crate::output;
use anyhow::{anyhow, bail, Context, Result};
use divopt::algorithms::{self, Algorithm, AlgorithmConfig};
use divopt::archive::{CvtTessellation, ElitesArchive, GridTessellation, Tessellation};
use divopt::domains::{ArmRepertoire, Domain, LinearProjection, MazeDomain, MazeWorld, MultiFeatureLp};
use divopt::metrics::MetricsSnapshot;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

/// One finished trial.
#[derive(Debug)]
pub struct TrialOutcome {
    pub index: usize,
    pub seed: u64,
    pub snapshots: Vec<MetricsSnapshot>,
    pub restarts: u64,
    pub duration: Duration,
    pub archive: ElitesArchive,
}

/// One experiment directory's results.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub directory: PathBuf,
    pub trials: Vec<TrialOutcome>,
    /// (trial index, error description) for trials that aborted.
    pub failures: Vec<(usize, String)>,
}

pub fn build_domain(config: &RunConfig) -> Result<Box<dyn Domain>> {
    Ok(match config.domain {
        DomainKind::Lp => Box::new(LinearProjection::new(config.domain_n)?),
        DomainKind::MultiLp => Box::new(MultiFeatureLp::new(config.domain_n, config.domain_m)?),
        DomainKind::Arm => Box::new(ArmRepertoire::new(config.domain_n)?),
        DomainKind::Maze => match &config.maze_file {
            None => Box::new(MazeDomain::bundled()),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading maze layout {}", path.display()))?;
                Box::new(MazeDomain::new(MazeWorld::parse(&text)?))
            }
        },
    })
}

/// Builds the archive tessellation, generating or loading CVT
/// centroids as configured.
pub fn build_tessellation(config: &RunConfig, domain: &dyn Domain) -> Result<Tessellation> {
    let (lower, upper) = match &config.archive_bounds {
        Some((lower, upper)) => (lower.clone(), upper.clone()),
        None => domain.feature_bounds(),
    };
    match config.archive_kind {
        ArchiveKind::Grid => {
            let cells = vec![config.archive_cells; lower.len()];
            Ok(Tessellation::Grid(GridTessellation::new(&lower, &upper, &cells)?))
        }
        ArchiveKind::Cvt => {
            let cvt = match &config.centroids_file {
                Some(path) => {
                    let centroids = output::read_centroids_csv(path)?;
                    if centroids.dim() != lower.len() {
                        bail!(
                            "centroid file has {} columns but the domain has {} features",
                            centroids.dim(),
                            lower.len()
                        );
                    }
                    if centroids.len() != config.archive_cells {
                        bail!(
                            "centroid file has {} rows but archive.cells = {}",
                            centroids.len(),
                            config.archive_cells
                        );
                    }
                    CvtTessellation::from_centroids(centroids)?
                }
                None => CvtTessellation::generate(
                    config.archive_cells,
                    &lower,
                    &upper,
                    config.cvt_samples,
                    config.cvt_iterations,
                    config.cvt_seed,
                )?,
            };
            Ok(Tessellation::Cvt(cvt))
        }
    }
}

/// Feature-space width used to turn a normalized bandwidth into a raw
/// one (widths are identical across dimensions in all four domains).
pub fn feature_width(domain: &dyn Domain) -> f64 {
    let (lower, upper) = domain.feature_bounds();
    upper[0] - lower[0]
}

/// The driver configuration for one trial.
pub fn algorithm_config(config: &RunConfig, trial: usize, bandwidth: f64) -> AlgorithmConfig {
    let algorithm = match config.algorithm {
        AlgorithmKind::DdsKde => Algorithm::DdsKde {
            bandwidth,
            kernel: config.kernel,
            buffer_capacity: config.buffer_capacity,
            sigma0: config.sigma0,
        },
        AlgorithmKind::Ns => Algorithm::NoveltySearch {
            k: config.ns_k,
            acceptance_threshold: config.ns_threshold,
            sigma0: config.sigma0,
            include_batch: config.ns_include_batch,
        },
        AlgorithmKind::CmaMae => Algorithm::CmaMae {
            learning_rate: config.mae_learning_rate,
            threshold_min: config.mae_threshold_min,
            sigma0: config.sigma0,
        },
        AlgorithmKind::CmaMe => {
            Algorithm::CmaMe { sigma0: config.sigma0, restart_patience: config.me_patience }
        }
        AlgorithmKind::MapElitesLine => Algorithm::MapElitesLine {
            sigma_iso: config.sigma_iso,
            sigma_line: config.sigma_line,
        },
    };
    AlgorithmConfig {
        algorithm,
        emitters: config.emitters,
        batch_size: config.batch_size,
        iterations: config.iterations,
        seed: config.seed + trial as u64,
        cma_overrides: config.cma.clone(),
    }
}

/// Runs the experiment described by `config`. Without a sweep this
/// fills `config.output` directly and returns one outcome; with a
/// sweep it returns one outcome per swept bandwidth.
pub fn run_experiment(config: &RunConfig) -> Result<Vec<ExperimentOutcome>> {
    let domain = build_domain(config)?;
    match &config.sweep {
        None => {
            let outcome =
                run_into(config, domain.as_ref(), &config.output, config.bandwidth, None)?;
            Ok(vec![outcome])
        }
        Some(values) => {
            prepare_dir(&config.output)?;
            let width = feature_width(domain.as_ref());
            let mut meta = config.echo();
            meta.push_str("# sweep subdirectories:\n");
            let mut outcomes = Vec::with_capacity(values.len());
            for &h0 in values {
                let sub = config.output.join(format!("h0_{h0}"));
                let _ = writeln!(meta, "# h0 = {h0} -> {}", sub.display());
                outcomes.push(run_into(config, domain.as_ref(), &sub, h0 * width, Some(h0))?);
            }
            fs::write(config.output.join("meta.txt"), meta)
                .with_context(|| format!("writing metadata in {}", config.output.display()))?;
            Ok(outcomes)
        }
    }
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    if fs::read_dir(dir)?.next().is_some() {
        bail!("output directory {} is not empty", dir.display());
    }
    Ok(())
}

/// Runs all trials of one (sub-)experiment into `dir` using `bandwidth`
/// as the raw kernel bandwidth.
fn run_into(
    config: &RunConfig,
    domain: &dyn Domain,
    dir: &Path,
    bandwidth: f64,
    swept_h0: Option<f64>,
) -> Result<ExperimentOutcome> {
    prepare_dir(dir)?;
    let tessellation = build_tessellation(config, domain)?;
    if let Tessellation::Cvt(cvt) = &tessellation {
        output::write_centroids_csv(&dir.join("centroids.csv"), cvt.centroids())?;
    }
    let is_2d_grid = matches!(&tessellation, Tessellation::Grid(g) if g.dim() == 2);

    let run_trial = |index: usize| -> std::result::Result<TrialOutcome, String> {
        let trial_config = algorithm_config(config, index, bandwidth);
        let started = Instant::now();
        let record = algorithms::run(&trial_config, domain, tessellation.clone())
            .map_err(|e| format!("{e:?}"))?;
        let duration = started.elapsed();
        let csv = output::trial_csv(&record.snapshots);
        fs::write(dir.join(format!("trial_{index}.csv")), csv).map_err(|e| e.to_string())?;
        if is_2d_grid {
            output::export_heatmap(
                &record.archive,
                &dir.join(format!("heatmap_{index}.csv")),
                &dir.join(format!("heatmap_{index}.pgm")),
            )
            .map_err(|e| e.to_string())?;
        }
        Ok(TrialOutcome {
            index,
            seed: trial_config.seed,
            snapshots: record.snapshots,
            restarts: record.restarts,
            duration,
            archive: record.archive,
        })
    };

    let results: Vec<std::result::Result<TrialOutcome, String>> = if config.serial {
        (0..config.trials).map(run_trial).collect()
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> =
                (0..config.trials).map(|i| scope.spawn(move || run_trial(i))).collect();
            handles.into_iter().map(|h| h.join().expect("trial worker panicked")).collect()
        })
    };

    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for (index, result) in results.into_iter().enumerate() {
        match result {
            Ok(outcome) => trials.push(outcome),
            Err(message) => failures.push((index, message)),
        }
    }
    if trials.is_empty() {
        bail!("all {} trials failed; first error: {}", config.trials, failures[0].1);
    }

    let finals: Vec<MetricsSnapshot> =
        trials.iter().map(|t| t.snapshots.last().expect("at least one iteration").clone()).collect();
    output::write_summary_csv(&dir.join("summary.csv"), &finals)?;
    fs::write(dir.join("meta.txt"), render_meta(config, dir, bandwidth, swept_h0, &trials, &failures))
        .with_context(|| format!("writing metadata in {}", dir.display()))?;

    Ok(ExperimentOutcome { directory: dir.to_path_buf(), trials, failures })
}

fn render_meta(
    config: &RunConfig,
    dir: &Path,
    bandwidth: f64,
    swept_h0: Option<f64>,
    trials: &[TrialOutcome],
    failures: &[(usize, String)],
) -> String {
    // The echo must reproduce this exact sub-experiment, so the swept
    // bandwidth replaces the sweep list and the directory replaces the
    // parent output path.
    let mut echoed = config.clone();
    echoed.bandwidth = bandwidth;
    echoed.sweep = None;
    echoed.output = dir.to_path_buf();
    if config.archive_kind == ArchiveKind::Cvt {
        echoed.centroids_file = Some(dir.join("centroids.csv"));
    }

    let mut out = echoed.echo();
    out.push_str("# context:\n");
    if let Some(h0) = swept_h0 {
        let _ = writeln!(out, "# normalized bandwidth h0 = {h0}");
    }
    let _ = writeln!(
        out,
        "# cross-entropy convention: unvisited cells count as one visit; \
         denominator = total visits + number of unvisited cells"
    );
    let _ = writeln!(out, "# trial seeds: base {} + trial index", config.seed);
    for t in trials {
        let _ = writeln!(
            out,
            "# trial {}: seed = {}, duration_s = {}, emitter_restarts = {}, status = ok",
            t.index,
            t.seed,
            t.duration.as_secs_f64(),
            t.restarts
        );
    }
    for (index, message) in failures {
        let _ = writeln!(out, "# trial {index}: status = failed, error = {message}");
    }
    out
}

/// Convenience wrapper for tests and callers that already have the
/// archive in hand: runs one seeded trial without touching the
/// filesystem.
pub fn run_single_trial(
    config: &RunConfig,
    domain: &dyn Domain,
    tessellation: Tessellation,
    trial: usize,
) -> Result<algorithms::RunRecord> {
    let trial_config = algorithm_config(config, trial, config.bandwidth);
    algorithms::run(&trial_config, domain, tessellation).map_err(|e| anyhow!("{e:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config_str, Overrides};

    fn config_from(text: &str, dir: &Path) -> RunConfig {
        let mut map = parse_config_str(text).unwrap();
        map.insert("output".into(), dir.display().to_string());
        RunConfig::resolve(&map, &Overrides::default()).unwrap()
    }

    const SMALL_LP: &str = "domain = lp\ndomain.n = 10\nalgorithm = dds_kde\ntrials = 2\n\
                            seed = 3\niterations = 10\nemitters = 2\nbatch_size = 4\n\
                            archive.cells = 10\ndensity.bandwidth = 2.56\nbuffer.capacity = 200\n";

    #[test]
    fn run_writes_exactly_the_documented_files() {
        let dir = tempfile::tempdir().unwrap();
        let config = config_from(SMALL_LP, dir.path());
        let outcomes = run_experiment(&config).unwrap();
        assert_eq!(outcomes.len(), 1);
        assert_eq!(outcomes[0].trials.len(), 2);
        assert!(outcomes[0].failures.is_empty());

        let mut names: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(
            names,
            vec![
                "heatmap_0.csv",
                "heatmap_0.pgm",
                "heatmap_1.csv",
                "heatmap_1.pgm",
                "meta.txt",
                "summary.csv",
                "trial_0.csv",
                "trial_1.csv",
            ]
        );

        let csv = fs::read_to_string(dir.path().join("trial_0.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 11);
        assert_eq!(lines[0], output::TRIAL_CSV_HEADER);
        let coverages: Vec<f64> = lines[1..]
            .iter()
            .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
            .collect();
        assert!(coverages.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn serial_and_parallel_runs_write_identical_bytes() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let config_a = config_from(SMALL_LP, dir_a.path());
        let mut config_b = config_from(SMALL_LP, dir_b.path());
        config_b.serial = true;
        run_experiment(&config_a).unwrap();
        run_experiment(&config_b).unwrap();
        for name in ["trial_0.csv", "trial_1.csv", "summary.csv", "heatmap_1.csv"] {
            let a = fs::read(dir_a.path().join(name)).unwrap();
            let b = fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between parallel and serial runs");
        }
    }

    #[test]
    fn nonempty_output_directory_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("existing"), "x").unwrap();
        let config = config_from(SMALL_LP, dir.path());
        assert!(run_experiment(&config).is_err());
    }

    #[test]
    fn metadata_echo_replays_the_run_identically() {
        let dir = tempfile::tempdir().unwrap();
        let config = config_from(SMALL_LP, dir.path());
        run_experiment(&config).unwrap();

        let meta = fs::read_to_string(dir.path().join("meta.txt")).unwrap();
        let mut replay_map = parse_config_str(&meta).unwrap();
        let replay_dir = tempfile::tempdir().unwrap();
        replay_map.insert("output".into(), replay_dir.path().display().to_string());
        let replay = RunConfig::resolve(&replay_map, &Overrides::default()).unwrap();
        run_experiment(&replay).unwrap();

        let original = fs::read(dir.path().join("trial_1.csv")).unwrap();
        let replayed = fs::read(replay_dir.path().join("trial_1.csv")).unwrap();
        assert_eq!(original, replayed);
    }

    #[test]
    fn cvt_runs_share_centroids_and_export_them() {
        let dir = tempfile::tempdir().unwrap();
        let text = "domain = multi_lp\ndomain.n = 10\ndomain.m = 5\ntrials = 1\nseed = 1\n\
                    iterations = 5\nemitters = 2\nbatch_size = 4\narchive.cells = 40\n\
                    archive.cvt_samples = 2000\narchive.cvt_iterations = 5\narchive.cvt_seed = 8\n\
                    density.bandwidth = 1.0\nbuffer.capacity = 100\n";
        let config = config_from(text, dir.path());
        let outcomes = run_experiment(&config).unwrap();
        assert_eq!(outcomes[0].trials[0].archive.cell_count(), 40);

        let centroids = output::read_centroids_csv(&dir.path().join("centroids.csv")).unwrap();
        assert_eq!((centroids.len(), centroids.dim()), (40, 5));

        let names: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert!(!names.iter().any(|n| n.contains("heatmap")));

        // Re-running against the exported centroid file reproduces the
        // identical tessellation and therefore identical metrics.
        let reload_dir = tempfile::tempdir().unwrap();
        let mut reload = config_from(text, reload_dir.path());
        reload.centroids_file = Some(dir.path().join("centroids.csv"));
        let reloaded = run_experiment(&reload).unwrap();
        assert_eq!(
            outcomes[0].trials[0].snapshots, reloaded[0].trials[0].snapshots,
            "imported centroids changed the run"
        );
    }

    #[test]
    fn bandwidth_sweep_builds_one_subdirectory_per_value() {
        let dir = tempfile::tempdir().unwrap();
        let text = "domain = lp\ndomain.n = 10\ntrials = 1\nseed = 2\niterations = 8\n\
                    emitters = 2\nbatch_size = 4\narchive.cells = 10\nbuffer.capacity = 100\n\
                    sweep = 0.05,1\n";
        let config = config_from(text, dir.path());
        let outcomes = run_experiment(&config).unwrap();
        assert_eq!(outcomes.len(), 2);
        assert!(dir.path().join("h0_0.05/trial_0.csv").exists());
        assert!(dir.path().join("h0_1/trial_0.csv").exists());
        assert!(dir.path().join("meta.txt").exists());

        let sub_meta = fs::read_to_string(dir.path().join("h0_0.05/meta.txt")).unwrap();
        let map = parse_config_str(&sub_meta).unwrap();
        let width = 5.12 * 10.0;
        let expected = 0.05 * width;
        assert_eq!(map.get("density.bandwidth").unwrap(), &expected.to_string());
        assert!(map.get("sweep").is_none());
    }

    #[test]
    fn maze_defaults_run_against_the_bundled_layout() {
        let dir = tempfile::tempdir().unwrap();
        let text = "domain = maze\ntrials = 1\nseed = 5\niterations = 4\nemitters = 2\n\
                    batch_size = 4\narchive.cells = 8\ndensity.bandwidth = 0.01\n\
                    buffer.capacity = 100\n";
        let config = config_from(text, dir.path());
        let outcomes = run_experiment(&config).unwrap();
        let archive = &outcomes[0].trials[0].archive;
        for (_, elite) in archive.elites() {
            assert!(elite.feature.iter().all(|&c| (0.0..=1.0).contains(&c)));
        }
    }
}
