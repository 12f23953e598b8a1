use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;
use divopt::metrics::summarize;
use divopt_bench::config::{parse_config_str, Overrides, RunConfig};
use divopt_bench::runner::{run_experiment, ExperimentOutcome};

/// Diversity-optimization benchmark runner.
///
/// Executes seeded trials of one algorithm on one benchmark domain and
/// writes per-iteration CSV logs, a summary table, heatmaps, and a
/// re-runnable metadata echo into the output directory.
#[derive(Parser, Debug)]
#[command(name = "divopt-bench", version, about)]
struct Cli {
    /// Plain-text `key = value` config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Benchmark domain: lp, multi_lp, arm, or maze.
    #[arg(long)]
    domain: Option<String>,

    /// Algorithm: dds_kde, ns, cma_mae, cma_me, or map_elites_line.
    #[arg(long)]
    algorithm: Option<String>,

    /// Number of independent trials.
    #[arg(long)]
    trials: Option<usize>,

    /// Base RNG seed; trial i runs with seed + i.
    #[arg(long)]
    seed: Option<u64>,

    /// Iterations per trial.
    #[arg(long)]
    iterations: Option<u64>,

    /// Concurrent CMA-ES emitters per algorithm instance.
    #[arg(long)]
    emitters: Option<usize>,

    /// Samples drawn per emitter per iteration.
    #[arg(long)]
    batch_size: Option<usize>,

    /// Kernel bandwidth in feature units (dds_kde only).
    #[arg(long)]
    bandwidth: Option<f64>,

    /// Comma-separated normalized bandwidths h0 in (0, 1]; runs one
    /// sub-experiment per value (dds_kde only).
    #[arg(long)]
    sweep: Option<String>,

    /// Output directory; must be empty or absent.
    #[arg(long)]
    output: Option<PathBuf>,

    /// Run trials sequentially instead of one thread per trial.
    #[arg(long)]
    serial: bool,
}

fn main() -> Result<()> {
    let cli = Cli::parse();

    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            parse_config_str(&text)?
        }
        None => BTreeMap::new(),
    };

    let overrides = Overrides {
        domain: cli.domain,
        algorithm: cli.algorithm,
        trials: cli.trials,
        seed: cli.seed,
        iterations: cli.iterations,
        emitters: cli.emitters,
        batch_size: cli.batch_size,
        bandwidth: cli.bandwidth,
        sweep: cli.sweep,
        output: cli.output,
        serial: cli.serial,
    };

    let config = RunConfig::resolve(&file, &overrides)?;
    println!(
        "{} / {} | {} trials x {} iterations, base seed {}",
        config.domain.name(),
        config.algorithm.name(),
        config.trials,
        config.iterations,
        config.seed,
    );

    let outcomes = run_experiment(&config)?;
    for outcome in &outcomes {
        report(outcome);
    }
    Ok(())
}

fn report(outcome: &ExperimentOutcome) {
    println!("\nresults in {}", outcome.directory.display());
    let mut coverages = Vec::new();
    let mut entropies = Vec::new();
    for trial in &outcome.trials {
        let last = trial
            .snapshots
            .last()
            .expect("completed trials log at least one iteration");
        coverages.push(last.coverage);
        entropies.push(last.cross_entropy);
        println!(
            "  trial {} (seed {}): coverage {:.4}, cross-entropy {:.4}, \
             {} cells, {} restarts, {:.1}s",
            trial.index,
            trial.seed,
            last.coverage,
            last.cross_entropy,
            last.occupied_cells,
            trial.restarts,
            trial.duration.as_secs_f64(),
        );
    }
    for (index, error) in &outcome.failures {
        println!("  trial {index} FAILED: {error}");
    }
    if let (Ok(cov), Ok(ce)) = (summarize(&coverages), summarize(&entropies)) {
        println!(
            "  mean coverage {:.4} +/- {:.4}, mean cross-entropy {:.4} +/- {:.4} ({} trials)",
            cov.mean, cov.sem, ce.mean, ce.sem, cov.trials,
        );
    }
}
