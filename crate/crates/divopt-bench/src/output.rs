//! File formats written by the experiment runner: per-trial metric
//! CSVs, the cross-trial summary, occupancy heatmaps (CSV + binary
//! PGM), CVT centroid CSVs, and the metadata echo.
//!
//! All numbers are formatted with Rust's shortest round-trip `Display`
//! for `f64`, so re-reading a file reproduces the exact bit pattern.

use anyhow::{anyhow, bail, Context, Result};
use divopt::archive::{ElitesArchive, Tessellation};
use divopt::metrics::{summarize, MetricsSnapshot};
use divopt::{Error as LibError, FeatureSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

/// Fixed column schema of every per-trial metrics CSV.
pub const TRIAL_CSV_HEADER: &str = "iteration,evaluations,coverage,cross_entropy,occupied_cells";

/// Renders the per-iteration metrics trace as CSV text.
pub fn trial_csv(snapshots: &[MetricsSnapshot]) -> String {
    let mut out = String::with_capacity(snapshots.len() * 48 + 64);
    out.push_str(TRIAL_CSV_HEADER);
    out.push('\n');
    for s in snapshots {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.iteration, s.evaluations, s.coverage, s.cross_entropy, s.occupied_cells
        );
    }
    out
}

/// Writes the cross-trial summary: mean and standard error of each
/// final-iteration metric over the successful trials.
pub fn write_summary_csv(path: &Path, finals: &[MetricsSnapshot]) -> Result<()> {
    let mut out = String::from("metric,mean,sem,trials\n");
    let columns: [(&str, Vec<f64>); 3] = [
        ("coverage", finals.iter().map(|s| s.coverage).collect()),
        ("cross_entropy", finals.iter().map(|s| s.cross_entropy).collect()),
        ("occupied_cells", finals.iter().map(|s| s.occupied_cells as f64).collect()),
    ];
    for (name, values) in columns {
        let summary = summarize(&values).map_err(|e| anyhow!("summarizing {name}: {e:?}"))?;
        let _ = writeln!(out, "{name},{},{},{}", summary.mean, summary.sem, summary.trials);
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Writes the occupancy of a 2-D grid archive as an l-row CSV
/// (`cell_x,cell_y,occupied,visit_count`) and a binary PGM image
/// (occupied cells white, empty cells black; y grows upward).
pub fn export_heatmap(archive: &ElitesArchive, csv_path: &Path, pgm_path: &Path) -> Result<()> {
    let grid = match archive.tessellation() {
        Tessellation::Grid(g) if g.dim() == 2 => g,
        _ => {
            return Err(anyhow!(LibError::UnsupportedExport(
                "heatmaps need a 2-D grid archive"
            )))
        }
    };
    let cells = grid.cells_per_dim();
    let (nx, ny) = (cells[0], cells[1]);
    let visits = archive.visit_counts();
    let mut occupied = vec![false; archive.cell_count()];
    for (cell, _) in archive.elites() {
        occupied[cell] = true;
    }

    let mut csv = String::with_capacity(archive.cell_count() * 12 + 40);
    csv.push_str("cell_x,cell_y,occupied,visit_count\n");
    for index in 0..archive.cell_count() {
        let (x, y) = (index / ny, index % ny);
        let _ = writeln!(csv, "{x},{y},{},{}", u8::from(occupied[index]), visits[index]);
    }
    fs::write(csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;

    let mut pgm = Vec::with_capacity(nx * ny + 32);
    pgm.extend_from_slice(format!("P5\n{nx} {ny}\n255\n").as_bytes());
    for row in (0..ny).rev() {
        for col in 0..nx {
            pgm.push(if occupied[col * ny + row] { 255 } else { 0 });
        }
    }
    let mut file =
        fs::File::create(pgm_path).with_context(|| format!("creating {}", pgm_path.display()))?;
    file.write_all(&pgm).with_context(|| format!("writing {}", pgm_path.display()))
}

/// Writes CVT centroids as bare CSV, one row per centroid.
pub fn write_centroids_csv(path: &Path, centroids: &FeatureSet) -> Result<()> {
    let mut out = String::with_capacity(centroids.len() * centroids.dim() * 20);
    for point in centroids.iter() {
        let row: Vec<String> = point.iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Reads centroids back from [`write_centroids_csv`] output.
pub fn read_centroids_csv(path: &Path) -> Result<FeatureSet> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading centroids from {}", path.display()))?;
    let mut set: Option<FeatureSet> = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| anyhow!("{}:{}: {e}", path.display(), lineno + 1))?;
        let set = set.get_or_insert_with(|| FeatureSet::new(row.len()));
        if row.len() != set.dim() {
            bail!("{}:{}: ragged row", path.display(), lineno + 1);
        }
        set.push(&row);
    }
    set.ok_or_else(|| anyhow!("{}: no centroids found", path.display()))
}
