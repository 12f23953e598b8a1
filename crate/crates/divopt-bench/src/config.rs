//! Experiment configuration: a flat `key = value` file format, CLI
//! overrides, and per-domain hyperparameter defaults.
//!
//! Resolution order is defaults, then config file, then command-line
//! flags. The resolved configuration is echoed into every run's
//! metadata in the same `key = value` grammar, so a metadata file can
//! be replayed as a config file.

use anyhow::{anyhow, bail, Context, Result};
use divopt::cma::CmaOverrides;
use divopt::density::Kernel;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Lp,
    MultiLp,
    Arm,
    Maze,
}

impl DomainKind {
    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Lp => "lp",
            DomainKind::MultiLp => "multi_lp",
            DomainKind::Arm => "arm",
            DomainKind::Maze => "maze",
        }
    }

    fn parse(token: &str) -> Result<Self> {
        match token {
            "lp" => Ok(DomainKind::Lp),
            "multi_lp" => Ok(DomainKind::MultiLp),
            "arm" => Ok(DomainKind::Arm),
            "maze" => Ok(DomainKind::Maze),
            other => bail!("unknown domain {other:?} (expected lp | multi_lp | arm | maze)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    DdsKde,
    Ns,
    CmaMae,
    CmaMe,
    MapElitesLine,
}

impl AlgorithmKind {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::DdsKde => "dds_kde",
            AlgorithmKind::Ns => "ns",
            AlgorithmKind::CmaMae => "cma_mae",
            AlgorithmKind::CmaMe => "cma_me",
            AlgorithmKind::MapElitesLine => "map_elites_line",
        }
    }

    fn parse(token: &str) -> Result<Self> {
        match token {
            "dds_kde" => Ok(AlgorithmKind::DdsKde),
            "ns" => Ok(AlgorithmKind::Ns),
            "cma_mae" => Ok(AlgorithmKind::CmaMae),
            "cma_me" => Ok(AlgorithmKind::CmaMe),
            "map_elites_line" => Ok(AlgorithmKind::MapElitesLine),
            other => bail!(
                "unknown algorithm {other:?} (expected dds_kde | ns | cma_mae | cma_me | map_elites_line)"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchiveKind {
    Grid,
    Cvt,
}

impl ArchiveKind {
    pub fn name(self) -> &'static str {
        match self {
            ArchiveKind::Grid => "grid",
            ArchiveKind::Cvt => "cvt",
        }
    }

    fn parse(token: &str) -> Result<Self> {
        match token {
            "grid" => Ok(ArchiveKind::Grid),
            "cvt" => Ok(ArchiveKind::Cvt),
            other => bail!("unknown archive kind {other:?} (expected grid | cvt)"),
        }
    }
}

/// Command-line overrides; every field is optional and wins over the
/// config file when present.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub domain: Option<String>,
    pub algorithm: Option<String>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub iterations: Option<u64>,
    pub emitters: Option<usize>,
    pub batch_size: Option<usize>,
    pub bandwidth: Option<f64>,
    pub sweep: Option<String>,
    pub output: Option<PathBuf>,
    pub serial: bool,
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: DomainKind,
    pub domain_n: usize,
    pub domain_m: usize,
    pub maze_file: Option<PathBuf>,
    pub algorithm: AlgorithmKind,
    pub archive_kind: ArchiveKind,
    pub archive_cells: usize,
    pub archive_bounds: Option<(Vec<f64>, Vec<f64>)>,
    pub cvt_samples: usize,
    pub cvt_iterations: usize,
    pub cvt_seed: u64,
    pub centroids_file: Option<PathBuf>,
    pub trials: usize,
    pub seed: u64,
    pub iterations: u64,
    pub emitters: usize,
    pub batch_size: usize,
    pub sigma0: f64,
    pub bandwidth: f64,
    pub kernel: Kernel,
    pub buffer_capacity: usize,
    pub ns_k: usize,
    pub ns_threshold: f64,
    pub ns_include_batch: bool,
    pub mae_learning_rate: f64,
    pub mae_threshold_min: f64,
    pub me_patience: usize,
    pub sigma_iso: f64,
    pub sigma_line: f64,
    pub cma: CmaOverrides,
    pub sweep: Option<Vec<f64>>,
    pub output: PathBuf,
    pub serial: bool,
}

/// Parses the flat config format: one `key = value` per line, `#`
/// comments, duplicate keys resolved last-wins.
pub fn parse_config_str(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`, got {raw:?}", lineno + 1))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            bail!("line {}: empty key or value in {raw:?}", lineno + 1);
        }
        map.insert(key.to_string(), value.to_string());
    }
    Ok(map)
}

pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    parse_config_str(&text)
}

const KNOWN_KEYS: &[&str] = &[
    "domain",
    "domain.n",
    "domain.m",
    "domain.maze_file",
    "algorithm",
    "archive.kind",
    "archive.dims",
    "archive.cells",
    "archive.bounds",
    "archive.cvt_samples",
    "archive.cvt_iterations",
    "archive.cvt_seed",
    "archive.centroids_file",
    "trials",
    "seed",
    "iterations",
    "emitters",
    "batch_size",
    "sigma0",
    "density.kernel",
    "density.bandwidth",
    "buffer.capacity",
    "ns.k",
    "ns.threshold",
    "ns.include_batch",
    "cma_mae.learning_rate",
    "cma_mae.threshold_min",
    "cma_me.patience",
    "map_elites.sigma_iso",
    "map_elites.sigma_line",
    "cma.c_sigma",
    "cma.d_sigma",
    "cma.c_c",
    "cma.c_1",
    "cma.c_mu",
    "cma.sigma_floor",
    "cma.cond_limit",
    "sweep",
    "output",
    "serial",
];

struct Table1Defaults {
    sigma0: f64,
    bandwidth: f64,
    ns_threshold: f64,
    sigma_iso: f64,
}

/// Per-domain hyperparameter defaults for each algorithm.
fn defaults_for(domain: DomainKind) -> Table1Defaults {
    match domain {
        DomainKind::Lp => {
            Table1Defaults { sigma0: 1.5, bandwidth: 25.6, ns_threshold: 21.504, sigma_iso: 0.5 }
        }
        DomainKind::Arm => {
            Table1Defaults { sigma0: 0.5, bandwidth: 10.0, ns_threshold: 8.4, sigma_iso: 0.1 }
        }
        DomainKind::Maze => {
            Table1Defaults { sigma0: 1.5, bandwidth: 0.01, ns_threshold: 0.042, sigma_iso: 0.1 }
        }
        DomainKind::MultiLp => {
            Table1Defaults { sigma0: 1.5, bandwidth: 2.56, ns_threshold: 2.1504, sigma_iso: 0.5 }
        }
    }
}

fn default_sigma0(domain: DomainKind, algorithm: AlgorithmKind) -> f64 {
    match algorithm {
        AlgorithmKind::DdsKde => defaults_for(domain).sigma0,
        AlgorithmKind::Ns => 0.5,
        AlgorithmKind::CmaMae | AlgorithmKind::CmaMe => {
            if domain == DomainKind::Arm {
                0.2
            } else {
                0.5
            }
        }
        AlgorithmKind::MapElitesLine => defaults_for(domain).sigma_iso,
    }
}

fn parse_num<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<T>()
            .map(Some)
            .map_err(|e| anyhow!("config key {key}: cannot parse {v:?}: {e}")),
    }
}

fn parse_bool(map: &BTreeMap<String, String>, key: &str) -> Result<Option<bool>> {
    match map.get(key).map(String::as_str) {
        None => Ok(None),
        Some("true") => Ok(Some(true)),
        Some("false") => Ok(Some(false)),
        Some(v) => bail!("config key {key}: expected true or false, got {v:?}"),
    }
}

fn parse_float_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| anyhow!("{what}: cannot parse {:?}: {e}", t.trim()))
        })
        .collect()
}

impl RunConfig {
    /// Builds the final configuration from an optional config-file map
    /// and CLI overrides, applying per-domain defaults for anything
    /// left unset, then validates it.
    pub fn resolve(file: &BTreeMap<String, String>, cli: &Overrides) -> Result<Self> {
        if let Some(key) = file.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            bail!("unknown config key {key:?}");
        }

        let domain = match cli.domain.as_deref().or(file.get("domain").map(String::as_str)) {
            Some(token) => DomainKind::parse(token)?,
            None => DomainKind::Lp,
        };
        let algorithm =
            match cli.algorithm.as_deref().or(file.get("algorithm").map(String::as_str)) {
                Some(token) => AlgorithmKind::parse(token)?,
                None => AlgorithmKind::DdsKde,
            };
        let table = defaults_for(domain);

        let domain_n = parse_num(file, "domain.n")?.unwrap_or(match domain {
            DomainKind::Maze => 66,
            _ => 100,
        });
        let domain_m = parse_num(file, "domain.m")?.unwrap_or(10);
        let maze_file = file.get("domain.maze_file").map(PathBuf::from);

        let archive_kind = match file.get("archive.kind") {
            Some(token) => ArchiveKind::parse(token)?,
            None => match domain {
                DomainKind::MultiLp => ArchiveKind::Cvt,
                _ => ArchiveKind::Grid,
            },
        };
        let archive_cells = parse_num(file, "archive.cells")?.unwrap_or(match archive_kind {
            ArchiveKind::Grid => 100,
            ArchiveKind::Cvt => 10_000,
        });
        let archive_bounds = match file.get("archive.bounds") {
            None => None,
            Some(text) => {
                let flat = parse_float_list(text, "archive.bounds")?;
                if flat.len() % 2 != 0 || flat.is_empty() {
                    bail!("archive.bounds: expected lower,upper pairs, got {} values", flat.len());
                }
                let (lower, upper): (Vec<f64>, Vec<f64>) =
                    flat.chunks(2).map(|pair| (pair[0], pair[1])).unzip();
                Some((lower, upper))
            }
        };

        let trials = cli
            .trials
            .or(parse_num(file, "trials")?)
            .unwrap_or(if domain == DomainKind::Maze { 3 } else { 10 });
        let seed = cli.seed.or(parse_num(file, "seed")?).unwrap_or(0);
        let iterations = cli.iterations.or(parse_num(file, "iterations")?).unwrap_or(5_000);
        let emitters = cli.emitters.or(parse_num(file, "emitters")?).unwrap_or(15);
        let batch_size = cli.batch_size.or(parse_num(file, "batch_size")?).unwrap_or(36);

        let kernel = match file.get("density.kernel").map(String::as_str) {
            None | Some("gaussian") => Kernel::Gaussian,
            Some("triangular") => Kernel::Triangular,
            Some(other) => bail!("unknown kernel {other:?} (expected gaussian | triangular)"),
        };
        let bandwidth = cli
            .bandwidth
            .or(parse_num(file, "density.bandwidth")?)
            .unwrap_or(table.bandwidth);

        let sweep_text = cli.sweep.as_deref().or(file.get("sweep").map(String::as_str));
        let sweep = match sweep_text {
            None => None,
            Some(text) => Some(parse_float_list(text, "sweep")?),
        };

        let output = match cli.output.clone().or(file.get("output").map(PathBuf::from)) {
            Some(dir) => dir,
            None => bail!("an output directory is required (--output or `output = <dir>`)"),
        };

        let cma = CmaOverrides {
            c_sigma: parse_num(file, "cma.c_sigma")?,
            d_sigma: parse_num(file, "cma.d_sigma")?,
            c_c: parse_num(file, "cma.c_c")?,
            c_1: parse_num(file, "cma.c_1")?,
            c_mu: parse_num(file, "cma.c_mu")?,
            sigma_floor: parse_num(file, "cma.sigma_floor")?,
            cond_limit: parse_num(file, "cma.cond_limit")?,
        };

        let config = RunConfig {
            domain,
            domain_n,
            domain_m,
            maze_file,
            algorithm,
            archive_kind,
            archive_cells,
            archive_bounds,
            cvt_samples: parse_num(file, "archive.cvt_samples")?.unwrap_or(100_000),
            cvt_iterations: parse_num(file, "archive.cvt_iterations")?.unwrap_or(50),
            cvt_seed: parse_num(file, "archive.cvt_seed")?.unwrap_or(1),
            centroids_file: file.get("archive.centroids_file").map(PathBuf::from),
            trials,
            seed,
            iterations,
            emitters,
            batch_size,
            sigma0: parse_num(file, "sigma0")?.unwrap_or(default_sigma0(domain, algorithm)),
            bandwidth,
            kernel,
            buffer_capacity: parse_num(file, "buffer.capacity")?.unwrap_or(10_000),
            ns_k: parse_num(file, "ns.k")?.unwrap_or(100),
            ns_threshold: parse_num(file, "ns.threshold")?.unwrap_or(table.ns_threshold),
            ns_include_batch: parse_bool(file, "ns.include_batch")?.unwrap_or(false),
            mae_learning_rate: parse_num(file, "cma_mae.learning_rate")?.unwrap_or(0.01),
            mae_threshold_min: parse_num(file, "cma_mae.threshold_min")?.unwrap_or(0.0),
            me_patience: parse_num(file, "cma_me.patience")?.unwrap_or(5),
            sigma_iso: parse_num(file, "map_elites.sigma_iso")?.unwrap_or(table.sigma_iso),
            sigma_line: parse_num(file, "map_elites.sigma_line")?.unwrap_or(0.2),
            cma,
            sweep,
            output,
            serial: cli.serial || parse_bool(file, "serial")?.unwrap_or(false),
        };
        if let Some(dims) = parse_num::<usize>(file, "archive.dims")? {
            if dims != config.feature_dim() {
                bail!(
                    "archive.dims = {dims} disagrees with the domain's {} feature dimensions",
                    config.feature_dim()
                );
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn feature_dim(&self) -> usize {
        match self.domain {
            DomainKind::Lp | DomainKind::Arm | DomainKind::Maze => 2,
            DomainKind::MultiLp => self.domain_m,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials must be positive");
        }
        if self.iterations == 0 {
            bail!("iterations must be positive");
        }
        if self.emitters == 0 {
            bail!("emitters must be positive");
        }
        if self.batch_size < 2 && self.algorithm != AlgorithmKind::MapElitesLine {
            bail!("batch_size must be at least 2 for CMA-ES based algorithms");
        }
        if self.batch_size == 0 {
            bail!("batch_size must be positive");
        }
        if !(self.bandwidth > 0.0) {
            bail!("density.bandwidth must be positive");
        }
        if !(self.sigma0 > 0.0) {
            bail!("sigma0 must be positive");
        }
        if self.buffer_capacity == 0 {
            bail!("buffer.capacity must be positive");
        }
        if self.ns_k == 0 {
            bail!("ns.k must be positive");
        }
        if !(self.ns_threshold > 0.0) {
            bail!("ns.threshold must be positive");
        }
        if !(0.0..=1.0).contains(&self.mae_learning_rate) {
            bail!("cma_mae.learning_rate must lie in [0, 1]");
        }
        if self.me_patience == 0 {
            bail!("cma_me.patience must be positive");
        }
        if !(self.sigma_iso >= 0.0 && self.sigma_line >= 0.0) {
            bail!("map_elites variances must be non-negative");
        }
        if self.archive_cells == 0 {
            bail!("archive.cells must be positive");
        }
        match self.domain {
            DomainKind::Lp => {
                if self.domain_n < 2 || self.domain_n % 2 != 0 {
                    bail!("lp needs an even domain.n of at least 2");
                }
            }
            DomainKind::MultiLp => {
                if self.domain_m == 0 || self.domain_n % self.domain_m != 0 {
                    bail!("multi_lp needs domain.m to divide domain.n");
                }
            }
            DomainKind::Arm => {
                if self.domain_n == 0 {
                    bail!("arm needs at least one link");
                }
            }
            DomainKind::Maze => {
                if self.domain_n != 66 {
                    bail!("the maze controller has exactly 66 weights; domain.n cannot change");
                }
            }
        }
        if self.maze_file.is_some() && self.domain != DomainKind::Maze {
            bail!("domain.maze_file only applies to the maze domain");
        }
        if let Some((lower, upper)) = &self.archive_bounds {
            let dims = self.feature_dim();
            if lower.len() != dims {
                bail!("archive.bounds has {} pairs but the domain has {dims} features", lower.len());
            }
            if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
                bail!("archive.bounds needs lower < upper in every pair");
            }
        }
        if self.archive_kind == ArchiveKind::Grid && self.feature_dim() > 3 {
            bail!(
                "a {}-dimensional grid archive is impractically large; use archive.kind = cvt",
                self.feature_dim()
            );
        }
        if let Some(sweep) = &self.sweep {
            if self.algorithm != AlgorithmKind::DdsKde {
                bail!("sweep only applies to dds_kde");
            }
            if sweep.is_empty() {
                bail!("sweep needs at least one value");
            }
            if sweep.iter().any(|&h| !(h > 0.0 && h <= 1.0)) {
                bail!("sweep values are normalized bandwidths in (0, 1]");
            }
        }
        if self.centroids_file.is_some() && self.archive_kind != ArchiveKind::Cvt {
            bail!("archive.centroids_file only applies to cvt archives");
        }
        Ok(())
    }

    /// Re-runnable `key = value` echo of every resolved setting.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("domain", self.domain.name().to_string());
        line("domain.n", self.domain_n.to_string());
        if self.domain == DomainKind::MultiLp {
            line("domain.m", self.domain_m.to_string());
        }
        if let Some(path) = &self.maze_file {
            line("domain.maze_file", path.display().to_string());
        }
        line("algorithm", self.algorithm.name().to_string());
        line("archive.kind", self.archive_kind.name().to_string());
        line("archive.cells", self.archive_cells.to_string());
        if let Some((lower, upper)) = &self.archive_bounds {
            let flat: Vec<String> = lower
                .iter()
                .zip(upper)
                .flat_map(|(l, u)| [l.to_string(), u.to_string()])
                .collect();
            line("archive.bounds", flat.join(","));
        }
        if self.archive_kind == ArchiveKind::Cvt {
            line("archive.cvt_samples", self.cvt_samples.to_string());
            line("archive.cvt_iterations", self.cvt_iterations.to_string());
            line("archive.cvt_seed", self.cvt_seed.to_string());
            if let Some(path) = &self.centroids_file {
                line("archive.centroids_file", path.display().to_string());
            }
        }
        line("trials", self.trials.to_string());
        line("seed", self.seed.to_string());
        line("iterations", self.iterations.to_string());
        line("emitters", self.emitters.to_string());
        line("batch_size", self.batch_size.to_string());
        line("sigma0", self.sigma0.to_string());
        match self.algorithm {
            AlgorithmKind::DdsKde => {
                let kernel = match self.kernel {
                    Kernel::Gaussian => "gaussian",
                    Kernel::Triangular => "triangular",
                };
                line("density.kernel", kernel.to_string());
                line("density.bandwidth", self.bandwidth.to_string());
                line("buffer.capacity", self.buffer_capacity.to_string());
            }
            AlgorithmKind::Ns => {
                line("ns.k", self.ns_k.to_string());
                line("ns.threshold", self.ns_threshold.to_string());
                line("ns.include_batch", self.ns_include_batch.to_string());
            }
            AlgorithmKind::CmaMae => {
                line("cma_mae.learning_rate", self.mae_learning_rate.to_string());
                line("cma_mae.threshold_min", self.mae_threshold_min.to_string());
            }
            AlgorithmKind::CmaMe => {
                line("cma_me.patience", self.me_patience.to_string());
            }
            AlgorithmKind::MapElitesLine => {
                line("map_elites.sigma_iso", self.sigma_iso.to_string());
                line("map_elites.sigma_line", self.sigma_line.to_string());
            }
        }
        let overrides = [
            ("cma.c_sigma", self.cma.c_sigma),
            ("cma.d_sigma", self.cma.d_sigma),
            ("cma.c_c", self.cma.c_c),
            ("cma.c_1", self.cma.c_1),
            ("cma.c_mu", self.cma.c_mu),
            ("cma.sigma_floor", self.cma.sigma_floor),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                line(key, v.to_string());
            }
        }
        if let Some(v) = self.cma.cond_limit {
            line("cma.cond_limit", v.to_string());
        }
        if let Some(sweep) = &self.sweep {
            let values: Vec<String> = sweep.iter().map(|v| v.to_string()).collect();
            line("sweep", values.join(","));
        }
        line("output", self.output.display().to_string());
        line("serial", self.serial.to_string());
        out
    }
}
