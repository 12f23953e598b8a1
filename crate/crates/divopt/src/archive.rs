//! Tessellated elite archives over feature space.
//!
//! Two tessellations (uniform grid, centroidal Voronoi), an elitist
//! archive with optional annealed acceptance thresholds, and the
//! unbounded novelty archive. The elitist archive doubles as the passive
//! record every driver inserts into, so its visit counts are the basis
//! for the coverage and cross-entropy metrics.

use crate::density::{nearest_k_sq, novelty_from_sorted, novelty_score};
use crate::{dist_sq, Error, Feature, FeatureSet, Result, Solution};
use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Uniform hyperrectangle tessellation. Cell indices are flattened
/// row-major (first feature dimension slowest), zero-based.
#[derive(Debug, Clone)]
pub struct GridTessellation {
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells_per_dim: Vec<usize>,
    total: usize,
}

impl GridTessellation {
    pub fn new(lower: &[f64], upper: &[f64], cells_per_dim: &[usize]) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() || lower.len() != cells_per_dim.len() {
            return Err(Error::InvalidArgument("grid bounds and cell counts must agree"));
        }
        if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
            return Err(Error::InvalidArgument("grid needs lower < upper per dimension"));
        }
        if cells_per_dim.iter().any(|&c| c == 0) {
            return Err(Error::InvalidArgument("grid needs at least one cell per dimension"));
        }
        let mut total = 1usize;
        for &c in cells_per_dim {
            total = total
                .checked_mul(c)
                .ok_or(Error::InvalidArgument("grid cell count overflows"))?;
        }
        Ok(Self {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            cells_per_dim: cells_per_dim.to_vec(),
            total,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn cell_count(&self) -> usize {
        self.total
    }

    pub fn cells_per_dim(&self) -> &[usize] {
        &self.cells_per_dim
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    /// Flattened bin index of `feature`. Out-of-bounds values clamp into
    /// the boundary bin; only the final bin is right-closed.
    pub fn cell_index(&self, feature: &[f64]) -> Result<usize> {
        if feature.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: feature.len() });
        }
        let mut index = 0usize;
        for d in 0..self.dim() {
            let y = feature[d];
            if y.is_nan() {
                return Err(Error::InvalidFeature);
            }
            let bins = self.cells_per_dim[d];
            let pos = (y - self.lower[d]) / (self.upper[d] - self.lower[d]) * bins as f64;
            let bin = if pos < 0.0 {
                0
            } else if pos >= bins as f64 {
                bins - 1
            } else {
                pos.floor() as usize
            };
            index = index * bins + bin;
        }
        Ok(index)
    }

    /// Per-dimension bin coordinates of a flattened index.
    pub fn multi_index(&self, mut index: usize) -> Vec<usize> {
        let mut coords = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            coords[d] = index % self.cells_per_dim[d];
            index /= self.cells_per_dim[d];
        }
        coords
    }

    /// Geometric center of a cell, used to cross-check CVT indexing.
    pub fn cell_center(&self, index: usize) -> Vec<f64> {
        let coords = self.multi_index(index);
        coords
            .iter()
            .enumerate()
            .map(|(d, &c)| {
                let width = (self.upper[d] - self.lower[d]) / self.cells_per_dim[d] as f64;
                self.lower[d] + (c as f64 + 0.5) * width
            })
            .collect()
    }
}

const KD_LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum KdNode {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, right: usize },
}

/// Exact nearest-neighbor index over a fixed point set, with ties broken
/// toward the lowest point index. Hand-rolled because the tie rule is
/// part of the tessellation contract and off-the-shelf trees leave it
/// unspecified.
#[derive(Debug, Clone)]
struct KdTree {
    nodes: Vec<KdNode>,
    order: Vec<usize>,
}

impl KdTree {
    fn build(points: &FeatureSet) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        Self::build_range(points, &mut order, 0, points.len(), &mut nodes);
        Self { nodes, order }
    }

    fn build_range(
        points: &FeatureSet,
        order: &mut [usize],
        start: usize,
        end: usize,
        nodes: &mut Vec<KdNode>,
    ) {
        let len = end - start;
        if len <= KD_LEAF_SIZE {
            nodes.push(KdNode::Leaf { start, end });
            return;
        }
        let slice = &mut order[start..end];
        let mut split_dim = 0;
        let mut widest = -1.0f64;
        for d in 0..points.dim() {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &i in slice.iter() {
                let v = points.point(i)[d];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > widest {
                widest = hi - lo;
                split_dim = d;
            }
        }
        let mid = len / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            points.point(a)[split_dim]
                .total_cmp(&points.point(b)[split_dim])
                .then(a.cmp(&b))
        });
        let value = points.point(slice[mid])[split_dim];
        let here = nodes.len();
        nodes.push(KdNode::Split { dim: split_dim, value, right: 0 });
        Self::build_range(points, order, start, start + mid, nodes);
        let right = nodes.len();
        if let KdNode::Split { right: r, .. } = &mut nodes[here] {
            *r = right;
        }
        Self::build_range(points, order, start + mid, end, nodes);
    }

    /// Returns `(squared distance, point index)` of the nearest point.
    /// `seed` primes the search bound with a known-valid candidate.
    fn query(&self, points: &FeatureSet, y: &[f64], seed: usize) -> (f64, usize) {
        let mut best = (dist_sq(points.point(seed), y), seed);
        self.search(0, points, y, &mut best);
        best
    }

    fn search(&self, node: usize, points: &FeatureSet, y: &[f64], best: &mut (f64, usize)) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &idx in &self.order[start..end] {
                    let p = points.point(idx);
                    let mut d2 = 0.0;
                    for (a, b) in p.iter().zip(y) {
                        d2 += (a - b) * (a - b);
                        if d2 > best.0 {
                            break;
                        }
                    }
                    if d2 < best.0 || (d2 == best.0 && idx < best.1) {
                        *best = (d2, idx);
                    }
                }
            }
            KdNode::Split { dim, value, right } => {
                let gap = y[dim] - value;
                let (near, far) = if gap < 0.0 { (node + 1, right) } else { (right, node + 1) };
                self.search(near, points, y, best);
                if gap * gap <= best.0 {
                    self.search(far, points, y, best);
                }
            }
        }
    }
}

/// Centroidal Voronoi tessellation: cell = index of the nearest centroid
/// (Euclidean, ties to the lowest index).
#[derive(Debug, Clone)]
pub struct CvtTessellation {
    centroids: FeatureSet,
}

impl CvtTessellation {
    /// Runs Lloyd's algorithm over `sample_count` uniform samples in the
    /// box to place `cells` centroids. Deterministic under `seed`.
    pub fn generate(
        cells: usize,
        lower: &[f64],
        upper: &[f64],
        sample_count: usize,
        iterations: usize,
        seed: u64,
    ) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidArgument("tessellation needs at least one cell"));
        }
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidArgument("cvt bounds must agree in dimension"));
        }
        if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
            return Err(Error::InvalidArgument("cvt needs lower < upper per dimension"));
        }
        if sample_count < cells {
            return Err(Error::InvalidArgument("cvt needs at least as many samples as cells"));
        }
        let dim = lower.len();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut samples = FeatureSet::with_capacity(dim, sample_count);
        let mut point = vec![0.0; dim];
        for _ in 0..sample_count {
            for d in 0..dim {
                point[d] = rng.gen_range(lower[d]..upper[d]);
            }
            samples.push(&point);
        }
        let mut centroids = FeatureSet::with_capacity(dim, cells);
        for idx in rand::seq::index::sample(&mut rng, sample_count, cells) {
            centroids.push(samples.point(idx));
        }

        let mut assignment = vec![0usize; sample_count];
        let mut sums = vec![0.0f64; cells * dim];
        let mut counts = vec![0usize; cells];
        for _ in 0..iterations {
            let tree = KdTree::build(&centroids);
            for (i, sample) in samples.iter().enumerate() {
                assignment[i] = tree.query(&centroids, sample, assignment[i]).1;
            }
            sums.fill(0.0);
            counts.fill(0);
            for (i, sample) in samples.iter().enumerate() {
                let c = assignment[i];
                counts[c] += 1;
                for d in 0..dim {
                    sums[c * dim + d] += sample[d];
                }
            }
            for c in 0..cells {
                if counts[c] > 0 {
                    for d in 0..dim {
                        point[d] = sums[c * dim + d] / counts[c] as f64;
                    }
                    centroids.set_point(c, &point);
                }
            }
        }
        Self::from_centroids(centroids)
    }

    /// Wraps an existing centroid list (e.g. loaded from a file so that
    /// several runs share one tessellation).
    pub fn from_centroids(centroids: FeatureSet) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::InvalidArgument("cvt needs at least one centroid"));
        }
        if centroids.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidFeature);
        }
        Ok(Self { centroids })
    }

    pub fn dim(&self) -> usize {
        self.centroids.dim()
    }

    pub fn cell_count(&self) -> usize {
        self.centroids.len()
    }

    pub fn centroids(&self) -> &FeatureSet {
        &self.centroids
    }

    pub fn cell_index(&self, feature: &[f64]) -> Result<usize> {
        if feature.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: feature.len() });
        }
        if feature.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidFeature);
        }
        // Lookups use the vectorized flat scan: tree pruning decays in
        // higher dimensions, while the scan is branch-free per point.
        // Lloyd iterations still build a tree, whose warm-started queries
        // prune well. Both break distance ties toward the lowest index.
        Ok(nearest_k_sq(feature, &self.centroids, 1)[0].1 as usize)
    }
}

/// Either tessellation behind one dispatch point.
#[derive(Debug, Clone)]
pub enum Tessellation {
    Grid(GridTessellation),
    Cvt(CvtTessellation),
}

impl Tessellation {
    pub fn dim(&self) -> usize {
        match self {
            Tessellation::Grid(g) => g.dim(),
            Tessellation::Cvt(c) => c.dim(),
        }
    }

    pub fn cell_count(&self) -> usize {
        match self {
            Tessellation::Grid(g) => g.cell_count(),
            Tessellation::Cvt(c) => c.cell_count(),
        }
    }

    pub fn cell_index(&self, feature: &[f64]) -> Result<usize> {
        match self {
            Tessellation::Grid(g) => g.cell_index(feature),
            Tessellation::Cvt(c) => c.cell_index(feature),
        }
    }

    pub fn as_grid(&self) -> Option<&GridTessellation> {
        match self {
            Tessellation::Grid(g) => Some(g),
            Tessellation::Cvt(_) => None,
        }
    }
}

/// One archived solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Elite {
    pub solution: Solution,
    pub feature: Feature,
    pub objective: f64,
}

/// What an insertion attempt did to the archive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddStatus {
    NewCell,
    Improved,
    Rejected,
}

/// Insertion outcome. `value` is the improvement `objective - t_before`,
/// where `t_before` is the cell's acceptance threshold (annealed mode)
/// or the incumbent objective, 0 for an empty cell (elitist mode).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AddResult {
    pub status: AddStatus,
    pub value: f64,
    pub cell: usize,
}

/// Tessellated archive keeping at most one elite per cell, plus the
/// cumulative visit count of every cell.
///
/// In elitist mode an insertion replaces the incumbent iff its objective
/// is strictly greater. In annealed mode each cell carries a threshold
/// `t_e` starting at `threshold_min`: an insertion is accepted iff
/// `objective > t_e`, which moves the threshold to
/// `(1 - alpha) * t_e + alpha * objective` (and still replaces the elite
/// only on strict improvement). `alpha = 1` reproduces elitist
/// acceptance; `alpha = 0` freezes the thresholds.
#[derive(Debug, Clone)]
pub struct ElitesArchive {
    tessellation: Tessellation,
    cells: Vec<Option<Elite>>,
    visit_counts: Vec<u64>,
    total_visits: u64,
    occupied: Vec<usize>,
    thresholds: Option<Vec<f64>>,
    learning_rate: f64,
}

impl ElitesArchive {
    /// Elitist (replace-on-strict-improvement) archive.
    pub fn new_elitist(tessellation: Tessellation) -> Self {
        let cells = tessellation.cell_count();
        Self {
            tessellation,
            cells: vec![None; cells],
            visit_counts: vec![0; cells],
            total_visits: 0,
            occupied: Vec::new(),
            thresholds: None,
            learning_rate: 0.0,
        }
    }

    /// Archive with annealed per-cell acceptance thresholds.
    pub fn new_annealed(
        tessellation: Tessellation,
        learning_rate: f64,
        threshold_min: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&learning_rate) {
            return Err(Error::InvalidArgument("learning rate must lie in [0, 1]"));
        }
        if !threshold_min.is_finite() {
            return Err(Error::InvalidArgument("threshold min must be finite"));
        }
        let cells = tessellation.cell_count();
        Ok(Self {
            tessellation,
            cells: vec![None; cells],
            visit_counts: vec![0; cells],
            total_visits: 0,
            occupied: Vec::new(),
            thresholds: Some(vec![threshold_min; cells]),
            learning_rate,
        })
    }

    /// Attempts to insert a solution. Every attempt, accepted or not,
    /// increments the target cell's visit count.
    pub fn add(&mut self, solution: &[f64], feature: &[f64], objective: f64) -> Result<AddResult> {
        if !objective.is_finite() {
            return Err(Error::InvalidArgument("objective must be finite"));
        }
        let cell = self.tessellation.cell_index(feature)?;
        self.visit_counts[cell] += 1;
        self.total_visits += 1;

        let was_empty = self.cells[cell].is_none();
        let (accepted, value) = match &mut self.thresholds {
            Some(thresholds) => {
                let before = thresholds[cell];
                let accepted = objective > before;
                if accepted {
                    thresholds[cell] =
                        (1.0 - self.learning_rate) * before + self.learning_rate * objective;
                }
                (accepted, objective - before)
            }
            None => {
                let before = self.cells[cell].as_ref().map_or(0.0, |e| e.objective);
                let accepted = was_empty || objective > self.cells[cell].as_ref().unwrap().objective;
                (accepted, objective - before)
            }
        };

        if !accepted {
            return Ok(AddResult { status: AddStatus::Rejected, value, cell });
        }
        let replaces = was_empty || objective > self.cells[cell].as_ref().unwrap().objective;
        if replaces {
            self.cells[cell] = Some(Elite {
                solution: solution.to_vec(),
                feature: feature.to_vec(),
                objective,
            });
            if was_empty {
                self.occupied.push(cell);
            }
        }
        let status = if was_empty { AddStatus::NewCell } else { AddStatus::Improved };
        Ok(AddResult { status, value, cell })
    }

    pub fn tessellation(&self) -> &Tessellation {
        &self.tessellation
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn occupied_cells(&self) -> usize {
        self.occupied.len()
    }

    pub fn elite(&self, cell: usize) -> Option<&Elite> {
        self.cells[cell].as_ref()
    }

    /// Occupied cells with their elites, in first-occupation order.
    pub fn elites(&self) -> impl Iterator<Item = (usize, &Elite)> {
        self.occupied.iter().map(move |&c| (c, self.cells[c].as_ref().unwrap()))
    }

    pub fn visit_counts(&self) -> &[u64] {
        &self.visit_counts
    }

    pub fn total_visits(&self) -> u64 {
        self.total_visits
    }

    /// Uniformly random occupied cell's elite, or None when empty.
    pub fn random_elite<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&Elite> {
        if self.occupied.is_empty() {
            return None;
        }
        let cell = self.occupied[rng.gen_range(0..self.occupied.len())];
        self.cells[cell].as_ref()
    }

    /// Elite at `position` in first-occupation order; panics when
    /// `position >= occupied_cells()`.
    pub fn elite_at(&self, position: usize) -> &Elite {
        self.cells[self.occupied[position]].as_ref().unwrap()
    }
}

/// Unbounded archive of behaviorally novel solutions: an entry is kept
/// iff its novelty against the archive at insertion time reached the
/// acceptance threshold (the first entry always enters).
#[derive(Debug, Clone)]
pub struct NoveltyArchive {
    solutions: Vec<Solution>,
    features: FeatureSet,
    threshold: f64,
    k: usize,
}

impl NoveltyArchive {
    pub fn new(dim: usize, threshold: f64, k: usize) -> Result<Self> {
        if !(threshold > 0.0) {
            return Err(Error::InvalidArgument("acceptance threshold must be positive"));
        }
        if k == 0 {
            return Err(Error::InvalidArgument("novelty needs k >= 1"));
        }
        Ok(Self { solutions: Vec::new(), features: FeatureSet::new(dim), threshold, k })
    }

    /// Mean distance of `feature` to its k nearest archived features
    /// (infinite when the archive is empty).
    pub fn novelty(&self, feature: &[f64]) -> f64 {
        novelty_score(feature, &self.features, self.k)
    }

    /// Inserts iff the archive is empty or novelty clears the threshold.
    pub fn try_add(&mut self, solution: &[f64], feature: &[f64]) -> bool {
        let accepted = self.features.is_empty() || self.novelty(feature) >= self.threshold;
        if accepted {
            self.solutions.push(solution.to_vec());
            self.features.push(feature);
        }
        accepted
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    /// Scores a whole candidate batch against the current contents,
    /// retaining each candidate's nearest-neighbor list so that
    /// [`Self::commit_batch`] can replay the insertion scan without
    /// touching the archive again.
    pub(crate) fn rank_batch(&self, candidates: &[Vec<f64>]) -> RankedBatch {
        let mut scores = Vec::with_capacity(candidates.len());
        let mut neighbors = Vec::with_capacity(candidates.len());
        for y in candidates {
            if self.features.is_empty() {
                scores.push(f64::INFINITY);
                neighbors.push(Vec::new());
            } else {
                let kept = nearest_k_sq(y, &self.features, self.k);
                scores.push(novelty_from_sorted(&kept));
                neighbors.push(kept);
            }
        }
        RankedBatch { scores, neighbors, ranked_len: self.features.len() }
    }

    /// Applies the accept-iff-novel rule of [`Self::try_add`] to every
    /// candidate in batch order.
    ///
    /// Equivalent to calling `try_add` per candidate: each decision sees
    /// the archive as extended by the candidates accepted earlier in the
    /// batch. Those are merged into the retained neighbor lists in O(k)
    /// instead of rescanning the archive, which is what makes novelty
    /// search affordable on archives with millions of entries.
    ///
    /// Panics if the archive changed since `ranked` was computed.
    pub(crate) fn commit_batch(
        &mut self,
        ranked: &RankedBatch,
        solutions: &[Vec<f64>],
        candidates: &[Vec<f64>],
    ) -> Vec<bool> {
        assert_eq!(
            self.features.len(),
            ranked.ranked_len,
            "archive changed between ranking and commit"
        );
        assert_eq!(ranked.scores.len(), candidates.len());
        assert_eq!(solutions.len(), candidates.len());
        let mut flags = Vec::with_capacity(candidates.len());
        let mut accepted: Vec<usize> = Vec::new();
        for (i, y) in candidates.iter().enumerate() {
            let novelty = if accepted.is_empty() {
                ranked.scores[i]
            } else {
                let mut extra: Vec<(f64, u32)> = accepted
                    .iter()
                    .enumerate()
                    .map(|(pos, &j)| {
                        (dist_sq(y, &candidates[j]), (ranked.ranked_len + pos) as u32)
                    })
                    .collect();
                extra.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let k_eff = self.k.min(ranked.ranked_len + extra.len());
                let merged = merge_neighbor_lists(&ranked.neighbors[i], &extra, k_eff);
                novelty_from_sorted(&merged)
            };
            let accept = self.features.is_empty() || novelty >= self.threshold;
            if accept {
                self.solutions.push(solutions[i].clone());
                self.features.push(y);
                accepted.push(i);
            }
            flags.push(accept);
        }
        flags
    }
}

/// Batch novelty scores plus the per-candidate neighbor lists backing
/// them, tied to the archive length they were computed against.
#[derive(Debug)]
pub(crate) struct RankedBatch {
    /// Novelty of each candidate against the archive at ranking time.
    pub(crate) scores: Vec<f64>,
    neighbors: Vec<Vec<(f64, u32)>>,
    ranked_len: usize,
}

/// First `k` entries of two ascending `(squared distance, index)` lists
/// merged under the same order.
fn merge_neighbor_lists(
    a: &[(f64, u32)],
    b: &[(f64, u32)],
    k: usize,
) -> Vec<(f64, u32)> {
    let mut merged = Vec::with_capacity(k.min(a.len() + b.len()));
    let (mut i, mut j) = (0, 0);
    while merged.len() < k {
        match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => {
                if x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).is_le() {
                    merged.push(x);
                    i += 1;
                } else {
                    merged.push(y);
                    j += 1;
                }
            }
            (Some(&x), None) => {
                merged.push(x);
                i += 1;
            }
            (None, Some(&y)) => {
                merged.push(y);
                j += 1;
            }
            (None, None) => break,
        }
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid_100() -> GridTessellation {
        GridTessellation::new(&[-256.0, -256.0], &[256.0, 256.0], &[100, 100]).unwrap()
    }

    #[test]
    fn grid_corner_and_center_bins() {
        let g = grid_100();
        assert_eq!(g.cell_count(), 10_000);
        assert_eq!(g.cell_index(&[-256.0, -256.0]).unwrap(), 0);
        assert_eq!(g.cell_index(&[256.0, 256.0]).unwrap(), 9_999);
        let center = g.cell_index(&[0.0, 0.0]).unwrap();
        assert_eq!(g.multi_index(center), vec![50, 50]);
        assert_eq!(center, 50 * 100 + 50);
    }

    #[test]
    fn grid_clamps_out_of_bounds_and_closes_final_bin() {
        let g = GridTessellation::new(&[0.0], &[8.0], &[8]).unwrap();
        assert_eq!(g.cell_index(&[1.0]).unwrap(), 1);
        assert_eq!(g.cell_index(&[7.999]).unwrap(), 7);
        assert_eq!(g.cell_index(&[8.0]).unwrap(), 7);
        assert_eq!(g.cell_index(&[-3.0]).unwrap(), 0);
        assert_eq!(g.cell_index(&[100.0]).unwrap(), 7);
        assert_eq!(g.cell_index(&[f64::NEG_INFINITY]).unwrap(), 0);
        assert_eq!(g.cell_index(&[f64::INFINITY]).unwrap(), 7);
    }

    #[test]
    fn grid_rejects_nan_and_bad_construction() {
        let g = grid_100();
        assert!(matches!(g.cell_index(&[f64::NAN, 0.0]), Err(Error::InvalidFeature)));
        assert!(matches!(g.cell_index(&[0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(GridTessellation::new(&[0.0], &[0.0], &[10]).is_err());
        assert!(GridTessellation::new(&[1.0], &[0.0], &[10]).is_err());
        assert!(GridTessellation::new(&[0.0], &[1.0], &[0]).is_err());
        assert!(GridTessellation::new(&[], &[], &[]).is_err());
    }

    #[test]
    fn grid_cell_centers_round_trip() {
        let g = grid_100();
        for cell in [0usize, 57, 5050, 9_999] {
            assert_eq!(g.cell_index(&g.cell_center(cell)).unwrap(), cell);
        }
    }

    #[test]
    fn single_centroid_sits_near_box_center() {
        let cvt = CvtTessellation::generate(1, &[0.0, 0.0], &[1.0, 1.0], 100_000, 5, 7).unwrap();
        let c = cvt.centroids().point(0);
        assert_relative_eq!(c[0], 0.5, epsilon = 0.01);
        assert_relative_eq!(c[1], 0.5, epsilon = 0.01);
        assert_eq!(cvt.cell_index(&[0.9, 0.9]).unwrap(), 0);
    }

    #[test]
    fn cvt_generation_is_seed_deterministic() {
        let a = CvtTessellation::generate(50, &[-1.0, -1.0], &[1.0, 1.0], 5_000, 10, 3).unwrap();
        let b = CvtTessellation::generate(50, &[-1.0, -1.0], &[1.0, 1.0], 5_000, 10, 3).unwrap();
        let c = CvtTessellation::generate(50, &[-1.0, -1.0], &[1.0, 1.0], 5_000, 10, 4).unwrap();
        assert_eq!(a.centroids(), b.centroids());
        assert_ne!(a.centroids(), c.centroids());
    }

    #[test]
    fn cvt_centroids_stay_in_bounds_and_distinct() {
        let cvt = CvtTessellation::generate(50, &[0.0, -2.0], &[1.0, 2.0], 5_000, 10, 11).unwrap();
        let pts = cvt.centroids();
        for p in pts.iter() {
            assert!(p[0] >= 0.0 && p[0] <= 1.0 && p[1] >= -2.0 && p[1] <= 2.0);
        }
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                assert!(dist_sq(pts.point(i), pts.point(j)) > 0.0, "duplicate centroids {i},{j}");
            }
        }
    }

    #[test]
    fn nearest_centroid_ties_go_to_lowest_index() {
        let mut pts = FeatureSet::new(2);
        pts.push(&[0.0, 0.0]);
        pts.push(&[1.0, 0.0]);
        pts.push(&[0.0, 1.0]);
        let cvt = CvtTessellation::from_centroids(pts).unwrap();
        assert_eq!(cvt.cell_index(&[0.9, 0.1]).unwrap(), 1);
        assert_eq!(cvt.cell_index(&[0.5, 0.0]).unwrap(), 0);
        assert_eq!(cvt.cell_index(&[0.0, 0.5]).unwrap(), 0);
        assert!(matches!(cvt.cell_index(&[f64::NAN, 0.0]), Err(Error::InvalidFeature)));
    }

    #[test]
    fn tree_lookup_matches_linear_scan() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for dim in [1usize, 2, 3, 7] {
            let mut pts = FeatureSet::new(dim);
            let mut buf = vec![0.0; dim];
            for _ in 0..257 {
                for v in &mut buf {
                    *v = rng.gen_range(-1.0..1.0);
                }
                pts.push(&buf);
            }
            let cvt = CvtTessellation::from_centroids(pts.clone()).unwrap();
            for _ in 0..500 {
                for v in &mut buf {
                    *v = rng.gen_range(-1.2..1.2);
                }
                let mut best = (f64::INFINITY, usize::MAX);
                for (i, p) in pts.iter().enumerate() {
                    let d2 = dist_sq(p, &buf);
                    if d2 < best.0 {
                        best = (d2, i);
                    }
                }
                assert_eq!(cvt.cell_index(&buf).unwrap(), best.1, "dim {dim}");
            }
        }
    }

    #[test]
    fn cvt_at_grid_centers_reproduces_grid_indexing() {
        let g = GridTessellation::new(&[0.0, 0.0], &[1.0, 1.0], &[10, 10]).unwrap();
        let mut centers = FeatureSet::new(2);
        for cell in 0..g.cell_count() {
            centers.push(&g.cell_center(cell));
        }
        let cvt = CvtTessellation::from_centroids(centers).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..1_000 {
            let y = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            assert_eq!(g.cell_index(&y).unwrap(), cvt.cell_index(&y).unwrap());
        }
    }

    fn unit_grid() -> Tessellation {
        Tessellation::Grid(GridTessellation::new(&[0.0, 0.0], &[1.0, 1.0], &[4, 4]).unwrap())
    }

    #[test]
    fn elitist_archive_keeps_strictly_better_solutions() {
        let mut a = ElitesArchive::new_elitist(unit_grid());
        let r = a.add(&[1.0], &[0.1, 0.1], 1.0).unwrap();
        assert_eq!(r.status, AddStatus::NewCell);
        assert_eq!(r.value, 1.0);

        let r = a.add(&[2.0], &[0.12, 0.12], 1.0).unwrap();
        assert_eq!(r.status, AddStatus::Rejected);
        assert_eq!(a.elite(r.cell).unwrap().solution, vec![1.0]);

        let r = a.add(&[3.0], &[0.12, 0.12], 2.0).unwrap();
        assert_eq!(r.status, AddStatus::Improved);
        assert_eq!(r.value, 1.0);
        assert_eq!(a.elite(r.cell).unwrap().solution, vec![3.0]);

        assert_eq!(a.occupied_cells(), 1);
        assert_eq!(a.total_visits(), 3);
        assert_eq!(a.visit_counts()[r.cell], 3);
        assert!(a.add(&[0.0], &[0.5, 0.5], f64::NAN).is_err());
    }

    #[test]
    fn visit_counts_sum_to_attempts_and_grow_monotonically() {
        let mut a = ElitesArchive::new_elitist(unit_grid());
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut last_occupied = 0;
        for t in 1..=200u64 {
            let y = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            a.add(&[0.0], &y, 1.0).unwrap();
            assert_eq!(a.visit_counts().iter().sum::<u64>(), t);
            assert_eq!(a.total_visits(), t);
            assert!(a.occupied_cells() >= last_occupied);
            last_occupied = a.occupied_cells();
        }
        assert_eq!(last_occupied, 16);
    }

    #[test]
    fn annealed_threshold_follows_the_update_rule() {
        let mut a = ElitesArchive::new_annealed(unit_grid(), 0.01, 0.0).unwrap();
        let r = a.add(&[0.0], &[0.1, 0.1], 1.0).unwrap();
        assert_eq!(r.status, AddStatus::NewCell);
        assert_eq!(r.value, 1.0);
        assert_relative_eq!(a.thresholds.as_ref().unwrap()[r.cell], 0.01, epsilon = 1e-15);

        for j in 2..=50u32 {
            let r = a.add(&[0.0], &[0.1, 0.1], 1.0).unwrap();
            assert_ne!(r.status, AddStatus::Rejected, "acceptance stopped at {j}");
            assert_relative_eq!(r.value, 0.99f64.powi(j as i32 - 1), epsilon = 1e-12);
            let expected = 1.0 - 0.99f64.powi(j as i32);
            assert_relative_eq!(a.thresholds.as_ref().unwrap()[r.cell], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn unit_learning_rate_accepts_exactly_on_elite_improvement() {
        let mut annealed = ElitesArchive::new_annealed(unit_grid(), 1.0, 0.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..500 {
            let y = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let f = rng.gen_range(0.1..2.0);
            let cell = annealed.tessellation().cell_index(&y).unwrap();
            let incumbent = annealed.elite(cell).map(|e| e.objective);
            let r = annealed.add(&[0.0], &y, f).unwrap();
            let should_accept = incumbent.map_or(f > 0.0, |inc| f > inc);
            assert_eq!(r.status != AddStatus::Rejected, should_accept);
        }
    }

    #[test]
    fn zero_learning_rate_freezes_thresholds() {
        let mut a = ElitesArchive::new_annealed(unit_grid(), 0.0, 0.0).unwrap();
        for _ in 0..10 {
            let r = a.add(&[0.0], &[0.1, 0.1], 1.0).unwrap();
            assert_eq!(r.value, 1.0);
            assert_ne!(r.status, AddStatus::Rejected);
        }
        assert!(a.thresholds.as_ref().unwrap().iter().all(|&t| t == 0.0));
    }

    #[test]
    fn annealed_rejects_invalid_learning_rate() {
        assert!(ElitesArchive::new_annealed(unit_grid(), -0.1, 0.0).is_err());
        assert!(ElitesArchive::new_annealed(unit_grid(), 1.1, 0.0).is_err());
    }

    #[test]
    fn random_elite_draws_uniformly_over_occupied_cells() {
        let mut a = ElitesArchive::new_elitist(unit_grid());
        assert!(a.random_elite(&mut ChaCha12Rng::seed_from_u64(0)).is_none());
        a.add(&[1.0], &[0.1, 0.1], 1.0).unwrap();
        a.add(&[2.0], &[0.6, 0.1], 1.0).unwrap();
        a.add(&[3.0], &[0.1, 0.6], 1.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let mut hits = [0u32; 3];
        for _ in 0..3_000 {
            let e = a.random_elite(&mut rng).unwrap();
            hits[e.solution[0] as usize - 1] += 1;
        }
        assert!(hits.iter().all(|&h| h > 800), "hits {hits:?}");
    }

    #[test]
    fn novelty_archive_bootstraps_then_filters_by_threshold() {
        let mut a = NoveltyArchive::new(2, 21.504, 100).unwrap();
        assert!(a.try_add(&[0.0], &[0.0, 0.0]));
        assert!(!a.try_add(&[0.0], &[0.0, 0.0]));
        assert!(a.try_add(&[0.0], &[30.0, 0.0]));
        assert_eq!(a.len(), 2);

        let mut b = NoveltyArchive::new(1, 0.5, 1).unwrap();
        assert!(b.try_add(&[0.0], &[1.0]));
        assert!(!b.try_add(&[0.0], &[1.2]));
        assert!(b.try_add(&[0.0], &[1.5]));
        assert!(NoveltyArchive::new(1, 0.0, 1).is_err());
        assert!(NoveltyArchive::new(1, 1.0, 0).is_err());
    }

    /// Drives one archive through `rank_batch` + `commit_batch` and a
    /// clone through per-candidate `novelty` + `try_add`, asserting
    /// bit-equal scores, equal acceptance, and equal final contents.
    /// Coordinates sit on a coarse lattice so exact distance ties occur.
    fn assert_batch_path_matches_sequential(
        seed: u64,
        dim: usize,
        k: usize,
        threshold: f64,
        batches: usize,
    ) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut fast = NoveltyArchive::new(dim, threshold, k).unwrap();
        let mut slow = fast.clone();
        for _ in 0..batches {
            let size = rng.gen_range(1..=9);
            let batch: Vec<Vec<f64>> = (0..size)
                .map(|_| (0..dim).map(|_| rng.gen_range(-4i32..=4) as f64 * 0.5).collect())
                .collect();
            let solutions: Vec<Vec<f64>> = batch.iter().map(|f| vec![f[0] + 1.0]).collect();

            let ranked = fast.rank_batch(&batch);
            for (fast_score, y) in ranked.scores.iter().zip(&batch) {
                assert_eq!(fast_score.to_bits(), slow.novelty(y).to_bits());
            }
            let flags = fast.commit_batch(&ranked, &solutions, &batch);
            let slow_flags: Vec<bool> =
                solutions.iter().zip(&batch).map(|(s, y)| slow.try_add(s, y)).collect();
            assert_eq!(flags, slow_flags);
            assert_eq!(fast.len(), slow.len());
            assert!(fast.features() == slow.features());
        }
    }

    #[test]
    fn batch_rank_and_commit_match_sequential_queries_and_adds() {
        assert_batch_path_matches_sequential(11, 1, 1, 0.6, 12);
        assert_batch_path_matches_sequential(12, 2, 3, 0.9, 12);
        assert_batch_path_matches_sequential(13, 3, 5, 1.4, 12);
        assert_batch_path_matches_sequential(14, 2, 100, 0.4, 12);
    }

    #[test]
    #[should_panic(expected = "archive changed between ranking and commit")]
    fn stale_ranked_batch_is_rejected() {
        let mut a = NoveltyArchive::new(1, 0.5, 2).unwrap();
        let batch = vec![vec![0.0], vec![2.0]];
        let solutions = batch.clone();
        let ranked = a.rank_batch(&batch);
        a.try_add(&[9.0], &[9.0]);
        a.commit_batch(&ranked, &solutions, &batch);
    }

    proptest::proptest! {
        #[test]
        fn batch_commit_always_equals_sequential_adds(
            seed in proptest::prelude::any::<u64>(),
            dim in 1usize..=3,
            k in 1usize..=4,
            threshold_tenths in 1u32..=25,
        ) {
            assert_batch_path_matches_sequential(
                seed,
                dim,
                k,
                f64::from(threshold_tenths) * 0.1,
                6,
            );
        }
    }
}
