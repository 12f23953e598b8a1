//! Continuous density estimation over feature space.
//!
//! The estimator of record is a kernel density estimate over a snapshot
//! of buffered features,
//!
//! ```text
//! D(y; X) = 1 / (|X| * h) * sum over y' in X of K(|y - y'| / h)
//! ```
//!
//! with Euclidean distance, bandwidth `h`, and a kernel `K` bounded in
//! [0, 1]. The kernel is applied to the scalar distance (isotropic), not
//! per coordinate. The same module hosts the novelty score (mean distance
//! to the k nearest reference points) because the two share the ranking
//! contract: any estimator implementing [`DensityEstimator`] can drive
//! the density-descent algorithm.

use crate::buffer::FeatureBuffer;
use crate::{dist_sq, Error, FeatureSet, Result};
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Exponent below which a Gaussian kernel term underflows f64 and is
/// skipped. exp(-t) for t > 745 is at most one denormal step from zero.
const GAUSSIAN_UNDERFLOW_EXPONENT: f64 = 745.0;

/// Smoothing kernel applied to normalized distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// `K(u) = exp(-u^2 / 2)`, unnormalized so that `K(0) = 1`.
    ///
    /// Density rankings are invariant to positive scaling, and the
    /// missing `1/sqrt(2*pi)` keeps the kernel inside [0, 1], which is
    /// the hypothesis of the stability bound `1 / (|X| * h)`.
    Gaussian,
    /// `K(u) = max(0, 1 - |u|)`, zero outside the unit interval.
    Triangular,
}

impl Kernel {
    /// Evaluates the kernel at a normalized distance `u >= 0`.
    pub fn evaluate(&self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-u * u / 2.0).exp(),
            Kernel::Triangular => (1.0 - u.abs()).max(0.0),
        }
    }

    /// Kernel value from a squared raw distance and bandwidth, skipping
    /// the square root (Gaussian) and underflowed terms.
    #[inline]
    fn from_dist_sq(&self, d2: f64, h: f64) -> f64 {
        match self {
            Kernel::Gaussian => {
                let t = d2 / (2.0 * h * h);
                if t > GAUSSIAN_UNDERFLOW_EXPONENT {
                    0.0
                } else {
                    (-t).exp()
                }
            }
            Kernel::Triangular => (1.0 - d2.sqrt() / h).max(0.0),
        }
    }
}

/// Anything that can score features by estimated density.
///
/// `query` must be deterministic between `refresh` calls, never negative,
/// and never NaN. The indirection exists so that estimators other than
/// the KDE (for example a learned density model) can drive the same
/// search loop.
pub trait DensityEstimator {
    /// Estimated density at `feature`.
    fn query(&self, feature: &[f64]) -> Result<f64>;
    /// Replaces the working snapshot with the buffer's current contents.
    fn refresh(&mut self, buffer: &FeatureBuffer);
    /// True once the estimator has a non-empty snapshot.
    fn is_ready(&self) -> bool;
}

/// Kernel density estimator over an immutable feature snapshot.
#[derive(Debug, Clone)]
pub struct KdeEstimator {
    bandwidth: f64,
    kernel: Kernel,
    snapshot: FeatureSet,
}

impl KdeEstimator {
    /// Creates an estimator with an empty snapshot.
    pub fn new(dim: usize, bandwidth: f64, kernel: Kernel) -> Result<Self> {
        if !(bandwidth > 0.0) {
            return Err(Error::InvalidArgument("bandwidth must be positive"));
        }
        Ok(Self { bandwidth, kernel, snapshot: FeatureSet::new(dim) })
    }

    /// Bandwidth `h` in feature units.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Kernel in use.
    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    /// Replaces the snapshot directly, bypassing the buffer.
    pub fn set_snapshot(&mut self, snapshot: FeatureSet) {
        self.snapshot = snapshot;
    }

    /// The snapshot the estimator currently queries against.
    pub fn snapshot(&self) -> &FeatureSet {
        &self.snapshot
    }
}

impl DensityEstimator for KdeEstimator {
    fn query(&self, feature: &[f64]) -> Result<f64> {
        if self.snapshot.is_empty() {
            return Err(Error::EmptyEstimator);
        }
        if feature.len() != self.snapshot.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.snapshot.dim(),
                actual: feature.len(),
            });
        }
        if feature.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidFeature);
        }
        let h = self.bandwidth;
        let mut sum = 0.0;
        for point in self.snapshot.iter() {
            sum += self.kernel.from_dist_sq(dist_sq(feature, point), h);
        }
        Ok(sum / (self.snapshot.len() as f64 * h))
    }

    fn refresh(&mut self, buffer: &FeatureBuffer) {
        self.snapshot = buffer.snapshot();
    }

    fn is_ready(&self) -> bool {
        !self.snapshot.is_empty()
    }
}

/// Bandwidth preserving KDE values under the affine feature transform
/// `y = scale * x + shift`: if `x` used bandwidth `h`, the transformed
/// data needs `scale * h`.
pub fn convert_bandwidth(h: f64, scale: f64) -> f64 {
    debug_assert!(h > 0.0 && scale > 0.0, "bandwidth and scale must be positive");
    h * scale
}

/// Mean Euclidean distance from `y` to its `min(k, |reference|)` nearest
/// neighbors in `reference`.
///
/// Distance ties are broken by insertion order, which keeps the selected
/// neighbor set deterministic. An empty reference returns infinity
/// ("maximally novel") so that a bootstrapping archive always accepts its
/// first entry. `k` larger than the reference uses every point.
pub fn novelty_score(y: &[f64], reference: &FeatureSet, k: usize) -> f64 {
    assert!(k > 0, "neighbor count must be positive");
    if reference.is_empty() {
        return f64::INFINITY;
    }
    novelty_from_sorted(&nearest_k_sq(y, reference, k))
}

/// Total order on `(squared distance, insertion index)` pairs: nearer
/// first, exact distance ties broken toward the earlier point.
#[inline]
fn by_dist_then_order(a: &(f64, u32), b: &(f64, u32)) -> core::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `min(k, |reference|)` nearest reference points to `y`, returned
/// as `(squared distance, insertion index)` pairs sorted ascending with
/// distance ties broken by insertion order.
///
/// A bounded max-heap keeps the scan at one comparison per non-improving
/// point and never materializes the full distance list. Scans dispatch
/// on the dimension so the distance arithmetic unrolls and vectorizes.
pub(crate) fn nearest_k_sq(y: &[f64], reference: &FeatureSet, k: usize) -> Vec<(f64, u32)> {
    debug_assert!(k > 0);
    match reference.dim() {
        1 => nearest_k_scan::<1>(y, reference, k),
        2 => nearest_k_scan::<2>(y, reference, k),
        3 => nearest_k_scan::<3>(y, reference, k),
        4 => nearest_k_scan::<4>(y, reference, k),
        5 => nearest_k_scan::<5>(y, reference, k),
        6 => nearest_k_scan::<6>(y, reference, k),
        7 => nearest_k_scan::<7>(y, reference, k),
        8 => nearest_k_scan::<8>(y, reference, k),
        9 => nearest_k_scan::<9>(y, reference, k),
        10 => nearest_k_scan::<10>(y, reference, k),
        11 => nearest_k_scan::<11>(y, reference, k),
        12 => nearest_k_scan::<12>(y, reference, k),
        _ => nearest_k_scan_dyn(y, reference, k),
    }
}

/// Scan specialized to a compile-time dimension. Points are processed
/// four per block so the compiler can pack the distance arithmetic;
/// every point's accumulation still runs in dimension order, making the
/// result bit-identical to [`nearest_k_scan_dyn`].
///
/// Blocks are visited newest-first: search loops query near recently
/// inserted points, so starting from the tail tightens the admission
/// bound after one compaction and the rest of the scan stays cheap.
fn nearest_k_scan<const M: usize>(y: &[f64], reference: &FeatureSet, k: usize) -> Vec<(f64, u32)> {
    let q: &[f64; M] = y.try_into().expect("query dimension matches dispatch");
    let mut keep = KBest::new(k.min(reference.len()));
    let mut blocks = reference.flat().rchunks_exact(4 * M);
    let mut base = reference.len() as u32;
    for block in blocks.by_ref() {
        base -= 4;
        let mut d2 = [0.0f64; 4];
        for lane in 0..4 {
            let mut acc = 0.0;
            for d in 0..M {
                let t = q[d] - block[lane * M + d];
                acc += t * t;
            }
            d2[lane] = acc;
        }
        for lane in 0..4 {
            keep.offer(d2[lane], base + lane as u32);
        }
    }
    for (i, point) in blocks.remainder().chunks_exact(M).enumerate() {
        let mut acc = 0.0;
        for d in 0..M {
            let t = q[d] - point[d];
            acc += t * t;
        }
        keep.offer(acc, i as u32);
    }
    keep.into_sorted()
}

/// Fallback scan for dimensions without a specialized instantiation.
fn nearest_k_scan_dyn(y: &[f64], reference: &FeatureSet, k: usize) -> Vec<(f64, u32)> {
    let m = reference.dim();
    let mut keep = KBest::new(k.min(reference.len()));
    for (block, point) in reference.flat().rchunks_exact(m).enumerate() {
        let index = reference.len() - 1 - block;
        keep.offer(dist_sq(y, point), index as u32);
    }
    keep.into_sorted()
}

/// Collector of the `k` smallest `(squared distance, index)` entries of
/// a scan, under distance-then-index order.
///
/// Admitted entries go into an unsorted buffer of capacity `2k`; when it
/// fills, a selection pass keeps the best `k` and tightens the admission
/// threshold. Appending beats a binary heap here because an improving
/// point costs O(1) amortized instead of a sift, which matters when
/// queries are clustered near recent reference points and improvements
/// are frequent.
struct KBest {
    buf: Vec<(f64, u32)>,
    k: usize,
    /// Admission bound: squared distance of the k-th best entry as of
    /// the last compaction, infinite until then. Points beyond `tau`
    /// cannot rank among the k smallest under distance-then-index order,
    /// and points tying it are admitted and resolved by the compaction's
    /// total order, so the selection is independent of scan order.
    tau: f64,
}

impl KBest {
    fn new(k: usize) -> Self {
        Self { buf: Vec::with_capacity(2 * k), k, tau: f64::INFINITY }
    }

    #[inline]
    fn offer(&mut self, d2: f64, index: u32) {
        if d2 <= self.tau {
            self.buf.push((d2, index));
            if self.buf.len() == 2 * self.k {
                self.compact();
            }
        }
    }

    fn compact(&mut self) {
        self.buf.select_nth_unstable_by(self.k - 1, by_dist_then_order);
        self.buf.truncate(self.k);
        self.tau = self.buf[self.k - 1].0;
    }

    fn into_sorted(mut self) -> Vec<(f64, u32)> {
        if self.buf.len() > self.k {
            self.compact();
        }
        self.buf.sort_unstable_by(by_dist_then_order);
        self.buf
    }
}

/// Mean Euclidean distance over an ascending `(squared distance, index)`
/// neighbor list. Summation follows list order so equal neighbor sets
/// give bit-equal scores.
pub(crate) fn novelty_from_sorted(neighbors: &[(f64, u32)]) -> f64 {
    let sum: f64 = neighbors.iter().map(|(d2, _)| d2.sqrt()).sum();
    sum / neighbors.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn uniform_set(rng: &mut ChaCha12Rng, n: usize, dim: usize, lo: f64, hi: f64) -> FeatureSet {
        let mut set = FeatureSet::with_capacity(dim, n);
        for _ in 0..n {
            let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(lo..hi)).collect();
            set.push(&p);
        }
        set
    }

    fn rank_indices(values: &[f64]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        order
    }

    /// Independent summation path: explicit distance, then the public
    /// scalar kernel.
    fn brute_force_kde(y: &[f64], set: &FeatureSet, h: f64, kernel: Kernel) -> f64 {
        let mut sum = 0.0;
        for p in set.iter() {
            let dist = dist_sq(y, p).sqrt();
            sum += kernel.evaluate(dist / h);
        }
        sum / (set.len() as f64 * h)
    }

    #[test]
    fn kernels_peak_at_one() {
        assert_eq!(Kernel::Gaussian.evaluate(0.0), 1.0);
        assert_eq!(Kernel::Triangular.evaluate(0.0), 1.0);
    }

    #[test]
    fn specialized_neighbor_scans_match_the_generic_scan_bitwise() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for dim in 1..=8 {
            for &n in &[1usize, 3, 7, 101] {
                // Lattice coordinates force exact distance ties.
                let mut set = FeatureSet::with_capacity(dim, n);
                for _ in 0..n {
                    let p: Vec<f64> =
                        (0..dim).map(|_| rng.gen_range(-6i32..=6) as f64 * 0.25).collect();
                    set.push(&p);
                }
                for k in [1usize, 2, 5, 150] {
                    for _ in 0..20 {
                        let y: Vec<f64> =
                            (0..dim).map(|_| rng.gen_range(-6i32..=6) as f64 * 0.25).collect();
                        let fast = nearest_k_sq(&y, &set, k);
                        let slow = nearest_k_scan_dyn(&y, &set, k);
                        assert_eq!(fast.len(), slow.len());
                        for (a, b) in fast.iter().zip(&slow) {
                            assert_eq!(a.0.to_bits(), b.0.to_bits());
                            assert_eq!(a.1, b.1);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn triangular_kernel_vanishes_outside_unit_support() {
        assert_eq!(Kernel::Triangular.evaluate(1.0), 0.0);
        assert_eq!(Kernel::Triangular.evaluate(2.5), 0.0);
    }

    #[test]
    fn singleton_snapshot_at_probe_gives_one() {
        let mut est = KdeEstimator::new(2, 1.0, Kernel::Triangular).unwrap();
        let mut set = FeatureSet::new(2);
        set.push(&[0.0, 0.0]);
        est.set_snapshot(set);
        assert_eq!(est.query(&[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn probe_on_triangular_support_edge_gives_zero() {
        let mut est = KdeEstimator::new(2, 1.0, Kernel::Triangular).unwrap();
        let mut set = FeatureSet::new(2);
        set.push(&[0.0, 0.0]);
        set.push(&[2.0, 0.0]);
        est.set_snapshot(set);
        assert_eq!(est.query(&[1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn empty_snapshot_query_errors() {
        let est = KdeEstimator::new(2, 1.0, Kernel::Gaussian).unwrap();
        assert_eq!(est.query(&[0.0, 0.0]), Err(Error::EmptyEstimator));
        assert!(!est.is_ready());
    }

    #[test]
    fn nonpositive_bandwidth_rejected() {
        assert!(KdeEstimator::new(2, 0.0, Kernel::Gaussian).is_err());
        assert!(KdeEstimator::new(2, -1.0, Kernel::Gaussian).is_err());
    }

    #[test]
    fn query_matches_brute_force_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let set = uniform_set(&mut rng, 50, 2, 0.0, 1.0);
        let mut est = KdeEstimator::new(2, 0.1, Kernel::Gaussian).unwrap();
        est.set_snapshot(set.clone());
        for _ in 0..100 {
            let y = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let expect = brute_force_kde(&y, &set, 0.1, Kernel::Gaussian);
            let got = est.query(&y).unwrap();
            assert!(
                (got - expect).abs() <= 1e-12,
                "kde {got} vs oracle {expect}"
            );
        }
    }

    #[test]
    fn doubling_snapshot_with_distant_point_halves_density() {
        let mut est = KdeEstimator::new(1, 1.0, Kernel::Triangular).unwrap();
        let mut one = FeatureSet::new(1);
        one.push(&[0.0]);
        est.set_snapshot(one);
        let before = est.query(&[0.0]).unwrap();
        let mut two = FeatureSet::new(1);
        two.push(&[0.0]);
        two.push(&[1e9]);
        est.set_snapshot(two);
        let after = est.query(&[0.0]).unwrap();
        assert!((after - before / 2.0).abs() < 1e-15);
    }

    #[test]
    fn converted_bandwidth_tracks_affine_transforms() {
        // Mapping features by y = a*x + b and the bandwidth by a*h
        // turns the estimate into the pushforward density: the kernel
        // sums agree exactly and only the 1/h normalization picks up
        // the Jacobian factor, so a * D'(a*x + b) = D(x) and density
        // rankings are untouched.
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let set = uniform_set(&mut rng, 40, 2, -1.0, 1.0);
        let (a, b) = (3.7, [5.0, -2.0]);
        let mut mapped = FeatureSet::new(2);
        for p in set.iter() {
            mapped.push(&[a * p[0] + b[0], a * p[1] + b[1]]);
        }
        let h = 0.4;
        let mut est = KdeEstimator::new(2, h, Kernel::Gaussian).unwrap();
        est.set_snapshot(set);
        let mut est_mapped =
            KdeEstimator::new(2, convert_bandwidth(h, a), Kernel::Gaussian).unwrap();
        est_mapped.set_snapshot(mapped);
        let mut originals = Vec::new();
        let mut transformed = Vec::new();
        for _ in 0..50 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let lhs = est.query(&x).unwrap();
            let rhs = est_mapped.query(&[a * x[0] + b[0], a * x[1] + b[1]]).unwrap();
            assert!((lhs - a * rhs).abs() <= 1e-9, "affine mismatch {lhs} vs {}", a * rhs);
            originals.push(lhs);
            transformed.push(rhs);
        }
        let by_original = rank_indices(&originals);
        let by_transformed = rank_indices(&transformed);
        assert_eq!(by_original, by_transformed);
    }

    #[test]
    fn novelty_of_midpoint_is_mean_distance() {
        let mut set = FeatureSet::new(2);
        set.push(&[0.0, 0.0]);
        set.push(&[2.0, 0.0]);
        assert_eq!(novelty_score(&[1.0, 0.0], &set, 2), 1.0);
    }

    #[test]
    fn novelty_matches_a_full_sort_oracle_bitwise() {
        let full_sort_novelty = |y: &[f64], set: &FeatureSet, k: usize| -> f64 {
            let mut all: Vec<(f64, u32)> = set
                .iter()
                .enumerate()
                .map(|(i, p)| (dist_sq(y, p), i as u32))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            all.truncate(k);
            let sum: f64 = all.iter().map(|(d2, _)| d2.sqrt()).sum();
            sum / all.len() as f64
        };
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for dim in [1usize, 2, 5, 7] {
            for &n in &[1usize, 5, 73, 512] {
                // Half the sets live on a lattice to force distance ties.
                for lattice in [false, true] {
                    let set = if lattice {
                        let mut s = FeatureSet::with_capacity(dim, n);
                        for _ in 0..n {
                            let p: Vec<f64> =
                                (0..dim).map(|_| rng.gen_range(-3i32..=3) as f64).collect();
                            s.push(&p);
                        }
                        s
                    } else {
                        uniform_set(&mut rng, n, dim, -4.0, 4.0)
                    };
                    for k in [1usize, 2, 37, 100, 1000] {
                        for _ in 0..5 {
                            let y: Vec<f64> =
                                (0..dim).map(|_| rng.gen_range(-3i32..=3) as f64).collect();
                            let got = novelty_score(&y, &set, k);
                            let want = full_sort_novelty(&y, &set, k);
                            assert_eq!(got.to_bits(), want.to_bits());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn novelty_of_member_with_single_neighbor_is_zero() {
        let mut set = FeatureSet::new(2);
        set.push(&[0.5, 0.5]);
        set.push(&[3.0, 3.0]);
        assert_eq!(novelty_score(&[0.5, 0.5], &set, 1), 0.0);
    }

    #[test]
    fn novelty_with_empty_reference_is_infinite() {
        let set = FeatureSet::new(2);
        assert_eq!(novelty_score(&[0.0, 0.0], &set, 5), f64::INFINITY);
    }

    #[test]
    fn novelty_k_beyond_reference_uses_all_points() {
        let mut set = FeatureSet::new(1);
        set.push(&[1.0]);
        set.push(&[-1.0]);
        assert_eq!(novelty_score(&[0.0], &set, 100), 1.0);
    }

    #[test]
    fn novelty_descending_matches_kde_ascending_with_full_support() {
        // Triangular kernel with h covering the whole box makes the KDE
        // an affine function of mean distance; rankings must coincide
        // exactly and the values satisfy D = (1 - rho/h) / h when k = |B|.
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..50 {
            let set = uniform_set(&mut rng, 30, 2, 0.0, 1.0);
            let h = 2f64.sqrt();
            let mut est = KdeEstimator::new(2, h, Kernel::Triangular).unwrap();
            est.set_snapshot(set.clone());
            let probes = uniform_set(&mut rng, 8, 2, 0.0, 1.0);
            let scored: Vec<(f64, f64)> = probes
                .iter()
                .map(|y| (novelty_score(y, &set, set.len()), est.query(y).unwrap()))
                .collect();
            for (rho, d) in &scored {
                let identity = (1.0 - rho / h) / h;
                assert!((d - identity).abs() < 1e-12, "kde {d} vs 1-rho form {identity}");
            }
            let mut by_novelty: Vec<usize> = (0..scored.len()).collect();
            by_novelty.sort_by(|&i, &j| {
                scored[j].0.total_cmp(&scored[i].0).then(i.cmp(&j))
            });
            let mut by_density: Vec<usize> = (0..scored.len()).collect();
            by_density.sort_by(|&i, &j| {
                scored[i].1.total_cmp(&scored[j].1).then(i.cmp(&j))
            });
            assert_eq!(by_novelty, by_density, "rank permutations diverged");
        }
    }

    #[test]
    fn swapping_one_element_shifts_density_at_most_inverse_nh() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for &n in &[10usize, 100] {
            for &h in &[0.1, 1.0] {
                let set = uniform_set(&mut rng, n, 2, 0.0, 1.0);
                let mut swapped = set.clone();
                let victim = rng.gen_range(0..n);
                let replacement = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
                swapped.set_point(victim, &replacement);
                let mut a = KdeEstimator::new(2, h, Kernel::Gaussian).unwrap();
                a.set_snapshot(set);
                let mut b = KdeEstimator::new(2, h, Kernel::Gaussian).unwrap();
                b.set_snapshot(swapped);
                let bound = 1.0 / (n as f64 * h);
                for _ in 0..500 {
                    let y = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
                    let delta = (a.query(&y).unwrap() - b.query(&y).unwrap()).abs();
                    assert!(delta <= bound + 1e-15, "stability violated: {delta} > {bound}");
                }
            }
        }
    }

    #[test]
    fn adding_one_element_shifts_novelty_at_most_diameter_over_k() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let w = 2f64.sqrt(); // diameter of the unit box
        for &k in &[1usize, 10] {
            let n = k + rng.gen_range(5..40);
            let set = uniform_set(&mut rng, n, 2, 0.0, 1.0);
            let mut grown = set.clone();
            grown.push(&[rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]);
            let bound = w / k as f64;
            for _ in 0..500 {
                let y = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
                let delta = (novelty_score(&y, &set, k) - novelty_score(&y, &grown, k)).abs();
                assert!(delta <= bound + 1e-15, "stability violated: {delta} > {bound}");
            }
        }
    }

    proptest! {
        #[test]
        fn kernel_values_stay_in_unit_interval(u in 0.0..1e6f64) {
            let g = Kernel::Gaussian.evaluate(u);
            let t = Kernel::Triangular.evaluate(u);
            prop_assert!((0.0..=1.0).contains(&g));
            prop_assert!((0.0..=1.0).contains(&t));
        }

        #[test]
        fn query_bounded_by_kernel_sup_over_bandwidth(
            seed in 0u64..1000,
            h in 0.05f64..20.0,
            n in 1usize..60,
        ) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let set = uniform_set(&mut rng, n, 2, -5.0, 5.0);
            for &kernel in &[Kernel::Gaussian, Kernel::Triangular] {
                let mut est = KdeEstimator::new(2, h, kernel).unwrap();
                est.set_snapshot(set.clone());
                let y = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
                let q = est.query(&y).unwrap();
                prop_assert!(q >= 0.0 && q <= 1.0 / h + 1e-12);
            }
        }
    }
}
