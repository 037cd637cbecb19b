//! Hausdorff distance between clouds and the epsilon-chain intrinsic metric.
//!
//! For a set `A` and `eps > 0`, the chain distance between `x, y in A` is the
//! infimum of `sum d(x_i, x_{i+1})` over finite sequences in `A` from `x` to
//! `y` whose steps are all strictly shorter than `eps`. On a finite cloud this
//! is a shortest path in the graph joining samples closer than `eps`. The
//! intrinsic distance is the limit as `eps` shrinks, and may be infinite; a
//! [`ChainMetricProfile`] records the approach to that limit.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use log::warn;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::geometry::{Continuum, Point, PointCloud};
use crate::spatial::Grid;

/// Fitted log-log slope at or below which a profile is declared divergent.
pub const DIVERGENCE_SLOPE: f64 = -0.15;
/// Relative change below which two successive profile values agree.
pub const CONVERGENCE_REL: f64 = 0.01;
/// Profiles resample at `pitch = eps / PITCH_RATIO`.
pub const PITCH_RATIO: f64 = 10.0;

fn directed(a: &PointCloud, b: &PointCloud, grid: &Grid) -> f64 {
    a.points().map(|p| grid.nearest(b.flat(), p).1).fold(0.0, f64::max)
}

/// One-sided distance `sup_{a in A} d(a, B)`.
pub fn directed_hausdorff(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let grid = Grid::build(b.flat(), b.dim(), Grid::auto_cell(b.flat(), b.dim()));
    Ok(directed(a, b, &grid))
}

/// Hausdorff distance between two finite clouds, exact for the given samples.
pub fn hausdorff(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let (ab, ba) = rayon::join(|| directed_hausdorff(a, b), || directed_hausdorff(b, a));
    Ok(ab?.max(ba?))
}

/// Hausdorff distance together with a sample realizing it.
pub fn hausdorff_witness(a: &PointCloud, b: &PointCloud) -> Result<(f64, Point)> {
    check_dim(a.dim(), b.dim())?;
    let far = |from: &PointCloud, to: &PointCloud| -> (f64, usize) {
        let grid = Grid::build(to.flat(), to.dim(), Grid::auto_cell(to.flat(), to.dim()));
        from.points()
            .enumerate()
            .map(|(i, p)| (grid.nearest(to.flat(), p).1, i))
            .fold((f64::NEG_INFINITY, 0), |best, c| if c.0 > best.0 { c } else { best })
    };
    let (ab, i) = far(a, b);
    let (ba, j) = far(b, a);
    Ok(if ab >= ba { (ab, a.to_point(i)) } else { (ba, b.to_point(j)) })
}

/// Undirected graph on a cloud joining samples at distance `< epsilon`.
#[derive(Debug, Clone)]
pub struct EpsGraph {
    epsilon: f64,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
}

impl EpsGraph {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.targets[r.clone()].iter().map(|&j| j as usize).zip(self.weights[r].iter().copied())
    }

    /// Edges `(i, j, w)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for i in 0..self.node_count() {
            for (j, w) in self.neighbors(i) {
                if i < j {
                    out.push((i, j, w));
                }
            }
        }
        out
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")))
    }
}

/// All pairs of samples at distance strictly below `epsilon`.
pub fn eps_graph(a: &PointCloud, epsilon: f64) -> Result<EpsGraph> {
    check_epsilon(epsilon)?;
    let grid = Grid::build(a.flat(), a.dim(), epsilon);
    let mut offsets = Vec::with_capacity(a.len() + 1);
    let mut targets = Vec::new();
    let mut weights = Vec::new();
    offsets.push(0);
    let mut row: Vec<(usize, f64)> = Vec::new();
    for i in 0..a.len() {
        row.clear();
        grid.for_each_within(a.flat(), a.point(i), epsilon, false, |j, d| {
            if j != i {
                row.push((j, d));
            }
        });
        row.sort_unstable_by_key(|&(j, _)| j);
        for &(j, d) in &row {
            targets.push(j as u32);
            weights.push(d);
        }
        offsets.push(targets.len());
    }
    Ok(EpsGraph { epsilon, offsets, targets, weights })
}

/// Result of a chain-distance query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainDistance {
    Finite(f64),
    Disconnected,
}

impl ChainDistance {
    pub fn value(self) -> Option<f64> {
        match self {
            ChainDistance::Finite(v) => Some(v),
            ChainDistance::Disconnected => None,
        }
    }

    /// `+inf` for [`ChainDistance::Disconnected`].
    pub fn extended(self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }
}

#[derive(Copy, Clone, PartialEq)]
struct State {
    cost: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Snaps `q` to its nearest sample, failing if that sample is farther than
/// the cloud pitch.
pub fn snap(a: &PointCloud, q: &Point) -> Result<usize> {
    let (i, d) = a.nearest(q.coords())?;
    if d > a.pitch() * (1.0 + 1e-9) {
        return Err(Error::Input(format!(
            "point {:?} is {d:e} from the cloud, farther than its pitch {:e}",
            q.coords(),
            a.pitch()
        )));
    }
    Ok(i)
}

/// Dijkstra on the implicit epsilon graph, stopping when `target` settles.
fn shortest_path(a: &PointCloud, grid: &Grid, epsilon: f64, source: usize, target: usize) -> ChainDistance {
    if source == target {
        return ChainDistance::Finite(0.0);
    }
    let mut best = vec![f64::INFINITY; a.len()];
    let mut heap = BinaryHeap::new();
    best[source] = 0.0;
    heap.push(State { cost: 0.0, node: source });
    while let Some(State { cost, node }) = heap.pop() {
        if node == target {
            return ChainDistance::Finite(cost);
        }
        if cost > best[node] {
            continue;
        }
        grid.for_each_within(a.flat(), a.point(node), epsilon, false, |j, d| {
            let next = cost + d;
            if next < best[j] {
                best[j] = next;
                heap.push(State { cost: next, node: j });
            }
        });
    }
    ChainDistance::Disconnected
}

/// Infimal length of `epsilon`-chains in `a` from `x` to `y`, after snapping
/// both endpoints to their nearest samples.
pub fn chain_distance(a: &PointCloud, x: &Point, y: &Point, epsilon: f64) -> Result<ChainDistance> {
    check_epsilon(epsilon)?;
    check_dim(a.dim(), x.dim())?;
    check_dim(a.dim(), y.dim())?;
    if epsilon < 3.0 * a.pitch() {
        warn!("epsilon {epsilon:e} is below three times the cloud pitch {:e}", a.pitch());
    }
    let grid = Grid::build(a.flat(), a.dim(), epsilon);
    let (sx, sy) = (snap(a, x)?, snap(a, y)?);
    Ok(shortest_path(a, &grid, epsilon, sx, sy))
}

/// Checks `d(x, y, A, eps) >= d(x, y, B, eps)` for `A` a subset of `B`.
pub fn monotonicity_check(a: &PointCloud, b: &PointCloud, x: &Point, y: &Point, epsilon: f64) -> Result<bool> {
    check_dim(a.dim(), b.dim())?;
    let key = |p: &[f64]| -> Vec<u64> { p.iter().map(|v| (v + 0.0).to_bits()).collect() };
    let in_b: HashSet<Vec<u64>> = b.points().map(key).collect();
    if let Some(p) = a.points().find(|p| !in_b.contains(&key(p))) {
        return Err(Error::Input(format!("A is not a subset of B: {p:?} missing")));
    }
    let da = chain_distance(a, x, y, epsilon)?.extended();
    let db = chain_distance(b, x, y, epsilon)?.extended();
    Ok(da >= db - 1e-12)
}

/// One entry of a refinement schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileEntry {
    pub epsilon: f64,
    pub pitch: f64,
    pub value: ChainDistance,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileVerdict {
    Diverges { slope: f64 },
    Converges { limit: f64 },
    Inconclusive { reason: String },
}

/// Chain distances across `eps_k = eps0 * 2^-k`, each on a fresh sample of
/// pitch `eps_k / 10`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMetricProfile {
    pub x: Point,
    pub y: Point,
    pub entries: Vec<ProfileEntry>,
    pub verdict: ProfileVerdict,
}

impl ChainMetricProfile {
    pub fn last_value(&self) -> Option<f64> {
        self.entries.last().and_then(|e| e.value.value())
    }

    pub fn schedule(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.epsilon).collect()
    }
}

/// Least-squares slope of `ln(value)` against `ln(eps)`.
pub fn log_log_slope(entries: &[ProfileEntry]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = entries
        .iter()
        .filter_map(|e| e.value.value().filter(|v| *v > 0.0).map(|v| (e.epsilon.ln(), v.ln())))
        .collect();
    if pts.len() < 2 || pts.len() != entries.len() {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Verdict rule: divergent when the tail slope is at most
/// [`DIVERGENCE_SLOPE`] and the tail values strictly increase; convergent
/// when the last two successive changes are both below [`CONVERGENCE_REL`].
pub fn classify_profile(entries: &[ProfileEntry], k_max: usize) -> ProfileVerdict {
    if let Some(e) = entries.iter().find(|e| e.value == ChainDistance::Disconnected) {
        return ProfileVerdict::Inconclusive {
            reason: format!("disconnected at eps={:e}", e.epsilon),
        };
    }
    let values: Vec<f64> = entries.iter().filter_map(|e| e.value.value()).collect();
    let tail_len = k_max.div_ceil(2).max(2).min(entries.len());
    let tail = &entries[entries.len() - tail_len..];
    let tail_vals = &values[values.len() - tail_len..];
    let slope = log_log_slope(tail);
    let increasing = tail_vals.windows(2).all(|w| w[1] > w[0]);
    if let Some(s) = slope {
        if s <= DIVERGENCE_SLOPE && increasing {
            return ProfileVerdict::Diverges { slope: s };
        }
    }
    if values.len() >= 3 {
        let k = values.len() - 1;
        let rel = |i: usize| (values[i] - values[i - 1]).abs() / values[i].abs().max(f64::MIN_POSITIVE);
        if rel(k) < CONVERGENCE_REL && rel(k - 1) < CONVERGENCE_REL {
            return ProfileVerdict::Converges { limit: values[k] };
        }
    }
    ProfileVerdict::Inconclusive {
        reason: match slope {
            Some(s) => format!("neither divergent nor settled (tail slope {s:.4})"),
            None => "too few usable entries".into(),
        },
    }
}

/// Approximates the intrinsic distance between `x` and `y` on `m` by
/// resampling at each scale of `eps0 * 2^-k`, `k = 0..=k_max`.
pub fn chain_profile<C: Continuum + Sync + ?Sized>(
    m: &C,
    x: &Point,
    y: &Point,
    eps0: f64,
    k_max: usize,
) -> Result<ChainMetricProfile> {
    check_epsilon(eps0)?;
    if k_max < 3 {
        return Err(Error::Domain(format!("k_max must be at least 3, got {k_max}")));
    }
    check_dim(m.dim(), x.dim())?;
    check_dim(m.dim(), y.dim())?;
    let entries = (0..=k_max)
        .into_par_iter()
        .map(|k| {
            let epsilon = eps0 * 0.5f64.powi(k as i32);
            let pitch = epsilon / PITCH_RATIO;
            let cloud = m.refine(pitch)?;
            let value = chain_distance(&cloud, x, y, epsilon)?;
            Ok(ProfileEntry { epsilon, pitch, value })
        })
        .collect::<Result<Vec<_>>>()?;
    let verdict = classify_profile(&entries, k_max);
    Ok(ChainMetricProfile { x: x.clone(), y: y.clone(), entries, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_polyline, ContinuumModel, Polyline};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_cloud(xs: &[f64]) -> PointCloud {
        PointCloud::from_flat(1, xs.to_vec(), 0.4).unwrap()
    }

    fn segment_cloud(delta: f64) -> PointCloud {
        let l = Polyline::new(&[Point::xy(0.0, 0.0), Point::xy(1.0, 0.0)]).unwrap();
        sample_polyline(&l, delta).unwrap()
    }

    fn circle_cloud(delta: f64) -> PointCloud {
        let n = (2.0 * std::f64::consts::PI / delta).ceil() as usize;
        let mut c = Vec::new();
        for i in 0..n {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            c.extend([t.cos(), t.sin()]);
        }
        PointCloud::from_flat(2, c, delta).unwrap()
    }

    #[test]
    fn hausdorff_examples() {
        let a = PointCloud::from_points(&[Point::xy(0.0, 0.0)], 1.0).unwrap();
        let b = PointCloud::from_points(&[Point::xy(3.0, 4.0)], 1.0).unwrap();
        assert_eq!(hausdorff(&a, &b).unwrap(), 5.0);
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        let xs: Vec<f64> = (0..=1000).flat_map(|i| [i as f64 / 1000.0, 0.0]).collect();
        let seg = PointCloud::from_flat(2, xs, 1e-3).unwrap();
        assert!((hausdorff(&seg, &a).unwrap() - 1.0).abs() < 1e-12);
        let one_d = PointCloud::from_flat(1, vec![0.0], 1.0).unwrap();
        assert!(matches!(hausdorff(&seg, &one_d), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn eps_graph_examples() {
        let c = line_cloud(&[0.0, 0.4, 0.8]);
        let g = eps_graph(&c, 0.5).unwrap();
        let e: Vec<_> = g.edges().iter().map(|&(i, j, _)| (i, j)).collect();
        assert_eq!(e, vec![(0, 1), (1, 2)]);
        assert_eq!(eps_graph(&c, 0.41).unwrap().edge_count(), 2);
        assert_eq!(eps_graph(&c, 0.3).unwrap().edge_count(), 0);
        assert_eq!(eps_graph(&c, 0.4).unwrap().edge_count(), 0, "strict inequality");
        assert!(eps_graph(&c, 0.0).is_err());
    }

    #[test]
    fn chain_examples() {
        let c = line_cloud(&[0.0, 0.4, 0.8]);
        let (x, y) = (Point::new(vec![0.0]).unwrap(), Point::new(vec![0.8]).unwrap());
        assert_eq!(chain_distance(&c, &x, &y, 0.3).unwrap(), ChainDistance::Disconnected);
        let v = chain_distance(&c, &x, &y, 0.5).unwrap().value().unwrap();
        assert!((v - 0.8).abs() < 1e-15);
        let far = Point::new(vec![5.0]).unwrap();
        assert!(matches!(chain_distance(&c, &x, &far, 0.5), Err(Error::Input(_))));
    }

    #[test]
    fn chain_on_segment() {
        let delta = 1e-3;
        let c = segment_cloud(delta);
        let v = chain_distance(&c, &Point::xy(0.0, 0.0), &Point::xy(1.0, 0.0), 3.0 * delta).unwrap();
        assert!((v.value().unwrap() - 1.0).abs() <= 2.0 * delta);
    }

    #[test]
    fn chain_on_circle_is_half_circumference() {
        let c = circle_cloud(1e-3);
        let v = chain_distance(&c, &Point::xy(1.0, 0.0), &Point::xy(-1.0, 0.0), 1e-2).unwrap();
        let pi = std::f64::consts::PI;
        assert!((v.value().unwrap() - pi).abs() < 0.01 * pi);
    }

    #[test]
    fn monotonicity_examples() {
        let circle = circle_cloud(1e-2);
        let (x, y) = (Point::xy(1.0, 0.0), Point::xy(-1.0, 0.0));
        assert!(monotonicity_check(&circle, &circle, &x, &y, 0.05).unwrap());
        let chord = PointCloud::from_flat(
            2,
            (0..=200).flat_map(|i| [-1.0 + i as f64 / 100.0, 0.0]).collect(),
            1e-2,
        )
        .unwrap();
        let both = circle.union(&chord).unwrap();
        assert!(monotonicity_check(&circle, &both, &x, &y, 0.05).unwrap());
        let on_circle = chain_distance(&circle, &x, &y, 0.05).unwrap().extended();
        let with_chord = chain_distance(&both, &x, &y, 0.05).unwrap().extended();
        assert!((on_circle - std::f64::consts::PI).abs() < 0.01 * std::f64::consts::PI);
        assert!((with_chord - 2.0).abs() < 1e-9);

        let far = line_cloud(&[0.0, 1.0]);
        let bridged = line_cloud(&[0.0, 0.5, 1.0]);
        let (p, q) = (Point::new(vec![0.0]).unwrap(), Point::new(vec![1.0]).unwrap());
        assert!(monotonicity_check(&far, &bridged, &p, &q, 0.7).unwrap());
        assert!(matches!(monotonicity_check(&bridged, &far, &p, &q, 0.7), Err(Error::Input(_))));
    }

    #[test]
    fn segment_profile_converges() {
        let m = ContinuumModel::segment(Point::xy(0.0, 0.0), Point::xy(1.0, 0.0)).unwrap();
        let p = chain_profile(&m, &Point::xy(0.0, 0.0), &Point::xy(1.0, 0.0), 0.1, 5).unwrap();
        match p.verdict {
            ProfileVerdict::Converges { limit } => {
                let delta = p.entries.last().unwrap().pitch;
                assert!((limit - 1.0).abs() <= 2.0 * delta);
            }
            v => panic!("unexpected verdict {v:?}"),
        }
        for w in p.entries.windows(2) {
            assert!(w[1].epsilon < w[0].epsilon);
            assert!(w[1].pitch <= w[1].epsilon / 10.0);
        }
    }

    #[test]
    fn verdict_rules() {
        let mk = |vals: &[f64]| -> Vec<ProfileEntry> {
            vals.iter()
                .enumerate()
                .map(|(k, &v)| {
                    let epsilon = 0.1 * 0.5f64.powi(k as i32);
                    ProfileEntry { epsilon, pitch: epsilon / 10.0, value: ChainDistance::Finite(v) }
                })
                .collect()
        };
        let growing: Vec<f64> = (0..6).map(|k| 2f64.powf(0.25 * k as f64)).collect();
        match classify_profile(&mk(&growing), 5) {
            ProfileVerdict::Diverges { slope } => assert!((slope + 0.25).abs() < 1e-12),
            v => panic!("{v:?}"),
        }
        let flat = [1.5, 1.2, 1.01, 1.001, 1.0001, 1.0];
        assert_eq!(classify_profile(&mk(&flat), 5), ProfileVerdict::Converges { limit: 1.0 });
        let mut disc = mk(&flat);
        disc[2].value = ChainDistance::Disconnected;
        assert!(matches!(classify_profile(&disc, 5), ProfileVerdict::Inconclusive { .. }));
    }

    fn random_walk_cloud(rng: &mut ChaCha8Rng, n: usize, step: f64) -> PointCloud {
        let mut c = vec![0.0, 0.0];
        for i in 1..n {
            let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let s = rng.gen_range(0.2 * step..step);
            let (x, y) = (c[2 * (i - 1)], c[2 * (i - 1) + 1]);
            c.extend([x + s * t.cos(), y + s * t.sin()]);
        }
        PointCloud::from_flat(2, c, step).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn hausdorff_is_a_metric(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cloud = |rng: &mut ChaCha8Rng| {
                let n = rng.gen_range(1..60);
                let c: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                PointCloud::from_flat(2, c, 0.1).unwrap()
            };
            let (a, b, c) = (cloud(&mut rng), cloud(&mut rng), cloud(&mut rng));
            let ab = hausdorff(&a, &b).unwrap();
            prop_assert_eq!(ab, hausdorff(&b, &a).unwrap());
            prop_assert!(ab <= hausdorff(&a, &c).unwrap() + hausdorff(&c, &b).unwrap() + 1e-12);
        }

        #[test]
        fn graph_matches_brute_force(seed in 0u64..1000, eps in 0.05f64..0.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c: Vec<f64> = (0..80).map(|_| rng.gen_range(0.0..1.0)).collect();
            let cloud = PointCloud::from_flat(2, c, 0.1).unwrap();
            let got: Vec<(usize, usize)> = eps_graph(&cloud, eps).unwrap().edges().iter().map(|e| (e.0, e.1)).collect();
            let mut want = Vec::new();
            for i in 0..cloud.len() {
                for j in i + 1..cloud.len() {
                    if crate::geometry::dist(cloud.point(i), cloud.point(j)) < eps {
                        want.push((i, j));
                    }
                }
            }
            prop_assert_eq!(got, want);
        }

        #[test]
        fn chain_bounds_and_monotone_in_eps(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cloud = random_walk_cloud(&mut rng, 150, 0.05);
            let (x, y) = (cloud.to_point(0), cloud.to_point(cloud.len() - 1));
            let mut prev = f64::INFINITY;
            for eps in [0.051, 0.08, 0.15, 0.3] {
                let v = chain_distance(&cloud, &x, &y, eps).unwrap().extended();
                prop_assert!(v >= x.distance(&y) - 1e-12);
                prop_assert!(v <= prev + 1e-12);
                prev = v;
            }
        }
    }
}
