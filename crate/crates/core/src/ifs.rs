//! Self-maps with Lipschitz data, the Barnsley–Hutchinson operator
//! `F(B) = f_1(B) ∪ ... ∪ f_m(B)`, and attractor iteration in the Hausdorff
//! metric.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::continua::{h1_coords, h2_coords, needle_half_coords};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{dist, Point, PointCloud, MAX_DIM};
use crate::metric::hausdorff;
use crate::spatial::Grid;

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_n, hi_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<BoxRegion> {
        check_dim(lo.len(), hi.len())?;
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(Error::Domain("box bounds must be finite".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::Domain("box has lo > hi".into()));
        }
        Ok(BoxRegion { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    pub fn diameter(&self) -> f64 {
        dist(&self.lo, &self.hi)
    }
}

/// How a Lipschitz bound was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LipSource {
    /// Computed from the map's closed form (spectral norm, products).
    Computed,
    /// Supplied by the caller; accepted as an attestation, never verified.
    Declared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipBound {
    pub value: f64,
    pub source: LipSource,
    /// Where the bound is claimed to hold; `None` means everywhere.
    pub region: Option<BoxRegion>,
}

/// Builtin closed-form maps.
#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    Constant(Point),
    /// Conjugate of `x -> x / 2` by the bending map: moves the needle point
    /// over parameter `t` to the one over `t / 2`.
    NeedleHalf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapKind {
    /// `x -> A x + b`, `A` row-major.
    Affine { matrix: Vec<f64>, offset: Vec<f64> },
    NeedleH1 { sharpness: f64 },
    NeedleH2,
    /// Applied first to last.
    Composition(Vec<MapSpec>),
    ClosedForm(Builtin),
}

/// A self-map of `R^n` with optional Lipschitz data.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSpec {
    pub kind: MapKind,
    pub dim: usize,
    pub lip: Option<LipBound>,
    /// Evaluation outside this box is a domain error.
    pub region: Option<BoxRegion>,
}

fn spectral_norm(matrix: &[f64], n: usize) -> f64 {
    let m = nalgebra::DMatrix::from_row_slice(n, n, matrix);
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

fn check_map_dim(dim: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::Domain(format!("map dimension {dim} outside 1..={MAX_DIM}")))
    }
}

impl MapSpec {
    pub fn affine(matrix: Vec<f64>, offset: Vec<f64>) -> Result<MapSpec> {
        let n = offset.len();
        check_map_dim(n)?;
        if matrix.len() != n * n {
            return Err(Error::Input(format!("affine matrix needs {} entries, got {}", n * n, matrix.len())));
        }
        if matrix.iter().chain(&offset).any(|v| !v.is_finite()) {
            return Err(Error::Domain("affine coefficients must be finite".into()));
        }
        let lip = spectral_norm(&matrix, n);
        Ok(MapSpec {
            kind: MapKind::Affine { matrix, offset },
            dim: n,
            lip: Some(LipBound { value: lip, source: LipSource::Computed, region: None }),
            region: None,
        })
    }

    /// `x -> s x + offset`.
    pub fn scaling(s: f64, offset: Vec<f64>) -> Result<MapSpec> {
        let n = offset.len();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = s;
        }
        MapSpec::affine(m, offset)
    }

    pub fn identity(dim: usize) -> Result<MapSpec> {
        MapSpec::scaling(1.0, vec![0.0; dim])
    }

    pub fn needle_h1(dim: usize, sharpness: f64) -> Result<MapSpec> {
        check_map_dim(dim)?;
        if dim < 2 {
            return Err(Error::Domain("needle maps need dimension >= 2".into()));
        }
        if !(sharpness > 0.0 && sharpness.is_finite()) {
            return Err(Error::Domain(format!("sharpness must be positive, got {sharpness}")));
        }
        Ok(MapSpec { kind: MapKind::NeedleH1 { sharpness }, dim, lip: None, region: None })
    }

    pub fn needle_h2(dim: usize) -> Result<MapSpec> {
        check_map_dim(dim)?;
        if dim < 2 {
            return Err(Error::Domain("needle maps need dimension >= 2".into()));
        }
        Ok(MapSpec { kind: MapKind::NeedleH2, dim, lip: None, region: None })
    }

    pub fn needle_half(dim: usize) -> Result<MapSpec> {
        check_map_dim(dim)?;
        if dim < 2 {
            return Err(Error::Domain("needle maps need dimension >= 2".into()));
        }
        Ok(MapSpec { kind: MapKind::ClosedForm(Builtin::NeedleHalf), dim, lip: None, region: None })
    }

    pub fn constant(p: Point) -> MapSpec {
        MapSpec {
            dim: p.dim(),
            kind: MapKind::ClosedForm(Builtin::Constant(p)),
            lip: Some(LipBound { value: 0.0, source: LipSource::Computed, region: None }),
            region: None,
        }
    }

    /// Composition applying `maps` in order. Computed bound is the product
    /// of the parts' bounds when every part carries one.
    pub fn compose(maps: Vec<MapSpec>) -> Result<MapSpec> {
        let dim = maps.first().map(|m| m.dim).ok_or_else(|| Error::Input("empty composition".into()))?;
        for m in &maps {
            check_dim(dim, m.dim)?;
        }
        let lip = maps
            .iter()
            .map(|m| m.lip.as_ref().filter(|l| l.source == LipSource::Computed && l.region.is_none()).map(|l| l.value))
            .collect::<Option<Vec<f64>>>()
            .map(|v| LipBound { value: v.iter().product(), source: LipSource::Computed, region: None });
        Ok(MapSpec { kind: MapKind::Composition(maps), dim, lip, region: None })
    }

    /// Attaches a caller-supplied Lipschitz bound.
    pub fn with_declared_lip(mut self, value: f64, region: Option<BoxRegion>) -> Result<MapSpec> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::Domain(format!("Lipschitz bound must be finite and >= 0, got {value}")));
        }
        self.lip = Some(LipBound { value, source: LipSource::Declared, region });
        Ok(self)
    }

    pub fn with_region(mut self, region: BoxRegion) -> Result<MapSpec> {
        check_dim(self.dim, region.dim())?;
        self.region = Some(region);
        Ok(self)
    }

    pub fn lip_value(&self) -> Option<f64> {
        self.lip.as_ref().map(|l| l.value)
    }

    /// Bound computed from the closed form, if any.
    pub fn certified_lip(&self) -> Option<f64> {
        self.lip.as_ref().filter(|l| l.source == LipSource::Computed).map(|l| l.value)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, MapKind::ClosedForm(Builtin::Constant(_)))
    }

    pub fn eval(&self, x: &Point) -> Result<Point> {
        Point::new(self.apply(x.coords())?)
    }

    /// Formula evaluation on raw coordinates.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        if let Some(r) = &self.region {
            if !r.contains(x) {
                return Err(Error::Domain(format!("{x:?} is outside the map's region")));
            }
        }
        match &self.kind {
            MapKind::Affine { matrix, offset } => {
                let n = self.dim;
                Ok((0..n)
                    .map(|i| offset[i] + (0..n).map(|j| matrix[i * n + j] * x[j]).sum::<f64>())
                    .collect())
            }
            MapKind::NeedleH1 { sharpness } => Ok(h1_coords(x, *sharpness)),
            MapKind::NeedleH2 => h2_coords(x),
            MapKind::Composition(maps) => {
                let mut cur = x.to_vec();
                for m in maps {
                    cur = m.apply(&cur)?;
                }
                Ok(cur)
            }
            MapKind::ClosedForm(Builtin::Constant(p)) => Ok(p.coords().to_vec()),
            MapKind::ClosedForm(Builtin::NeedleHalf) => needle_half_coords(x),
        }
    }

    /// Image of every sample of `cloud`.
    pub fn image(&self, cloud: &PointCloud) -> Result<Vec<f64>> {
        check_dim(self.dim, cloud.dim())?;
        let mut out = Vec::with_capacity(cloud.flat().len());
        for p in cloud.points() {
            out.extend(self.apply(p)?);
        }
        Ok(out)
    }
}

pub fn eval_map(f: &MapSpec, x: &Point) -> Result<Point> {
    f.eval(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    /// Largest sampled ratio `d(f x, f y) / d(x, y)`.
    pub lower: f64,
    /// Present only when the bound follows from the closed form.
    pub certified_upper: Option<f64>,
}

/// Seeded pair sampler: even draws are uniform pairs in the box, odd draws
/// pair a point with a nearby one at a log-uniform scale.
fn sample_pairs(region: &BoxRegion, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diam = region.diameter();
    let uniform = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        region.lo.iter().zip(&region.hi).map(|(a, b)| if a < b { rng.gen_range(*a..=*b) } else { *a }).collect()
    };
    (0..count)
        .map(|s| {
            let x = uniform(&mut rng);
            let y = if s % 2 == 0 {
                uniform(&mut rng)
            } else {
                let scale = diam * 10f64.powf(-rng.gen_range(1.0..6.0));
                x.iter()
                    .zip(region.lo.iter().zip(&region.hi))
                    .map(|(v, (a, b))| (v + scale * rng.gen_range(-1.0..1.0)).clamp(*a, *b))
                    .collect()
            };
            (x, y)
        })
        .collect()
}

/// Empirical lower bound on the Lipschitz constant of `f` over `region`,
/// from `samples` seeded pairs, plus the closed-form bound when one exists.
pub fn lipschitz_estimate(f: &MapSpec, region: &BoxRegion, samples: usize, seed: u64) -> Result<LipschitzEstimate> {
    check_dim(f.dim, region.dim())?;
    if samples < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    if region.diameter() == 0.0 {
        return Err(Error::Domain("degenerate box".into()));
    }
    let pairs = sample_pairs(region, samples, seed);
    let ratios = pairs
        .par_iter()
        .map(|(x, y)| {
            let d = dist(x, y);
            if d == 0.0 {
                return Ok(0.0);
            }
            Ok(dist(&f.apply(x)?, &f.apply(y)?) / d)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(LipschitzEstimate {
        lower: ratios.into_iter().fold(0.0, f64::max),
        certified_upper: f.certified_lip(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IfsMode {
    Strict,
    Weak,
}

/// A finite family of maps on `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct IfsSpec {
    pub maps: Vec<MapSpec>,
    pub mode: IfsMode,
    pub dim: usize,
}

impl IfsSpec {
    /// In strict mode every map must carry a Lipschitz bound below 1.
    pub fn new(maps: Vec<MapSpec>, mode: IfsMode) -> Result<IfsSpec> {
        let dim = maps.first().map(|m| m.dim).ok_or_else(|| Error::Input("an IFS needs at least one map".into()))?;
        for (i, m) in maps.iter().enumerate() {
            check_dim(dim, m.dim)?;
            if mode == IfsMode::Strict {
                match m.lip_value() {
                    Some(l) if l < 1.0 => {}
                    Some(l) => {
                        return Err(Error::Input(format!("map {i} has Lipschitz bound {l} >= 1 in strict mode")))
                    }
                    None => return Err(Error::Input(format!("map {i} has no Lipschitz bound in strict mode"))),
                }
            }
        }
        Ok(IfsSpec { maps, mode, dim })
    }

    /// Largest bound over the maps, `None` when some map has none.
    pub fn lambda_max(&self) -> Option<f64> {
        self.maps.iter().map(MapSpec::lip_value).try_fold(0.0f64, |acc, l| l.map(|l| acc.max(l)))
    }

    /// Bound usable for length arguments: the map's own bound, or 1 for an
    /// unbounded map of a weak-mode system.
    pub fn attested_bound(&self, i: usize) -> Option<f64> {
        self.maps[i].lip_value().or((self.mode == IfsMode::Weak).then_some(1.0))
    }
}

/// Greedy deduplication in input order: a point is dropped when an earlier
/// kept point lies strictly within `tol`.
fn dedup(coords: Vec<f64>, dim: usize, tol: f64) -> Vec<f64> {
    let n = coords.len() / dim;
    if n == 0 || tol <= 0.0 {
        return coords;
    }
    let grid = Grid::build(&coords, dim, tol);
    let mut kept = vec![false; n];
    let mut out = Vec::with_capacity(coords.len());
    for i in 0..n {
        let p = &coords[i * dim..(i + 1) * dim];
        let mut clash = false;
        grid.for_each_within(&coords, p, tol, false, |j, _| {
            if j < i && kept[j] {
                clash = true;
            }
        });
        if !clash {
            kept[i] = true;
            out.extend_from_slice(p);
        }
    }
    out
}

fn hutchinson_with(f: &IfsSpec, b: &PointCloud, dedup_tol: f64) -> Result<Vec<f64>> {
    check_dim(f.dim, b.dim())?;
    let images = f.maps.par_iter().map(|m| m.image(b)).collect::<Result<Vec<_>>>()?;
    Ok(dedup(images.concat(), b.dim(), dedup_tol))
}

/// `F(B)`, deduplicated at half the input pitch. The output pitch is
/// `lambda_max * pitch + pitch / 2` (or `1.5 * pitch` with an unbounded map),
/// the second term accounting for deduplication.
pub fn hutchinson(f: &IfsSpec, b: &PointCloud) -> Result<PointCloud> {
    let delta = b.pitch();
    let coords = hutchinson_with(f, b, delta / 2.0)?;
    let lam = f.lambda_max().unwrap_or(1.0);
    PointCloud::from_flat(b.dim(), coords, lam * delta + delta / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractorRun {
    pub cloud: PointCloud,
    /// `steps[k] = hausdorff(B_k, B_{k+1})`.
    pub steps: Vec<f64>,
    pub converged: bool,
    pub lambda_max: f64,
    /// `tol * lambda / (1 - lambda)`: distance of the result from the true
    /// attractor once the last step fell below `tol`.
    pub error_bound: f64,
}

/// Iterates `B_{k+1} = F(B_k)` until a Hausdorff step falls below `tol`.
///
/// Deduplication runs at half the seed pitch throughout.
pub fn attractor(f: &IfsSpec, seed: &PointCloud, tol: f64, max_iter: usize) -> Result<AttractorRun> {
    if f.mode != IfsMode::Strict {
        return Err(Error::Refused(
            "attractor iteration needs a strict contraction bound; weak systems have no convergence rate".into(),
        ));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let lambda = f.lambda_max().ok_or_else(|| Error::Input("strict IFS without bounds".into()))?;
    let resolution = seed.pitch();
    let mut cur = seed.clone();
    let mut steps = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let coords = hutchinson_with(f, &cur, resolution / 2.0)?;
        let next = PointCloud::from_flat(cur.dim(), coords, resolution)?;
        let step = hausdorff(&cur, &next)?;
        steps.push(step);
        cur = next;
        if step < tol {
            converged = true;
            break;
        }
    }
    Ok(AttractorRun {
        cloud: cur,
        steps,
        converged,
        lambda_max: lambda,
        error_bound: tol * lambda / (1.0 - lambda),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContractionClass {
    /// Every sampled ratio is below `1 - 1e-9`; `lambda` is the largest.
    Strict { lambda: f64 },
    /// Largest sampled ratio within `1e-9` of 1. Weak contraction can only
    /// be refuted by sampling, never confirmed, so this is the weak-candidate
    /// bucket.
    Boundary { max_ratio: f64 },
    /// A sampled pair whose distance grows.
    ExpansionWitness { x: Point, y: Point, ratio: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: ContractionClass,
    pub pairs_examined: usize,
    pub note: &'static str,
}

pub const EXPANSION_MARGIN: f64 = 1e-9;

/// Samples pairs from `domain` and sorts `f` into strict / boundary /
/// expanding. Half the pairs are uniform over the cloud, half join a sample
/// to one of its next few successors in cloud order (useful for clouds
/// sampled along a curve).
pub fn classify_contraction(f: &MapSpec, domain: &PointCloud, pairs: usize, seed: u64) -> Result<Classification> {
    check_dim(f.dim, domain.dim())?;
    if pairs < 1 {
        return Err(Error::Domain("need at least one pair".into()));
    }
    let n = domain.len();
    if n < 2 {
        return Err(Error::Input("need at least two distinct points".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx: Vec<(usize, usize)> = (0..pairs)
        .map(|s| {
            let i = rng.gen_range(0..n);
            let j = if s % 2 == 0 {
                rng.gen_range(0..n)
            } else {
                (i + rng.gen_range(1..=8usize)) % n
            };
            (i, j)
        })
        .collect();
    let results = idx
        .par_iter()
        .map(|&(i, j)| {
            let d = dist(domain.point(i), domain.point(j));
            if d == 0.0 {
                return Ok((0.0, i, j));
            }
            Ok((dist(&f.apply(domain.point(i))?, &f.apply(domain.point(j))?) / d, i, j))
        })
        .collect::<Result<Vec<_>>>()?;
    // First maximal ratio in sampling order.
    let (ratio, i, j) = results
        .iter()
        .copied()
        .fold((f64::NEG_INFINITY, 0, 0), |best, r| if r.0 > best.0 { r } else { best });
    let class = if ratio > 1.0 + EXPANSION_MARGIN {
        ContractionClass::ExpansionWitness { x: domain.to_point(i), y: domain.to_point(j), ratio }
    } else if ratio < 1.0 - EXPANSION_MARGIN {
        ContractionClass::Strict { lambda: ratio }
    } else {
        ContractionClass::Boundary { max_ratio: ratio }
    };
    Ok(Classification {
        class,
        pairs_examined: pairs,
        note: "empirical: verdict covers the sampled pairs only",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sqrt_sin_recip;
    use proptest::prelude::*;
    use rand::Rng;

    fn cloud1(xs: &[f64], pitch: f64) -> PointCloud {
        PointCloud::from_flat(1, xs.to_vec(), pitch).unwrap()
    }

    fn interval_ifs(dim: usize) -> IfsSpec {
        let mut shift = vec![0.0; dim];
        shift[0] = 0.5;
        IfsSpec::new(
            vec![MapSpec::scaling(0.5, vec![0.0; dim]).unwrap(), MapSpec::scaling(0.5, shift).unwrap()],
            IfsMode::Strict,
        )
        .unwrap()
    }

    #[test]
    fn eval_examples() {
        let id = MapSpec::identity(2).unwrap();
        assert_eq!(id.eval(&Point::xy(0.3, -0.2)).unwrap(), Point::xy(0.3, -0.2));
        let half = MapSpec::scaling(0.5, vec![0.0]).unwrap();
        assert_eq!(half.eval(&Point::new(vec![1.0]).unwrap()).unwrap().coords(), &[0.5]);
        let h = MapSpec::compose(vec![MapSpec::needle_h1(2, 100.0).unwrap(), MapSpec::needle_h2(2).unwrap()]).unwrap();
        let y = h.eval(&Point::xy(1.0, 1.0)).unwrap();
        assert_eq!(y.coords()[0], 1.0);
        // sin(1) + 0.01
        assert!((y.coords()[1] - 0.851_470_984_807_896_5).abs() < 1e-15);
        let boxed = MapSpec::identity(2).unwrap().with_region(BoxRegion::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()).unwrap();
        assert!(matches!(boxed.eval(&Point::xy(2.0, 0.0)), Err(Error::Domain(_))));
        assert!(matches!(id.eval(&Point::new(vec![1.0]).unwrap()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn lipschitz_examples() {
        let half = MapSpec::scaling(0.5, vec![0.0, 0.0]).unwrap();
        let unit = BoxRegion::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let e = lipschitz_estimate(&half, &unit, 1000, 1).unwrap();
        assert!(e.lower <= 0.5 + 1e-15);
        assert_eq!(e.certified_upper, Some(0.5));
        let rot = MapSpec::affine(vec![0.6, -0.8, 0.8, 0.6], vec![1.0, 2.0]).unwrap();
        assert!((rot.certified_lip().unwrap() - 1.0).abs() < 1e-12);
        assert!(lipschitz_estimate(&half, &BoxRegion::new(vec![0.5, 0.5], vec![0.5, 0.5]).unwrap(), 10, 1).is_err());
        assert!(lipschitz_estimate(&half, &unit, 1, 1).is_err());
    }

    #[test]
    fn h1_expands_slightly_in_euclidean_norm() {
        // The Jacobian of h1 at (x1, x2) is [[1, 0], [x2/s, x1/s]]; along the
        // x1 direction its stretch is sqrt(1 + (x2/s)^2), so the sup over the
        // box is sqrt(1 + 1e-4) for s = 100.
        let h1 = MapSpec::needle_h1(2, 100.0).unwrap();
        let region = BoxRegion::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        let e = lipschitz_estimate(&h1, &region, 100_000, 3).unwrap();
        assert!(e.lower > 1.0);
        assert!(e.lower <= (1.0 + 1e-4f64).sqrt() * (1.0 + 1e-12));
        assert_eq!(e.certified_upper, None);
    }

    #[test]
    fn hutchinson_examples() {
        let id = IfsSpec::new(vec![MapSpec::identity(1).unwrap()], IfsMode::Weak).unwrap();
        let b = cloud1(&[0.0, 0.25, 1.0], 0.1);
        assert_eq!(hutchinson(&id, &b).unwrap().flat(), b.flat());
        let two = hutchinson(&interval_ifs(1), &cloud1(&[0.0, 1.0], 0.1)).unwrap();
        assert_eq!(two.flat(), &[0.0, 0.5, 1.0]);
        assert!((two.pitch() - (0.05 + 0.05)).abs() < 1e-15);
    }

    #[test]
    fn attractor_interval() {
        let seed = cloud1(&[0.0], 1e-6);
        let run = attractor(&interval_ifs(1), &seed, 1e-4, 100).unwrap();
        assert!(run.converged);
        let uniform = cloud1(&(0..=1000).map(|i| i as f64 / 1000.0).collect::<Vec<_>>(), 1e-3);
        assert!(hausdorff(&run.cloud, &uniform).unwrap() < 1e-3);
        assert!((run.error_bound - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn attractor_constant_map() {
        let q = Point::xy(0.3, 0.7);
        let f = IfsSpec::new(vec![MapSpec::constant(q.clone())], IfsMode::Strict).unwrap();
        let seed = PointCloud::from_points(&[Point::xy(0.0, 0.0), Point::xy(1.0, 1.0)], 0.1).unwrap();
        let run = attractor(&f, &seed, 1e-9, 5).unwrap();
        assert_eq!(run.cloud.flat(), q.coords());
        assert_eq!(run.steps.len(), 2);
        assert_eq!(run.steps[1], 0.0);
    }

    #[test]
    fn attractor_refuses_weak_mode() {
        let f = IfsSpec::new(vec![MapSpec::identity(1).unwrap()], IfsMode::Weak).unwrap();
        assert!(matches!(attractor(&f, &cloud1(&[0.0], 0.1), 1e-3, 5), Err(Error::Refused(_))));
    }

    #[test]
    fn strict_mode_needs_bounds() {
        assert!(IfsSpec::new(vec![MapSpec::identity(2).unwrap()], IfsMode::Strict).is_err());
        assert!(IfsSpec::new(vec![MapSpec::needle_h2(2).unwrap()], IfsMode::Strict).is_err());
        assert!(IfsSpec::new(vec![], IfsMode::Weak).is_err());
    }

    #[test]
    fn classify_examples() {
        let pts: Vec<f64> = (0..200).flat_map(|i| [i as f64 / 200.0, (i as f64 / 30.0).sin()]).collect();
        let cloud = PointCloud::from_flat(2, pts, 0.01).unwrap();
        let half = MapSpec::scaling(0.5, vec![0.0, 0.0]).unwrap();
        match classify_contraction(&half, &cloud, 500, 9).unwrap().class {
            ContractionClass::Strict { lambda } => assert!((lambda - 0.5).abs() < 1e-9),
            c => panic!("{c:?}"),
        }
        let id = MapSpec::identity(2).unwrap();
        assert!(matches!(
            classify_contraction(&id, &cloud, 500, 9).unwrap().class,
            ContractionClass::Boundary { .. }
        ));
        let double = MapSpec::scaling(2.0, vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            classify_contraction(&double, &cloud, 10, 9).unwrap().class,
            ContractionClass::ExpansionWitness { .. }
        ));
        let single = PointCloud::from_points(&[Point::xy(0.0, 0.0)], 0.1).unwrap();
        assert!(classify_contraction(&half, &single, 10, 1).is_err());
    }

    #[test]
    fn needle_half_tracks_the_curve() {
        let g = MapSpec::needle_half(2).unwrap();
        for t in [1.0, 0.3, 0.01] {
            let y = g.eval(&Point::xy(t, sqrt_sin_recip(t))).unwrap();
            assert!((y.coords()[0] - t / 2.0).abs() < 1e-15);
            assert!((y.coords()[1] - sqrt_sin_recip(t / 2.0)).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn hutchinson_is_monotone_and_contracting(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = interval_ifs(2);
            let pitch = 1e-9;
            let mk = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> { (0..2 * n).map(|_| rng.gen_range(0.0..1.0)).collect() };
            let small = mk(&mut rng, 20);
            let mut big = small.clone();
            big.extend(mk(&mut rng, 30));
            let (b1, b2) = (PointCloud::from_flat(2, small, pitch).unwrap(), PointCloud::from_flat(2, big, pitch).unwrap());
            let (i1, i2) = (hutchinson(&f, &b1).unwrap(), hutchinson(&f, &b2).unwrap());
            let key = |p: &[f64]| (p[0].to_bits(), p[1].to_bits());
            let set2: std::collections::HashSet<_> = i2.points().map(key).collect();
            prop_assert!(i1.points().all(|p| set2.contains(&key(p))));
            let lhs = hausdorff(&i1, &i2).unwrap();
            prop_assert!(lhs <= 0.5 * hausdorff(&b1, &b2).unwrap() + 2.0 * pitch);
        }

        #[test]
        fn attractor_forgets_the_seed(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = interval_ifs(1);
            let tol = 1e-3;
            let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let ra = attractor(&f, &cloud1(&a, 1e-7), tol, 60).unwrap();
            let rb = attractor(&f, &cloud1(&b, 1e-7), tol, 60).unwrap();
            prop_assert!(hausdorff(&ra.cloud, &rb.cloud).unwrap() <= 3.0 * tol);
            let lam = ra.lambda_max;
            for w in ra.steps.windows(2) {
                prop_assert!(w[1] <= lam * w[0] + 2.0 * 1e-7);
            }
        }
    }
}
