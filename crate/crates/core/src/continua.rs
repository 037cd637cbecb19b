//! The two model spaces: the needle embedding `h = h2 ∘ h1` of a continuum
//! touching the hyperplane `x1 = 0` at the origin, and the zigzag fan `P`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    cartesian_to_polar, polar_to_cartesian, sample_parametric, self_intersection, sqrt_sin_recip, Continuum,
    ContinuumModel, Point, PointCloud, Polyline,
};

/// Default flattening constant of `h1`.
pub const DEFAULT_SHARPNESS: f64 = 100.0;

/// `(x1, x2, ..., xn) -> (x1, x1 x2 / s, ..., x1 xn / s)`.
pub fn h1_coords(x: &[f64], sharpness: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    out.push(x[0]);
    out.extend(x[1..].iter().map(|v| x[0] / sharpness * v));
    out
}

/// `(x1, x2, ...) -> (x1, sqrt(x1) sin(1/x1) + x2, x3, ...)`, with the shift
/// extended by 0 at `x1 = 0`.
pub fn h2_coords(x: &[f64]) -> Result<Vec<f64>> {
    if x[0] < 0.0 {
        return Err(Error::Domain(format!("h2 needs x1 >= 0, got {}", x[0])));
    }
    let mut out = x.to_vec();
    out[1] += sqrt_sin_recip(x[0]);
    Ok(out)
}

/// `h2 ∘ (x -> x / 2) ∘ h2^{-1}`.
pub fn needle_half_coords(x: &[f64]) -> Result<Vec<f64>> {
    if x[0] < 0.0 {
        return Err(Error::Domain(format!("needle_half needs x1 >= 0, got {}", x[0])));
    }
    let mut out: Vec<f64> = x.iter().map(|v| v / 2.0).collect();
    out[1] = sqrt_sin_recip(x[0] / 2.0) + (x[1] - sqrt_sin_recip(x[0])) / 2.0;
    Ok(out)
}

pub fn needle_h1(x: &Point, sharpness: f64) -> Result<Point> {
    if x.dim() < 2 {
        return Err(Error::Domain("h1 needs dimension >= 2".into()));
    }
    Point::new(h1_coords(x.coords(), sharpness))
}

pub fn needle_h2(x: &Point) -> Result<Point> {
    if x.dim() < 2 {
        return Err(Error::Domain("h2 needs dimension >= 2".into()));
    }
    Point::new(h2_coords(x.coords())?)
}

/// `h = h2 ∘ h1`.
pub fn needle_h(x: &[f64], sharpness: f64) -> Result<Vec<f64>> {
    h2_coords(&h1_coords(x, sharpness))
}

/// Below this abscissa one oscillation of `sin(1/x)` spans less than `delta`
/// horizontally, so the graph fills its envelope at resolution `delta`.
pub fn tip_cutoff(delta: f64) -> f64 {
    (delta / (2.0 * PI)).sqrt().min(1.0)
}

/// The image `h(C)` of a base continuum `C` in `[0,1] x [-1,1]^{n-1}` that
/// meets `x1 = 0` only at the origin `p`.
#[derive(Debug, Clone)]
pub struct NeedleModel {
    pub base: ContinuumModel,
    pub sharpness: f64,
    /// Polyline view of `h(C)` at the build pitch; runs reaching the tip are
    /// closed by a segment to `h(p)`.
    pub image: ContinuumModel,
    pub dim: usize,
}

/// The segment `[0,1] x {0}^{n-1}`, marked "p" at the origin and "q" at the
/// far end.
pub fn default_base(dim: usize) -> Result<ContinuumModel> {
    if dim < 2 {
        return Err(Error::Domain("the needle needs dimension >= 2".into()));
    }
    let p = Point::origin(dim);
    let mut q = vec![0.0; dim];
    q[0] = 1.0;
    let q = Point::new(q)?;
    let line = Polyline::new(&[p.clone(), q.clone()])?;
    ContinuumModel::new(
        vec![("base".into(), line)],
        BTreeMap::from([("p".to_string(), p), ("q".to_string(), q)]),
    )
}

fn check_normalized(base: &ContinuumModel) -> Result<()> {
    let dim = base.dim();
    if dim < 2 {
        return Err(Error::Domain("the needle needs dimension >= 2".into()));
    }
    let mut touches_origin = false;
    for (name, piece) in base.pieces() {
        for v in piece.vertices() {
            let inside = v[0] >= 0.0 && v[0] <= 1.0 && v[1..].iter().all(|c| c.abs() <= 1.0);
            if !inside {
                return Err(Error::Input(format!("base piece {name} leaves [0,1]x[-1,1]^(n-1) at {v:?}")));
            }
            if v[0] == 0.0 {
                if v.iter().any(|c| *c != 0.0) {
                    return Err(Error::Input(format!("base piece {name} meets x1 = 0 away from p at {v:?}")));
                }
                touches_origin = true;
            }
        }
        // x1 is linear along each segment, so a zero can only sit at a vertex
        // unless a whole segment lies in the hyperplane (caught above).
    }
    if !touches_origin {
        return Err(Error::Input("base does not contain p = origin as a vertex".into()));
    }
    Ok(())
}

/// A sampled stretch of `h(C)` and whether it was cut at the tip cutoff at
/// its start or end.
struct Run {
    coords: Vec<f64>,
    clipped_start: bool,
    clipped_end: bool,
}

/// Samples `h` along every base segment where `x1 >= cutoff`.
fn curve_runs(base: &ContinuumModel, sharpness: f64, delta: f64, cutoff: f64) -> Vec<Run> {
    let dim = base.dim();
    let mut runs = Vec::new();
    for (_, piece) in base.pieces() {
        let mut current: Option<Run> = None;
        for i in 1..piece.vertex_count() {
            let (a, b) = (piece.vertex(i - 1).to_vec(), piece.vertex(i).to_vec());
            let len = crate::geometry::dist(&a, &b);
            let (x0, x1) = (a[0], b[0]);
            if x0 < cutoff && x1 < cutoff {
                continue;
            }
            // x1 is linear in the arc-length parameter s.
            let cut = len * (cutoff - x0) / (x1 - x0);
            let s0 = if x0 < cutoff { cut } else { 0.0 };
            let s1 = if x1 < cutoff { cut } else { len };
            let at = |s: f64| -> Vec<f64> {
                let t = s / len;
                let x: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u + t * (v - u)).collect();
                needle_h(&x, sharpness).expect("x1 positive on the sampled window")
            };
            let pts = sample_parametric(at, s0, s1, delta, dim);
            let run = current.get_or_insert_with(|| Run {
                coords: Vec::new(),
                clipped_start: x0 < cutoff,
                clipped_end: false,
            });
            let n = run.coords.len();
            let skip = if n >= dim && run.coords[n - dim..] == pts[..dim] { dim } else { 0 };
            run.coords.extend_from_slice(&pts[skip..]);
            if x1 < cutoff {
                let mut done = current.take().expect("run in progress");
                done.clipped_end = true;
                runs.push(done);
            }
        }
        runs.extend(current.take());
    }
    runs
}

/// Grid points of pitch `delta` filling `{0 <= x <= reach, |y| <= sqrt(x) + x / s}`
/// in the `(x1, x2)` plane.
fn tip_band(dim: usize, reach: f64, sharpness: f64, delta: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let columns = (reach / delta).floor() as usize;
    for i in 0..=columns {
        let x = i as f64 * delta;
        let half = x.sqrt() + x / sharpness;
        let rows = (half / delta).floor() as i64;
        for j in -rows..=rows {
            let mut p = vec![0.0; dim];
            p[0] = x;
            p[1] = j as f64 * delta;
            out.extend(p);
        }
    }
    out
}

impl NeedleModel {
    fn base_reach(&self) -> f64 {
        self.base.pieces().iter().flat_map(|(_, p)| p.vertices().map(|v| v[0])).fold(0.0, f64::max)
    }

    fn image_marks(base: &ContinuumModel, sharpness: f64) -> Result<BTreeMap<String, Point>> {
        let mut marked = BTreeMap::new();
        for (label, pt) in base.marked() {
            marked.insert(format!("h({label})"), Point::new(needle_h(pt.coords(), sharpness)?)?);
        }
        marked.insert("h(p)".to_string(), Point::origin(base.dim()));
        Ok(marked)
    }
}

/// Builds `h(C)` for `base`, sampled so consecutive image samples are at most
/// `delta` apart.
pub fn build_needle(base: &ContinuumModel, sharpness: f64, delta: f64) -> Result<NeedleModel> {
    if !(sharpness > 0.0 && sharpness.is_finite()) {
        return Err(Error::Domain(format!("sharpness must be positive, got {sharpness}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("pitch must be positive, got {delta}")));
    }
    check_normalized(base)?;
    let dim = base.dim();
    let mut base = base.clone();
    if !base.marked().contains_key("p") {
        base.add_mark("p", Point::origin(dim))?;
    }
    let runs = curve_runs(&base, sharpness, delta, tip_cutoff(delta));
    let origin = vec![0.0; dim];
    let mut pieces = Vec::new();
    for (k, run) in runs.into_iter().enumerate() {
        let mut coords = Vec::with_capacity(run.coords.len() + 2 * dim);
        if run.clipped_start {
            coords.extend_from_slice(&origin);
        }
        coords.extend_from_slice(&run.coords);
        if run.clipped_end {
            coords.extend_from_slice(&origin);
        }
        if coords.len() / dim >= 2 {
            pieces.push((format!("image{k}"), Polyline::from_flat(dim, coords)?));
        }
    }
    let marked = NeedleModel::image_marks(&base, sharpness)?;
    // Marked images of base points below the cutoff are not on the polyline
    // view; keep only the ones that are.
    let image = {
        let probe = ContinuumModel::new(pieces.clone(), BTreeMap::new())?;
        let mut kept = BTreeMap::new();
        for (label, pt) in marked {
            let on = probe.pieces().iter().any(|(_, l)| l.distance_to(pt.coords()) <= 1e-12);
            if on {
                kept.insert(label, pt);
            }
        }
        ContinuumModel::new(pieces, kept)?
    };
    Ok(NeedleModel { base, sharpness, image, dim })
}

impl Continuum for NeedleModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn marked(&self) -> &BTreeMap<String, Point> {
        self.image.marked()
    }

    /// Curve samples for `x1 >= tip_cutoff(delta)` plus a grid filling the
    /// envelope of the tip, where the oscillation is finer than `delta`.
    fn refine(&self, delta: f64) -> Result<PointCloud> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Domain(format!("pitch must be positive, got {delta}")));
        }
        let cutoff = tip_cutoff(delta);
        let mut coords = Vec::new();
        for run in curve_runs(&self.base, self.sharpness, delta, cutoff) {
            coords.extend(run.coords);
        }
        coords.extend(tip_band(self.dim, cutoff.min(self.base_reach()), self.sharpness, delta));
        for p in NeedleModel::image_marks(&self.base, self.sharpness)?.values() {
            coords.extend_from_slice(p.coords());
        }
        PointCloud::from_flat(self.dim, coords, delta)
    }
}

/// Flat-fraction of the wedge radius used by the zigzag teeth.
pub const OUTER_FRACTION: f64 = 0.9;
pub const INNER_FRACTION: f64 = 0.1;
/// Fraction of the wedge half-angle spanned by the teeth.
pub const ANGLE_FRACTION: f64 = 0.8;
/// Largest raise of a valley, as a fraction of the tooth depth.
const MAX_RAISE: f64 = 0.9;
pub const MAX_ZIGZAG_INDEX: u32 = 12;

/// Marked point `p_n = (2^-n, 2^-n)` in polar coordinates; `p_0` is the origin.
pub fn p_point(n: u32) -> Point {
    if n == 0 {
        return Point::xy(0.0, 0.0);
    }
    let s = 0.5f64.powi(n as i32);
    polar_to_cartesian(s, s).expect("finite polar point")
}

/// Geometry of one zigzag line.
#[derive(Debug, Clone, Copy)]
struct Teeth {
    radius: f64,
    center: f64,
    r_in: f64,
    r_out: f64,
    theta_lo: f64,
    theta_hi: f64,
    count: usize,
}

impl Teeth {
    fn new(n: u32, count: usize) -> Teeth {
        let radius = 0.5f64.powi(n as i32);
        let half_angle = 0.5f64.powi(n as i32 + 2);
        Teeth {
            radius,
            center: radius,
            r_in: INNER_FRACTION * radius,
            r_out: OUTER_FRACTION * radius,
            theta_lo: radius - ANGLE_FRACTION * half_angle,
            theta_hi: radius + ANGLE_FRACTION * half_angle,
            count,
        }
    }

    fn angle(&self, j: usize) -> f64 {
        if j + 1 == self.count {
            self.theta_hi
        } else {
            self.theta_lo + (self.theta_hi - self.theta_lo) * j as f64 / (self.count - 1) as f64
        }
    }

    fn step(&self) -> f64 {
        (self.theta_hi - self.theta_lo) / (self.count - 1) as f64
    }

    fn valleys(&self) -> usize {
        (self.count - 1) / 2
    }

    /// Length with every valley at the inner radius.
    fn full_length(&self) -> f64 {
        let chord = 2.0 * (self.step() / 2.0).sin();
        let m = self.count - 1;
        let tops = m.div_ceil(2) as f64;
        let bottoms = (m / 2) as f64;
        let end = polar_to_cartesian(self.r_out, self.theta_hi)
            .unwrap()
            .distance(&polar_to_cartesian(self.radius, self.center).unwrap());
        self.r_out + m as f64 * (self.r_out - self.r_in) + tops * chord * self.r_out + bottoms * chord * self.r_in + end
    }

    /// Length lost by raising one valley from `r_in` to `r`.
    fn raise_loss(&self, r: f64) -> f64 {
        2.0 * (r - self.r_in) * (1.0 - (self.step() / 2.0).sin())
    }

    fn polyline(&self, raised: &[f64]) -> Result<Polyline> {
        let valley = |v: usize| raised.get(v).copied().unwrap_or(self.r_in);
        let mut coords = Vec::with_capacity(4 * self.count + 4);
        let mut push = |r: f64, t: f64| {
            let p = polar_to_cartesian(r, t).expect("finite");
            coords.extend_from_slice(p.coords());
        };
        push(0.0, 0.0);
        push(self.r_out, self.angle(0));
        for j in 1..self.count {
            let t = self.angle(j);
            if j % 2 == 1 {
                push(self.r_out, t);
                push(valley((j - 1) / 2), t);
            } else {
                push(valley((j - 2) / 2), t);
                push(self.r_out, t);
            }
        }
        push(self.radius, self.center);
        Polyline::from_flat(2, coords)
    }
}

/// Broken line from `p_0` to `p_n` of length `2^n` (relative error at most
/// `length_tol`) inside the polar wedge `r < 2^-n`,
/// `|theta - 2^-n| < 2^-n-2`.
///
/// Radial teeth alternate between `0.1 * 2^-n` and `0.9 * 2^-n` at evenly
/// spaced, strictly increasing angles covering 80% of the wedge's opening.
/// The smallest odd tooth count whose full length reaches `2^n` is used,
/// then valleys are raised (the last by bisection) to remove the excess.
pub fn build_zigzag_ln(n: u32, length_tol: f64) -> Result<Polyline> {
    if n == 0 {
        return Err(Error::Domain("zigzag index starts at 1".into()));
    }
    if n > MAX_ZIGZAG_INDEX {
        return Err(Error::Refused(format!(
            "zigzag index {n} exceeds {MAX_ZIGZAG_INDEX}: the vertex count grows like 4^n"
        )));
    }
    if !(length_tol > 0.0) {
        return Err(Error::Domain(format!("length tolerance must be positive, got {length_tol}")));
    }
    let target = 2f64.powi(n as i32);
    // Smallest odd count (>= 3) with enough length; full length grows with count.
    let odd = |k: usize| 2 * k + 1;
    let mut hi = 1usize;
    while Teeth::new(n, odd(hi)).full_length() < target {
        hi *= 2;
    }
    let mut lo = 1usize;
    while lo < hi {
        let mid = (lo + hi) / 2;
        if Teeth::new(n, odd(mid)).full_length() >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let teeth = Teeth::new(n, odd(lo));
    let mut excess = teeth.full_length() - target;
    let cap = teeth.r_in + MAX_RAISE * (teeth.r_out - teeth.r_in);
    let mut raised = Vec::new();
    while excess > 0.0 {
        if raised.len() == teeth.valleys() {
            return Err(Error::Domain(format!("cannot trim zigzag {n} to length {target}")));
        }
        let full = teeth.raise_loss(cap);
        if full <= excess {
            raised.push(cap);
            excess -= full;
            continue;
        }
        let (mut a, mut b) = (teeth.r_in, cap);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if teeth.raise_loss(m) < excess {
                a = m;
            } else {
                b = m;
            }
            if b - a <= f64::EPSILON * teeth.r_out {
                break;
            }
        }
        raised.push(0.5 * (a + b));
        excess = 0.0;
    }
    let line = teeth.polyline(&raised)?;
    let err = (line.length() - target).abs() / target;
    if err > length_tol {
        return Err(Error::Domain(format!("zigzag {n} length off by relative {err:e}")));
    }
    Ok(line)
}

/// Checks the confinement of `l_n`: every vertex but the last has
/// `r < 2^-n` and (away from the origin) `|theta - 2^-n| < 2^-n-2`.
pub fn in_wedge(n: u32, l: &Polyline) -> bool {
    let radius = 0.5f64.powi(n as i32);
    let half = 0.5f64.powi(n as i32 + 2);
    (0..l.vertex_count() - 1).all(|i| {
        let (r, t) = cartesian_to_polar(l.vertex(i));
        r < radius && (r == 0.0 || (t > radius - half && t < radius + half))
    })
}

/// Truncation `l_1 ∪ ... ∪ l_{n_max}` of the fan `P`.
#[derive(Debug, Clone)]
pub struct PModel {
    pub n_max: u32,
    pub lines: Vec<Polyline>,
    pub model: ContinuumModel,
}

impl PModel {
    pub fn line(&self, n: u32) -> &Polyline {
        &self.lines[n as usize - 1]
    }
}

/// Builds `l_1..l_{n_max}` and checks that distinct lines meet only at `p_0`.
pub fn build_p(n_max: u32, length_tol: f64) -> Result<PModel> {
    if n_max == 0 || n_max > MAX_ZIGZAG_INDEX {
        return Err(Error::Domain(format!("n_max must be in 1..={MAX_ZIGZAG_INDEX}, got {n_max}")));
    }
    let lines = (1..=n_max)
        .into_par_iter()
        .map(|n| build_zigzag_ln(n, length_tol))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(usize, usize)> = (0..lines.len())
        .flat_map(|i| (i + 1..lines.len()).map(move |j| (i, j)))
        .collect();
    let clash = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<Option<(usize, usize)>> {
            let joined = lines[i].reversed().concat(&lines[j])?;
            Ok(self_intersection(&joined, 0.0).map(|_| (i + 1, j + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some((i, j)) = clash.into_iter().flatten().next() {
        return Err(Error::Domain(format!("lines l{i} and l{j} meet away from p0")));
    }
    let mut marked = BTreeMap::new();
    for n in 0..=n_max {
        marked.insert(format!("p{n}"), p_point(n));
    }
    let pieces = lines.iter().enumerate().map(|(i, l)| (format!("l{}", i + 1), l.clone())).collect();
    let model = ContinuumModel::new(pieces, marked)?;
    Ok(PModel { n_max, lines, model })
}

impl Continuum for PModel {
    fn dim(&self) -> usize {
        2
    }

    fn marked(&self) -> &BTreeMap<String, Point> {
        self.model.marked()
    }

    fn refine(&self, delta: f64) -> Result<PointCloud> {
        self.model.refine(delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{dist, self_intersects};

    #[test]
    fn h1_examples() {
        assert_eq!(needle_h1(&Point::xy(0.0, 0.7), 100.0).unwrap().coords(), &[0.0, 0.0]);
        assert_eq!(needle_h1(&Point::xy(1.0, 1.0), 100.0).unwrap().coords(), &[1.0, 0.01]);
        let p = needle_h1(&Point::new(vec![0.5, -1.0, 1.0]).unwrap(), 100.0).unwrap();
        assert_eq!(p.coords(), &[0.5, -0.005, 0.005]);
    }

    #[test]
    fn h2_examples() {
        assert_eq!(needle_h2(&Point::xy(0.0, 0.3)).unwrap().coords(), &[0.0, 0.3]);
        let x = 1.0 / PI;
        let y = needle_h2(&Point::xy(x, 0.0)).unwrap();
        assert_eq!(y.coords()[0], x);
        assert!(y.coords()[1].abs() < 1e-15);
        let y = needle_h2(&Point::xy(1.0, 0.01)).unwrap();
        assert!((y.coords()[1] - 0.851_470_984_807_896_5).abs() < 1e-15);
        assert!(matches!(needle_h2(&Point::xy(-0.1, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn needle_on_default_base_is_the_graph() {
        let base = default_base(2).unwrap();
        let m = build_needle(&base, DEFAULT_SHARPNESS, 1e-3).unwrap();
        assert_eq!(m.marked_point("h(p)").unwrap().coords(), &[0.0, 0.0]);
        let hq = m.marked_point("h(q)").unwrap();
        assert!((hq.coords()[1] - 1f64.sin()).abs() < 1e-15);
        for (_, l) in m.image.pieces() {
            for v in l.vertices().skip(1) {
                assert!((v[1] - sqrt_sin_recip(v[0])).abs() < 1e-15);
            }
        }
        let cloud = m.refine(1e-3).unwrap();
        // Every cloud point sits in the envelope; every sample away from the
        // tip is on the graph.
        let cutoff = tip_cutoff(1e-3);
        for p in cloud.points() {
            assert!(p[0] >= 0.0 && p[1].abs() <= p[0].sqrt() + p[0] / 100.0 + 1e-15);
            if p[0] > cutoff * (1.0 + 1e-12) {
                assert!((p[1] - sqrt_sin_recip(p[0])).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn needle_rejects_unnormalized_base() {
        let bad = ContinuumModel::segment(Point::xy(-0.1, 0.0), Point::xy(1.0, 0.0)).unwrap();
        assert!(matches!(build_needle(&bad, 100.0, 1e-2), Err(Error::Input(_))));
        let off = ContinuumModel::segment(Point::xy(0.1, 0.0), Point::xy(1.0, 0.0)).unwrap();
        assert!(build_needle(&off, 100.0, 1e-2).is_err());
        let wall = ContinuumModel::segment(Point::xy(0.0, 0.5), Point::xy(1.0, 0.0)).unwrap();
        assert!(build_needle(&wall, 100.0, 1e-2).is_err());
    }

    #[test]
    fn needle_in_three_dimensions() {
        let base = default_base(3).unwrap();
        let m = build_needle(&base, 100.0, 1e-2).unwrap();
        assert_eq!(m.marked_point("h(p)").unwrap().coords(), &[0.0, 0.0, 0.0]);
        assert_eq!(m.refine(1e-2).unwrap().dim(), 3);
    }

    #[test]
    fn needle_is_injective_on_samples() {
        // Samples taken from parameters more than 10 delta apart never land
        // within delta / 10 of each other.
        let delta = 1e-3;
        let cutoff = tip_cutoff(delta);
        let ts: Vec<f64> = sample_parametric(|t| vec![t, sqrt_sin_recip(t)], cutoff, 1.0, delta, 2)
            .chunks_exact(2)
            .map(|p| p[0])
            .collect();
        let coords: Vec<f64> = ts.iter().flat_map(|&t| [t, sqrt_sin_recip(t)]).collect();
        let cloud = PointCloud::from_flat(2, coords, delta).unwrap();
        let grid = crate::spatial::Grid::build(cloud.flat(), 2, delta / 10.0);
        for i in 0..cloud.len() {
            grid.for_each_within(cloud.flat(), cloud.point(i), delta / 10.0, true, |j, _| {
                assert!((ts[i] - ts[j]).abs() <= 10.0 * delta, "{i} {j}");
            });
        }
    }

    #[test]
    fn h2_expansion_is_bounded_away_from_the_tip() {
        // Sampled expansion of h2 over pairs with x1 >= a shrinks as a grows.
        let h2 = crate::ifs::MapSpec::needle_h2(2).unwrap();
        let mut last = f64::INFINITY;
        for a in [0.05, 0.1, 0.2, 0.4] {
            let region = crate::ifs::BoxRegion::new(vec![a, -0.01], vec![1.0, 0.01]).unwrap();
            let k = crate::ifs::lipschitz_estimate(&h2, &region, 20_000, 5).unwrap().lower;
            assert!(k.is_finite());
            // Sampling noise allowance of 5%.
            assert!(k <= last * 1.05, "a={a} k={k} last={last}");
            last = k;
        }
    }

    #[test]
    fn zigzag_examples() {
        let l1 = build_zigzag_ln(1, 1e-9).unwrap();
        assert!((l1.length() - 2.0).abs() <= 2e-9);
        assert!(in_wedge(1, &l1));
        for i in 0..l1.vertex_count() - 1 {
            let (r, t) = cartesian_to_polar(l1.vertex(i));
            assert!(r < 0.5);
            assert!(r == 0.0 || (t > 0.375 && t < 0.625));
        }
        let l3 = build_zigzag_ln(3, 1e-9).unwrap();
        assert!((l3.length() - 8.0).abs() <= 8e-9);
        for n in 1..=6 {
            let l = build_zigzag_ln(n, 1e-9).unwrap();
            assert!(!self_intersects(&l, 0.0), "l{n}");
            assert_eq!(l.first(), p_point(0));
            assert_eq!(l.last(), p_point(n));
        }
        assert!(matches!(build_zigzag_ln(13, 1e-9), Err(Error::Refused(_))));
    }

    #[test]
    fn p_model() {
        let p = build_p(1, 1e-9).unwrap();
        assert_eq!(p.lines.len(), 1);
        assert!((p.line(1).length() - 2.0).abs() < 2e-9);
        let p = build_p(6, 1e-9).unwrap();
        for n in 0..=6u32 {
            let m = p.marked_point(&format!("p{n}")).unwrap();
            if n > 0 {
                let (r, t) = cartesian_to_polar(m.coords());
                let s = 0.5f64.powi(n as i32);
                assert!((r - s).abs() < 1e-15 && (t - s).abs() < 1e-15);
            }
        }
        // The only point shared by two lines is p0.
        let a = p.line(2);
        let b = p.line(3);
        let common = a.vertices().filter(|v| b.vertices().any(|w| dist(v, w) == 0.0)).count();
        assert_eq!(common, 1);
    }
}
