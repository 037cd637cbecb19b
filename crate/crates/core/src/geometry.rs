//! Points, polylines, sampled clouds and continuum models.
//!
//! Coordinates are stored flat (`dim` values per vertex) so that clouds with
//! millions of samples stay a single allocation.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::ops::Bound::{Excluded, Unbounded};

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::spatial::{cell_key, Grid};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 8;

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// A point of `R^n` with finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Point> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::Domain(format!(
                "point dimension {} outside 1..={MAX_DIM}",
                coords.len()
            )));
        }
        if let Some(x) = coords.iter().find(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite coordinate {x}")));
        }
        Ok(Point { coords })
    }

    /// Planar point. Panics on non-finite input.
    pub fn xy(x: f64, y: f64) -> Point {
        Point::new(vec![x, y]).expect("finite coordinates")
    }

    pub fn origin(dim: usize) -> Point {
        Point { coords: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn distance(&self, other: &Point) -> f64 {
        dist(&self.coords, &other.coords)
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// `(r, theta)` to Cartesian coordinates.
pub fn polar_to_cartesian(r: f64, theta: f64) -> Result<Point> {
    if !r.is_finite() || !theta.is_finite() {
        return Err(Error::Domain("polar coordinates must be finite".into()));
    }
    if r < 0.0 {
        return Err(Error::Domain(format!("negative radius {r}")));
    }
    Ok(Point::xy(r * theta.cos(), r * theta.sin()))
}

/// Inverse of [`polar_to_cartesian`]; the angle of the origin is 0.
pub fn cartesian_to_polar(p: &[f64]) -> (f64, f64) {
    (p[0].hypot(p[1]), p[1].atan2(p[0]))
}

/// An open broken line through at least two vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    dim: usize,
    coords: Vec<f64>,
}

impl Polyline {
    pub fn new(vertices: &[Point]) -> Result<Polyline> {
        let dim = vertices.first().map(Point::dim).unwrap_or(0);
        let mut coords = Vec::with_capacity(dim * vertices.len());
        for v in vertices {
            check_dim(dim, v.dim())?;
            coords.extend_from_slice(v.coords());
        }
        Polyline::from_flat(dim, coords)
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Polyline> {
        if dim == 0 || dim > MAX_DIM || coords.len() % dim != 0 {
            return Err(Error::Input("bad polyline coordinate buffer".into()));
        }
        if coords.len() / dim < 2 {
            return Err(Error::Input("a polyline needs at least two vertices".into()));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite polyline vertex".into()));
        }
        let line = Polyline { dim, coords };
        for i in 1..line.vertex_count() {
            if line.vertex(i - 1) == line.vertex(i) {
                return Err(Error::Input(format!("repeated consecutive vertex at index {i}")));
            }
        }
        Ok(line)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertex_count(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn segment_count(&self) -> usize {
        self.vertex_count() - 1
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vertex_point(&self, i: usize) -> Point {
        Point { coords: self.vertex(i).to_vec() }
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn first(&self) -> Point {
        self.vertex_point(0)
    }

    pub fn last(&self) -> Point {
        self.vertex_point(self.vertex_count() - 1)
    }

    pub fn flat(&self) -> &[f64] {
        &self.coords
    }

    /// Sum of segment lengths.
    pub fn length(&self) -> f64 {
        (1..self.vertex_count())
            .map(|i| dist(self.vertex(i - 1), self.vertex(i)))
            .sum()
    }

    pub fn reversed(&self) -> Polyline {
        let mut coords = Vec::with_capacity(self.coords.len());
        for i in (0..self.vertex_count()).rev() {
            coords.extend_from_slice(self.vertex(i));
        }
        Polyline { dim: self.dim, coords }
    }

    /// Joins `other` after `self`, merging the shared vertex when the last
    /// vertex of `self` equals the first of `other`.
    pub fn concat(&self, other: &Polyline) -> Result<Polyline> {
        check_dim(self.dim, other.dim)?;
        let mut coords = self.coords.clone();
        let skip = usize::from(self.vertex(self.vertex_count() - 1) == other.vertex(0));
        coords.extend_from_slice(&other.coords[skip * self.dim..]);
        Polyline::from_flat(self.dim, coords)
    }

    pub fn bbox_diameter(&self) -> f64 {
        bbox_diameter(&self.coords, self.dim)
    }

    /// Distance from `q` to the nearest point of the polyline.
    pub fn distance_to(&self, q: &[f64]) -> f64 {
        (1..self.vertex_count())
            .map(|i| point_segment_distance(q, self.vertex(i - 1), self.vertex(i)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn map<F: Fn(&[f64]) -> Vec<f64>>(&self, f: F) -> Result<Polyline> {
        let mut coords = Vec::with_capacity(self.coords.len());
        let mut dim = 0;
        for v in self.vertices() {
            let w = f(v);
            dim = w.len();
            coords.extend(w);
        }
        Polyline::from_flat(dim, coords)
    }
}

pub(crate) fn bbox_diameter(coords: &[f64], dim: usize) -> f64 {
    let mut s = 0.0;
    for d in 0..dim {
        let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in coords.chunks_exact(dim) {
            a = a.min(p[d]);
            b = b.max(p[d]);
        }
        s += (b - a) * (b - a);
    }
    s.sqrt()
}

/// A finite sample of a set, with the guarantee that every point of the
/// underlying set is within `pitch` of some sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    pitch: f64,
}

impl PointCloud {
    /// Builds a cloud from a flat buffer; exact duplicate points are dropped,
    /// keeping the first occurrence.
    pub fn from_flat(dim: usize, coords: Vec<f64>, pitch: f64) -> Result<PointCloud> {
        if dim == 0 || dim > MAX_DIM || coords.len() % dim != 0 {
            return Err(Error::Input("bad cloud coordinate buffer".into()));
        }
        if coords.is_empty() {
            return Err(Error::Input("point cloud must be nonempty".into()));
        }
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::Domain(format!("pitch must be positive, got {pitch}")));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite cloud coordinate".into()));
        }
        let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(coords.len() / dim);
        let mut kept = Vec::with_capacity(coords.len());
        for p in coords.chunks_exact(dim) {
            // +0.0 and -0.0 are the same point.
            let key: Vec<u64> = p.iter().map(|x| (x + 0.0).to_bits()).collect();
            if seen.insert(key) {
                kept.extend_from_slice(p);
            }
        }
        Ok(PointCloud { dim, coords: kept, pitch })
    }

    pub fn from_points(points: &[Point], pitch: f64) -> Result<PointCloud> {
        let dim = points.first().map(Point::dim).unwrap_or(0);
        let mut coords = Vec::with_capacity(dim * points.len());
        for p in points {
            check_dim(dim, p.dim())?;
            coords.extend_from_slice(p.coords());
        }
        PointCloud::from_flat(dim, coords, pitch)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_point(&self, i: usize) -> Point {
        Point { coords: self.point(i).to_vec() }
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn with_pitch(mut self, pitch: f64) -> Result<PointCloud> {
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::Domain(format!("pitch must be positive, got {pitch}")));
        }
        self.pitch = pitch;
        Ok(self)
    }

    /// Union of two clouds; the pitch of the result is the larger pitch.
    pub fn union(&self, other: &PointCloud) -> Result<PointCloud> {
        check_dim(self.dim, other.dim)?;
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        PointCloud::from_flat(self.dim, coords, self.pitch.max(other.pitch))
    }

    pub fn diameter_bound(&self) -> f64 {
        bbox_diameter(&self.coords, self.dim)
    }

    /// Index of the sample nearest to `q` and its distance.
    pub fn nearest(&self, q: &[f64]) -> Result<(usize, f64)> {
        check_dim(self.dim, q.len())?;
        let grid = Grid::build(&self.coords, self.dim, Grid::auto_cell(&self.coords, self.dim));
        Ok(grid.nearest(&self.coords, q))
    }

    /// [`PointCloud::nearest`] for many flat queries, sharing one grid.
    pub fn nearest_many(&self, queries: &[f64]) -> Result<Vec<(usize, f64)>> {
        if queries.len() % self.dim != 0 {
            return Err(Error::Input(format!("query buffer length {} is not a multiple of {}", queries.len(), self.dim)));
        }
        let grid = Grid::build(&self.coords, self.dim, Grid::auto_cell(&self.coords, self.dim));
        Ok(queries.par_chunks_exact(self.dim).map(|q| grid.nearest(&self.coords, q)).collect())
    }
}

/// Samples `l` so that consecutive samples along it are at most `delta` apart.
/// All vertices are kept.
pub fn sample_polyline(l: &Polyline, delta: f64) -> Result<PointCloud> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("sampling pitch must be positive, got {delta}")));
    }
    let dim = l.dim();
    let mut coords = Vec::new();
    coords.extend_from_slice(l.vertex(0));
    for i in 1..l.vertex_count() {
        let (a, b) = (l.vertex(i - 1), l.vertex(i));
        let steps = (dist(a, b) / delta).ceil().max(1.0) as usize;
        for s in 1..steps {
            let t = s as f64 / steps as f64;
            coords.extend(a.iter().zip(b).map(|(x, y)| x + t * (y - x)));
        }
        coords.extend_from_slice(b);
    }
    PointCloud::from_flat(dim, coords, delta)
}

/// Adaptive sampler for a parametric curve `t -> curve(t)` on `[t0, t1]`.
///
/// The parameter range is first cut into pieces no longer than `delta / 4`,
/// then each piece is bisected until the two-chord path through its midpoint
/// is no longer than `delta`. Returns the flat coordinates in parameter order.
pub fn sample_parametric<F>(curve: F, t0: f64, t1: f64, delta: f64, dim: usize) -> Vec<f64>
where
    F: Fn(f64) -> Vec<f64>,
{
    const MAX_DEPTH: u32 = 48;
    let pieces = (((t1 - t0) / (delta / 4.0)).ceil() as usize).max(1);
    let mut out = Vec::with_capacity(dim * pieces * 2);
    let first = curve(t0);
    out.extend_from_slice(&first);
    let mut left = first;
    for k in 0..pieces {
        let a = t0 + (t1 - t0) * k as f64 / pieces as f64;
        let b = if k + 1 == pieces { t1 } else { t0 + (t1 - t0) * (k + 1) as f64 / pieces as f64 };
        let right = curve(b);
        // Depth-first, left to right: emit right endpoints in order.
        let mut stack = vec![(a, b, right, 0u32)];
        while let Some((a, b, pb, depth)) = stack.pop() {
            let m = 0.5 * (a + b);
            let pm = curve(m);
            let path = dist(&left, &pm) + dist(&pm, &pb);
            if path > delta && depth < MAX_DEPTH {
                stack.push((m, b, pb, depth + 1));
                stack.push((a, m, pm, depth + 1));
            } else {
                if dist(&left, &pb) > 0.0 {
                    out.extend_from_slice(&pb);
                }
                left = pb;
            }
        }
    }
    out
}

/// Closed-form real functions whose graphs can be sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphFn {
    Constant(f64),
    Linear { slope: f64, intercept: f64 },
    /// `sqrt(x) * sin(1/x)`, extended by 0 at `x = 0`.
    SqrtSinRecip,
}

impl GraphFn {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            GraphFn::Constant(c) => c,
            GraphFn::Linear { slope, intercept } => slope * x + intercept,
            GraphFn::SqrtSinRecip => sqrt_sin_recip(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            GraphFn::Constant(_) => 0.0,
            GraphFn::Linear { slope, .. } => slope,
            GraphFn::SqrtSinRecip => {
                let s = x.sqrt();
                (1.0 / x).sin() / (2.0 * s) - (1.0 / x).cos() / (x * s)
            }
        }
    }
}

/// `sqrt(x) sin(1/x)` for `x > 0`, and 0 at `x = 0`.
pub fn sqrt_sin_recip(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.sqrt() * (1.0 / x).sin()
    }
}

/// Samples the planar graph `{(x, f(x)) : a <= x <= b}` with chord-adaptive steps.
pub fn sample_graph_curve(f: GraphFn, a: f64, b: f64, delta: f64) -> Result<PointCloud> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("graph sampling needs a > 0, got {a}")));
    }
    if !(b > a) || !b.is_finite() {
        return Err(Error::Domain(format!("empty interval [{a}, {b}]")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("sampling pitch must be positive, got {delta}")));
    }
    let coords = sample_parametric(|x| vec![x, f.eval(x)], a, b, delta, 2);
    PointCloud::from_flat(2, coords, delta)
}

/// Distance from `q` to the segment `[a, b]`.
pub fn point_segment_distance(q: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut ab2 = 0.0;
    let mut dot = 0.0;
    for d in 0..q.len() {
        let e = b[d] - a[d];
        ab2 += e * e;
        dot += (q[d] - a[d]) * e;
    }
    let t = if ab2 > 0.0 { (dot / ab2).clamp(0.0, 1.0) } else { 0.0 };
    let mut s = 0.0;
    for d in 0..q.len() {
        let c = a[d] + t * (b[d] - a[d]) - q[d];
        s += c * c;
    }
    s.sqrt()
}

/// Minimum distance between segments `[p0, p1]` and `[q0, q1]` in any dimension.
pub fn segment_distance(p0: &[f64], p1: &[f64], q0: &[f64], q1: &[f64]) -> f64 {
    let dim = p0.len();
    let sub = |a: &[f64], b: &[f64]| -> Vec<f64> { (0..dim).map(|i| a[i] - b[i]).collect() };
    let dot = |a: &[f64], b: &[f64]| -> f64 { (0..dim).map(|i| a[i] * b[i]).sum() };
    let d1 = sub(p1, p0);
    let d2 = sub(q1, q0);
    let r = sub(p0, q0);
    let a = dot(&d1, &d1);
    let e = dot(&d2, &d2);
    let f = dot(&d2, &r);
    let (s, t);
    if a <= 0.0 && e <= 0.0 {
        return dist(p0, q0);
    }
    if a <= 0.0 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(&d1, &r);
        if e <= 0.0 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(&d1, &d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let mut acc = 0.0;
    for i in 0..dim {
        let x = p0[i] + s * d1[i] - q0[i] - t * d2[i];
        acc += x * x;
    }
    acc.sqrt()
}

fn orient(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_box(a: &[f64], b: &[f64], c: &[f64]) -> bool {
    c[0] >= a[0].min(b[0]) && c[0] <= a[0].max(b[0]) && c[1] >= a[1].min(b[1]) && c[1] <= a[1].max(b[1])
}

/// Exact-predicate planar segment intersection (touching counts).
fn planar_segments_meet(p0: &[f64], p1: &[f64], q0: &[f64], q1: &[f64]) -> bool {
    let d1 = orient(q0, q1, p0);
    let d2 = orient(q0, q1, p1);
    let d3 = orient(p0, p1, q0);
    let d4 = orient(p0, p1, q1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_box(q0, q1, p0))
        || (d2 == 0.0 && on_box(q0, q1, p1))
        || (d3 == 0.0 && on_box(p0, p1, q0))
        || (d4 == 0.0 && on_box(p0, p1, q1))
}

/// Default incidence tolerance: `1e-12` times the bounding-box diameter.
pub fn default_tolerance(l: &Polyline) -> f64 {
    1e-12 * l.bbox_diameter()
}

/// Finds the lexicographically first pair `(i, j)`, `j > i + 1`, of segments
/// that come within `tol` of each other. Segment `i` joins vertices `i` and
/// `i + 1`.
///
/// Exact-contact planar queries on longer polylines first run a sweep line,
/// which stays fast on dense families of long, nearly parallel segments;
/// the pair itself comes from a uniform grid over segment boxes.
pub fn self_intersection(l: &Polyline, tol: f64) -> Option<(usize, usize)> {
    if l.dim() == 2 && tol == 0.0 && l.segment_count() >= SWEEP_MIN_SEGMENTS && !planar_sweep_meets(l) {
        return None;
    }
    grid_self_intersection(l, tol)
}

const SWEEP_MIN_SEGMENTS: usize = 64;

/// Segment in sweep order: `a` precedes `b` lexicographically.
#[derive(Debug, Clone, Copy)]
struct SweepSeg {
    a: [f64; 2],
    b: [f64; 2],
    idx: usize,
}

fn lex(p: &[f64; 2], q: &[f64; 2]) -> Ordering {
    p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1]))
}

impl SweepSeg {
    /// Above/below order of two segments that are both cut by the sweep
    /// line and do not cross: the later-starting one is located against
    /// the earlier one's supporting line.
    fn order(&self, other: &SweepSeg) -> Ordering {
        if self.idx == other.idx {
            return Ordering::Equal;
        }
        let self_first = lex(&self.a, &other.a).then(self.idx.cmp(&other.idx)) == Ordering::Less;
        let (first, second) = if self_first { (self, other) } else { (other, self) };
        let side = if first.a[0] == first.b[0] {
            // Vertical: second.a lies on the same vertical. A vertical
            // segment counts as above anything leaving its span rightwards.
            if second.a[1] > first.b[1] {
                1.0
            } else if second.a[0] == second.b[0] {
                0.0
            } else {
                -1.0
            }
        } else {
            let o = orient(&first.a, &first.b, &second.a);
            if o != 0.0 {
                o
            } else {
                orient(&first.a, &first.b, &second.b)
            }
        };
        // Ordering of `second` relative to `first`.
        let rel = if side > 0.0 {
            Ordering::Greater
        } else if side < 0.0 {
            Ordering::Less
        } else {
            second.idx.cmp(&first.idx)
        };
        if self_first {
            rel.reverse()
        } else {
            rel
        }
    }
}

impl PartialEq for SweepSeg {
    fn eq(&self, other: &Self) -> bool {
        self.idx == other.idx
    }
}

impl Eq for SweepSeg {}

impl PartialOrd for SweepSeg {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SweepSeg {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order(other)
    }
}

/// Shamos-Hoey sweep: whether any two non-consecutive segments of a planar
/// polyline touch. Contacts at event points are settled by collecting every
/// segment through the point; crossings elsewhere are caught when the two
/// segments become neighbours. Answers `true` when the status order becomes
/// inconsistent, so a `false` is always trustworthy.
fn planar_sweep_meets(l: &Polyline) -> bool {
    let m = l.segment_count();
    let segs: Vec<SweepSeg> = (0..m)
        .map(|i| {
            let p = [l.vertex(i)[0], l.vertex(i)[1]];
            let q = [l.vertex(i + 1)[0], l.vertex(i + 1)[1]];
            let (a, b) = if lex(&p, &q) == Ordering::Greater { (q, p) } else { (p, q) };
            SweepSeg { a, b, idx: i }
        })
        .collect();
    // (point, 0 = remove / 1 = insert, segment).
    let mut events: Vec<([f64; 2], u8, usize)> = Vec::with_capacity(2 * m);
    for s in &segs {
        events.push((s.b, 0, s.idx));
        events.push((s.a, 1, s.idx));
    }
    events.sort_by(|x, y| lex(&x.0, &y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let apart = |s: &SweepSeg, t: &SweepSeg| s.idx.abs_diff(t.idx) > 1;
    let meets = |s: &SweepSeg, t: &SweepSeg| apart(s, t) && planar_segments_meet(&s.a, &s.b, &t.a, &t.b);
    let through = |s: &SweepSeg, p: &[f64; 2]| orient(&s.a, &s.b, p) == 0.0 && on_box(&s.a, &s.b, p);
    let mut status: BTreeSet<SweepSeg> = BTreeSet::new();
    let mut g = 0;
    while g < events.len() {
        let p = events[g].0;
        let mut h = g;
        while h < events.len() && events[h].0 == p {
            h += 1;
        }
        // Segments already in the status that pass through p sit just
        // below a zero-length probe at p.
        let probe = SweepSeg { a: p, b: p, idx: usize::MAX };
        let mut at_p: Vec<SweepSeg> = status.range(..probe).rev().take_while(|s| through(s, &p)).copied().collect();
        at_p.extend(events[g..h].iter().filter(|e| e.1 == 1).map(|e| segs[e.2]));
        for (k, s) in at_p.iter().enumerate() {
            if at_p[k + 1..].iter().any(|t| apart(s, t)) {
                return true;
            }
        }
        for &(_, kind, i) in &events[g..h] {
            let s = segs[i];
            let below = status.range(..s).next_back().copied();
            let above = status.range((Excluded(s), Unbounded)).next().copied();
            if kind == 0 {
                if !status.remove(&s) {
                    return true;
                }
                if let (Some(b), Some(a)) = (below, above) {
                    if meets(&a, &b) {
                        return true;
                    }
                }
            } else {
                if !status.insert(s) {
                    return true;
                }
                if below.is_some_and(|t| meets(&s, &t)) || above.is_some_and(|t| meets(&s, &t)) {
                    return true;
                }
            }
        }
        g = h;
    }
    false
}

fn grid_self_intersection(l: &Polyline, tol: f64) -> Option<(usize, usize)> {
    let dim = l.dim();
    let m = l.segment_count();
    if m < 3 {
        return None;
    }
    let seg = |i: usize| (l.vertex(i), l.vertex(i + 1));
    let mean_len = l.length() / m as f64;
    let cell = (mean_len * 2.0).max(tol * 2.0).max(l.bbox_diameter() * 1e-9).max(f64::MIN_POSITIVE);
    // Register each segment in every cell its tol-expanded box touches.
    let mut entries: Vec<([i64; MAX_DIM], u32)> = Vec::with_capacity(m * 2);
    let mut boxes = Vec::with_capacity(m);
    for i in 0..m {
        let (a, b) = seg(i);
        let lo: Vec<f64> = (0..dim).map(|d| a[d].min(b[d]) - tol).collect();
        let hi: Vec<f64> = (0..dim).map(|d| a[d].max(b[d]) + tol).collect();
        let (klo, khi) = (cell_key(&lo, cell), cell_key(&hi, cell));
        let mut cur = klo;
        loop {
            entries.push((cur, i as u32));
            let mut d = 0;
            while d < dim {
                if cur[d] < khi[d] {
                    cur[d] += 1;
                    break;
                }
                cur[d] = klo[d];
                d += 1;
            }
            if d == dim {
                break;
            }
        }
        boxes.push((klo, khi));
    }
    entries.sort_unstable();
    let mut cells: std::collections::HashMap<[i64; MAX_DIM], (usize, usize)> = Default::default();
    let mut s = 0;
    while s < entries.len() {
        let mut e = s;
        while e < entries.len() && entries[e].0 == entries[s].0 {
            e += 1;
        }
        cells.insert(entries[s].0, (s, e));
        s = e;
    }
    let mut stamp = vec![u32::MAX; m];
    for i in 0..m {
        let (a, b) = seg(i);
        let (klo, khi) = boxes[i];
        let mut best: Option<usize> = None;
        let mut cur = klo;
        loop {
            if let Some(&(s, e)) = cells.get(&cur) {
                for &(_, j) in &entries[s..e] {
                    let j = j as usize;
                    if j <= i + 1 || stamp[j] == i as u32 {
                        continue;
                    }
                    stamp[j] = i as u32;
                    if best.is_some_and(|bj| bj <= j) {
                        continue;
                    }
                    let (c, d) = seg(j);
                    let hit = (dim == 2 && planar_segments_meet(a, b, c, d))
                        || segment_distance(a, b, c, d) <= tol;
                    if hit {
                        best = Some(j);
                    }
                }
            }
            let mut d = 0;
            while d < dim {
                if cur[d] < khi[d] {
                    cur[d] += 1;
                    break;
                }
                cur[d] = klo[d];
                d += 1;
            }
            if d == dim {
                break;
            }
        }
        if let Some(j) = best {
            return Some((i, j));
        }
    }
    None
}

pub fn self_intersects(l: &Polyline, tol: f64) -> bool {
    self_intersection(l, tol).is_some()
}

/// A compact set that can be resampled at any pitch.
pub trait Continuum {
    fn dim(&self) -> usize;

    /// Named points of interest.
    fn marked(&self) -> &BTreeMap<String, Point>;

    /// A cloud of the set with pitch `delta`.
    fn refine(&self, delta: f64) -> Result<PointCloud>;

    fn marked_point(&self, label: &str) -> Result<&Point> {
        self.marked()
            .get(label)
            .ok_or_else(|| Error::Input(format!("no marked point labelled {label:?}")))
    }
}

/// A union of named polylines with labelled marked points.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumModel {
    dim: usize,
    pieces: Vec<(String, Polyline)>,
    marked: BTreeMap<String, Point>,
}

impl ContinuumModel {
    /// Every marked point must lie on some piece (up to `1e-12` of the
    /// model's diameter).
    pub fn new(pieces: Vec<(String, Polyline)>, marked: BTreeMap<String, Point>) -> Result<ContinuumModel> {
        let dim = pieces
            .first()
            .map(|(_, p)| p.dim())
            .ok_or_else(|| Error::Input("a continuum model needs at least one piece".into()))?;
        for (_, p) in &pieces {
            check_dim(dim, p.dim())?;
        }
        let diam = pieces.iter().map(|(_, p)| p.bbox_diameter()).fold(0.0, f64::max);
        for (label, pt) in &marked {
            check_dim(dim, pt.dim())?;
            let d = pieces.iter().map(|(_, p)| p.distance_to(pt.coords())).fold(f64::INFINITY, f64::min);
            if d > 1e-12 * diam.max(1.0) {
                return Err(Error::Input(format!("marked point {label} is {d:e} away from every piece")));
            }
        }
        Ok(ContinuumModel { dim, pieces, marked })
    }

    /// Straight segment from `a` to `b`, marked "a" and "b".
    pub fn segment(a: Point, b: Point) -> Result<ContinuumModel> {
        let line = Polyline::new(&[a.clone(), b.clone()])?;
        let marked = BTreeMap::from([("a".to_string(), a), ("b".to_string(), b)]);
        ContinuumModel::new(vec![("segment".into(), line)], marked)
    }

    pub fn pieces(&self) -> &[(String, Polyline)] {
        &self.pieces
    }

    pub fn piece(&self, name: &str) -> Option<&Polyline> {
        self.pieces.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }

    pub fn add_mark(&mut self, label: &str, p: Point) -> Result<()> {
        check_dim(self.dim, p.dim())?;
        self.marked.insert(label.to_string(), p);
        Ok(())
    }

    pub fn total_length(&self) -> f64 {
        self.pieces.iter().map(|(_, p)| p.length()).sum()
    }
}

impl Continuum for ContinuumModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn marked(&self) -> &BTreeMap<String, Point> {
        &self.marked
    }

    fn refine(&self, delta: f64) -> Result<PointCloud> {
        let mut coords = Vec::new();
        for (_, p) in &self.pieces {
            coords.extend_from_slice(sample_polyline(p, delta)?.flat());
        }
        for p in self.marked.values() {
            coords.extend_from_slice(p.coords());
        }
        PointCloud::from_flat(self.dim, coords, delta)
    }
}
