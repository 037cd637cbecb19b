//! Per-instance certificates that a given IFS does not fix a given set.
//!
//! "Certified" always means: this system does not fix this set at this
//! resolution, with the reported margin. A finite computation cannot speak
//! for every IFS.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::continua::{NeedleModel, PModel};
use crate::error::{check_dim, Error, Result};
use crate::format::fmt17;
use crate::geometry::{dist, Continuum, Point, PointCloud, Polyline};
use crate::ifs::{classify_contraction, hutchinson, ContractionClass, IfsMode, IfsSpec, MapSpec, EXPANSION_MARGIN};
use crate::metric::{chain_distance, chain_profile, hausdorff_witness, ChainMetricProfile, ProfileVerdict, PITCH_RATIO};

/// Gap threshold of [`fixed_set_check`], in multiples of the pitch: up to
/// `2 delta` of sampling error per side plus `delta / 2` of deduplication,
/// doubled for safety.
pub const FIXED_SET_FACTOR: f64 = 10.0;

/// Image samples within this many pitches of a cloud count as on it.
pub const MEMBERSHIP_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Claim {
    NeedleDichotomy,
    FixedSetGap,
    PCoverage,
    LengthBudget,
}

impl Claim {
    pub fn tag(self) -> &'static str {
        match self {
            Claim::NeedleDichotomy => "needle_dichotomy",
            Claim::FixedSetGap => "fixed_set_gap",
            Claim::PCoverage => "p_coverage",
            Claim::LengthBudget => "length_budget",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// The set is not fixed; margin and witnesses back the claim.
    Certified,
    /// The allowed branch of the dichotomy (a constant map).
    Consistent,
    /// A precondition of the check is false, e.g. the declared Lipschitz
    /// bound is contradicted by a sampled pair.
    Refuted,
    /// Resolution-limited; `note` names the limiting factor.
    Inconclusive,
}

impl Verdict {
    pub fn tag(self) -> &'static str {
        match self {
            Verdict::Certified => "certified",
            Verdict::Consistent => "consistent",
            Verdict::Refuted => "refuted",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    /// Process exit code: 0 certified or consistent, 1 inconclusive,
    /// 2 refuted precondition.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Certified | Verdict::Consistent => 0,
            Verdict::Inconclusive => 1,
            Verdict::Refuted => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub label: String,
    pub point: Point,
}

impl Witness {
    fn new(label: impl Into<String>, point: Point) -> Witness {
        Witness { label: label.into(), point }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub claim: Claim,
    pub verdict: Verdict,
    pub margin: f64,
    pub delta: f64,
    pub eps_schedule: Vec<f64>,
    pub seed: u64,
    pub witnesses: Vec<Witness>,
    pub note: String,
}

pub const CSV_HEADER: &str = "claim,verdict,margin,delta,eps_schedule,seed,witnesses,note";

impl Certificate {
    fn new(claim: Claim, verdict: Verdict, delta: f64, seed: u64, note: impl Into<String>) -> Certificate {
        Certificate {
            claim,
            verdict,
            margin: 0.0,
            delta,
            eps_schedule: Vec::new(),
            seed,
            witnesses: Vec::new(),
            note: note.into(),
        }
    }

    fn with_margin(mut self, margin: f64) -> Certificate {
        self.margin = margin;
        self
    }

    fn with_witness(mut self, label: impl Into<String>, p: Point) -> Certificate {
        self.witnesses.push(Witness::new(label, p));
        self
    }

    fn with_schedule(mut self, schedule: Vec<f64>) -> Certificate {
        self.eps_schedule = schedule;
        self
    }

    pub fn exit_code(&self) -> i32 {
        self.verdict.exit_code()
    }

    /// Flat `key=value` block; one `witness=` line per witness.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "claim={}", self.claim.tag());
        let _ = writeln!(out, "verdict={}", self.verdict.tag());
        let _ = writeln!(out, "margin={}", fmt17(self.margin));
        let _ = writeln!(out, "delta={}", fmt17(self.delta));
        let sched: Vec<String> = self.eps_schedule.iter().map(|e| fmt17(*e)).collect();
        let _ = writeln!(out, "eps_schedule={}", sched.join(" "));
        let _ = writeln!(out, "seed={}", self.seed);
        for w in &self.witnesses {
            let c: Vec<String> = w.point.coords().iter().map(|v| fmt17(*v)).collect();
            let _ = writeln!(out, "witness={} {}", w.label, c.join(" "));
        }
        let _ = writeln!(out, "note={}", self.note);
        out
    }

    /// One CSV row matching [`CSV_HEADER`]; list fields are `;`-separated,
    /// coordinates within a witness `:`-separated.
    pub fn to_csv_row(&self) -> String {
        let sched: Vec<String> = self.eps_schedule.iter().map(|e| fmt17(*e)).collect();
        let wit: Vec<String> = self
            .witnesses
            .iter()
            .map(|w| {
                let c: Vec<String> = w.point.coords().iter().map(|v| fmt17(*v)).collect();
                format!("{}:{}", w.label, c.join(":"))
            })
            .collect();
        format!(
            "{},{},{},{},{},{},{},\"{}\"",
            self.claim.tag(),
            self.verdict.tag(),
            fmt17(self.margin),
            fmt17(self.delta),
            sched.join(";"),
            self.seed,
            wit.join(";"),
            self.note.replace('"', "\"\"")
        )
    }
}

/// Whether a curve of length `2^i` could in principle cover one of length
/// `2^n`: exactly `i >= n`.
pub fn length_budget(i: i64, n: i64) -> Result<bool> {
    if i < 1 || n < 1 {
        return Err(Error::Domain(format!("indices must be positive, got ({i}, {n})")));
    }
    Ok(i >= n)
}

/// Length bound of `f(l)` with its empirical cross-check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageLengthBound {
    /// `lambda * length(l)`.
    pub bound: f64,
    /// Shortest `3 delta`-chain through the sampled image between the images
    /// of the endpoints.
    pub chained: f64,
    pub slack: f64,
}

impl ImageLengthBound {
    pub fn holds(&self) -> bool {
        self.chained <= self.bound + self.slack
    }
}

/// `lambda * length(l)` for a certified bound `lambda` of `f`, validated by
/// chaining through `f` of a pitch-`delta` sample of `l`.
pub fn image_length_bound(f: &MapSpec, l: &Polyline, delta: f64) -> Result<ImageLengthBound> {
    check_dim(f.dim, l.dim())?;
    let lambda = f
        .certified_lip()
        .ok_or_else(|| Error::Refused("no certified Lipschitz bound; empirical bounds cannot certify".into()))?;
    if let Some(region) = f.lip.as_ref().and_then(|b| b.region.as_ref()) {
        if !l.vertices().all(|v| region.contains(v)) {
            return Err(Error::Refused("the Lipschitz bound's region does not contain the polyline".into()));
        }
    }
    let bound = lambda * l.length();
    let cloud = crate::geometry::sample_polyline(l, delta)?;
    let image = PointCloud::from_flat(l.dim(), f.image(&cloud)?, delta)?;
    let (a, b) = (f.eval(&l.first())?, f.eval(&l.last())?);
    let chained = chain_distance(&image, &a, &b, 3.0 * delta)?.extended();
    Ok(ImageLengthBound { bound, chained, slack: 4.0 * delta })
}

/// A continuum with extra samples forced into every refinement, so profile
/// endpoints taken from one cloud survive resampling.
struct WithPoints<'a, C: ?Sized> {
    inner: &'a C,
    extra: Vec<f64>,
}

impl<C: Continuum + ?Sized> Continuum for WithPoints<'_, C> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn marked(&self) -> &BTreeMap<String, Point> {
        self.inner.marked()
    }

    fn refine(&self, delta: f64) -> Result<PointCloud> {
        let base = self.inner.refine(delta)?;
        let mut coords = base.flat().to_vec();
        coords.extend_from_slice(&self.extra);
        PointCloud::from_flat(base.dim(), coords, delta)
    }
}

fn profile_through<C: Continuum + Sync + ?Sized>(
    m: &C,
    x: &Point,
    y: &Point,
    eps0: f64,
    k_max: usize,
) -> Result<ChainMetricProfile> {
    let mut extra = x.coords().to_vec();
    extra.extend_from_slice(y.coords());
    chain_profile(&WithPoints { inner: m, extra }, x, y, eps0, k_max)
}

/// Numerics of [`needle_dichotomy_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DichotomyParams {
    pub eps0: f64,
    pub k_max: usize,
    pub seed: u64,
    /// Pairs sampled when testing the declared Lipschitz bound.
    pub pairs: usize,
}

impl DichotomyParams {
    /// Working pitch: the finest pitch of the profile schedule.
    pub fn delta(&self) -> f64 {
        self.eps0 * 0.5f64.powi(self.k_max as i32) / PITCH_RATIO
    }

    fn schedule(&self) -> Vec<f64> {
        (0..=self.k_max).map(|k| self.eps0 * 0.5f64.powi(k as i32)).collect()
    }
}

/// Tests the dichotomy "a contraction of the needle whose image contains
/// `h(p)` is constant" for one map `f`.
///
/// A constant map is the allowed branch. Otherwise the declared bound is
/// tested on sampled pairs, the image is checked to lie on the needle, and
/// one of two contradictions is sought: if `f` fixes `h(p)`, the orbit of the
/// farthest-moved sample would reach the tip in finite chain length although
/// the chain profile to the tip diverges; if `f` moves `h(p)` onto the tip,
/// a pair at finite chain distance maps to a pair at divergent distance.
pub fn needle_dichotomy_check(f: &MapSpec, needle: &NeedleModel, params: DichotomyParams) -> Result<Certificate> {
    check_dim(f.dim, needle.dim)?;
    let delta = params.delta();
    let tip = needle.marked_point("h(p)")?.clone();
    let cert = |v: Verdict, note: &str| {
        Certificate::new(Claim::NeedleDichotomy, v, delta, params.seed, note).with_schedule(params.schedule())
    };
    if f.is_constant() {
        return Ok(cert(Verdict::Consistent, "constant").with_witness("h(p)", tip));
    }
    let lambda = f
        .lip_value()
        .ok_or_else(|| Error::Refused("the map carries no Lipschitz bound".into()))?;
    if lambda >= 1.0 {
        return Err(Error::Refused(format!("Lipschitz bound {lambda} is not below 1")));
    }
    let cloud = needle.refine(delta)?;
    let class = classify_contraction(f, &cloud, params.pairs, params.seed)?;
    let (ratio, pair) = match class.class {
        ContractionClass::ExpansionWitness { x, y, ratio } => (ratio, Some((x, y))),
        ContractionClass::Strict { lambda } => (lambda, None),
        ContractionClass::Boundary { max_ratio } => (max_ratio, None),
    };
    if ratio > lambda + EXPANSION_MARGIN {
        // A bound below 1 can only be exceeded by an expansion witness.
        let (x, y) = pair.ok_or_else(|| Error::Domain("sampled ratio above bound without a witness".into()))?;
        let note = format!(
            "refuted precondition: sampled ratio {} exceeds declared bound {} ({}; {} pairs)",
            fmt17(ratio),
            fmt17(lambda),
            class.note,
            class.pairs_examined
        );
        return Ok(cert(Verdict::Refuted, &note).with_margin(ratio - lambda).with_witness("x", x).with_witness("y", y));
    }
    let images = f.image(&cloud)?;
    let dim = cloud.dim();
    let off = cloud
        .nearest_many(&images)?
        .into_iter()
        .enumerate()
        .fold((0.0, 0), |best, (i, (_, d))| if d > best.0 { (d, i) } else { best });
    if off.0 > MEMBERSHIP_FACTOR * delta {
        let img = Point::new(images[off.1 * dim..(off.1 + 1) * dim].to_vec())?;
        return Ok(cert(Verdict::Inconclusive, "not a self-map at resolution")
            .with_margin(off.0)
            .with_witness("x", cloud.to_point(off.1))
            .with_witness("f(x)", img));
    }
    let ftip = f.eval(&tip)?;
    if ftip.distance(&tip) <= delta {
        return case_fixed_tip(needle, &cloud, &images, lambda, params);
    }
    case_moved_tip(needle, &cloud, &images, lambda, params)
}

/// Images from `images` (flat, parallel to `cloud`) as `(distance to q, i)`.
fn image_distances<'a>(images: &'a [f64], dim: usize, q: &[f64]) -> impl Iterator<Item = (f64, usize)> + 'a {
    let q = q.to_vec();
    images.chunks_exact(dim).enumerate().map(move |(i, p)| (dist(p, &q), i))
}

fn snap_to(cloud: &PointCloud, q: &[f64]) -> Result<Point> {
    Ok(cloud.to_point(cloud.nearest(q)?.0))
}

fn case_fixed_tip(
    needle: &NeedleModel,
    cloud: &PointCloud,
    images: &[f64],
    lambda: f64,
    params: DichotomyParams,
) -> Result<Certificate> {
    let delta = params.delta();
    let tip = needle.marked_point("h(p)")?.clone();
    let cert = |v: Verdict, note: &str| {
        Certificate::new(Claim::NeedleDichotomy, v, delta, params.seed, note).with_schedule(params.schedule())
    };
    let (moved, i) = image_distances(images, cloud.dim(), tip.coords())
        .fold((0.0, 0), |best, c| if c.0 > best.0 { c } else { best });
    if moved <= 2.0 * delta {
        return Ok(cert(Verdict::Inconclusive, "image collapses to h(p) at resolution (constant at resolution)"));
    }
    let x = cloud.to_point(i);
    let fx = snap_to(cloud, &images[i * cloud.dim()..(i + 1) * cloud.dim()])?;
    let step = profile_through(needle, &x, &fx, params.eps0, params.k_max)?;
    let step_len = match step.verdict {
        ProfileVerdict::Converges { limit } => limit,
        _ => {
            return Ok(cert(Verdict::Inconclusive, "fixed tip: profile from x to f(x) does not settle")
                .with_witness("x", x)
                .with_witness("f(x)", fx))
        }
    };
    let series = step_len / (1.0 - lambda);
    let to_tip = profile_through(needle, &x, &tip, params.eps0, params.k_max)?;
    let reach = to_tip.last_value();
    let diverges = matches!(to_tip.verdict, ProfileVerdict::Diverges { .. });
    let note_tail = format!(
        "series bound {} from step {} and bound {}",
        fmt17(series),
        fmt17(step_len),
        fmt17(lambda)
    );
    match reach {
        Some(r) if diverges && r > series => Ok(cert(
            Verdict::Certified,
            &format!("fixed tip: chain profile to h(p) reaches {} beyond the {note_tail}", fmt17(r)),
        )
        .with_margin(r - series)
        .with_witness("x", x)
        .with_witness("f(x)", fx)
        .with_witness("h(p)", tip)),
        _ => Ok(cert(
            Verdict::Inconclusive,
            &format!("fixed tip: divergent profile has not passed the {note_tail} at the finest epsilon"),
        )
        .with_witness("x", x)),
    }
}

fn case_moved_tip(
    needle: &NeedleModel,
    cloud: &PointCloud,
    images: &[f64],
    lambda: f64,
    params: DichotomyParams,
) -> Result<Certificate> {
    let delta = params.delta();
    let tip = needle.marked_point("h(p)")?.clone();
    let cert = |v: Verdict, note: &str| {
        Certificate::new(Claim::NeedleDichotomy, v, delta, params.seed, note).with_schedule(params.schedule())
    };
    let dim = cloud.dim();
    let (near, ix) = image_distances(images, dim, tip.coords())
        .fold((f64::INFINITY, 0), |best, c| if c.0 < best.0 { c } else { best });
    if near > delta {
        return Ok(cert(Verdict::Consistent, "h(p) is not in the image at resolution"));
    }
    let (far, iy) = image_distances(images, dim, tip.coords())
        .fold((0.0, 0), |best, c| if c.0 > best.0 { c } else { best });
    if far <= 2.0 * delta {
        return Ok(cert(Verdict::Inconclusive, "no sample maps outside 2 delta of h(p)"));
    }
    let (x, y) = (cloud.to_point(ix), cloud.to_point(iy));
    let fy = snap_to(cloud, &images[iy * dim..(iy + 1) * dim])?;
    let image_profile = profile_through(needle, &tip, &fy, params.eps0, params.k_max)?;
    let source_profile = profile_through(needle, &x, &y, params.eps0, params.k_max)?;
    match (&image_profile.verdict, &source_profile.verdict, image_profile.last_value()) {
        (ProfileVerdict::Diverges { .. }, ProfileVerdict::Converges { limit }, Some(top)) if top > lambda * limit => {
            Ok(cert(
                Verdict::Certified,
                &format!(
                    "moved tip: d(f(x), f(y)) diverges (reaches {}) while d(x, y) settles at {}",
                    fmt17(top),
                    fmt17(*limit)
                ),
            )
            .with_margin(top - lambda * limit)
            .with_witness("x", x)
            .with_witness("y", y)
            .with_witness("f(y)", fy))
        }
        _ => Ok(cert(Verdict::Inconclusive, "moved tip: profiles do not separate at the finest epsilon")
            .with_witness("x", x)
            .with_witness("y", y)),
    }
}

/// Certifies `F(M) != M` when the sampled Hausdorff gap exceeds `10 delta`.
pub fn fixed_set_check<C: Continuum + ?Sized>(f: &IfsSpec, m: &C, delta: f64) -> Result<Certificate> {
    check_dim(f.dim, m.dim())?;
    if f.mode != IfsMode::Strict {
        return Err(Error::Refused("fixed-set check needs a strict-mode IFS".into()));
    }
    let cloud = m.refine(delta)?;
    let image = hutchinson(f, &cloud)?;
    let (gap, w) = hausdorff_witness(&image, &cloud)?;
    let threshold = FIXED_SET_FACTOR * delta;
    let base = Certificate::new(Claim::FixedSetGap, Verdict::Inconclusive, delta, 0, "");
    Ok(if gap > threshold {
        Certificate {
            verdict: Verdict::Certified,
            note: format!("Hausdorff gap {} exceeds {}", fmt17(gap), fmt17(threshold)),
            ..base
        }
        .with_margin(gap - threshold)
        .with_witness("farthest", w)
    } else {
        Certificate {
            note: format!(
                "resolution-limited: Hausdorff gap {} is within {}; sampling cannot certify equality",
                fmt17(gap),
                fmt17(threshold)
            ),
            ..base
        }
        .with_margin(gap)
    })
}

/// Outcome of [`p_point_coverage`].
#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    pub certificate: Certificate,
    /// Indices `n` with `p_n` within `3 delta` of `F(P)`.
    pub covered: Vec<u32>,
    /// Covered indices that the length budget says are unreachable by a
    /// map fixing `p_0`: resolution artifacts.
    pub artifacts: Vec<u32>,
}

/// Which marked points `p_n` the image `F(P)` reaches at pitch `delta`.
pub fn p_point_coverage(f: &IfsSpec, p: &PModel, delta: f64) -> Result<Coverage> {
    check_dim(f.dim, 2)?;
    let bounds = (0..f.maps.len())
        .map(|i| {
            f.attested_bound(i)
                .ok_or_else(|| Error::Refused(format!("map {i} has no Lipschitz data")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if let Some((i, b)) = bounds.iter().enumerate().find(|(_, b)| **b > 1.0) {
        return Err(Error::Refused(format!("map {i} has bound {b} > 1; lengths may grow")));
    }
    // Per map and per line, the image samples.
    let clouds = p
        .lines
        .iter()
        .map(|l| crate::geometry::sample_polyline(l, delta))
        .collect::<Result<Vec<_>>>()?;
    let images = f
        .maps
        .par_iter()
        .map(|m| clouds.iter().map(|c| m.image(c)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let p0 = crate::continua::p_point(0);
    let fixes_p0 = f
        .maps
        .iter()
        .map(|m| Ok(m.eval(&p0)?.distance(&p0) <= delta))
        .collect::<Result<Vec<bool>>>()?;
    let reach = MEMBERSHIP_FACTOR * delta;
    let mut covered = Vec::new();
    let mut artifacts = Vec::new();
    let mut best: Option<(f64, u32)> = None;
    for n in 0..=p.n_max {
        let pn = crate::continua::p_point(n);
        let mut nearest = f64::INFINITY;
        // (map, line index i) pairs whose image reaches p_n.
        let mut contributors = Vec::new();
        for (k, per_line) in images.iter().enumerate() {
            for (li, img) in per_line.iter().enumerate() {
                let d = img.chunks_exact(2).map(|q| dist(q, pn.coords())).fold(f64::INFINITY, f64::min);
                nearest = nearest.min(d);
                if d <= reach {
                    contributors.push((k, li as i64 + 1));
                }
            }
        }
        if nearest <= reach {
            covered.push(n);
            let explained = contributors.iter().any(|&(k, i)| !fixes_p0[k] || n == 0 || i >= n as i64);
            if !explained {
                artifacts.push(n);
            }
        } else if best.map_or(true, |(d, _)| nearest > d) {
            best = Some((nearest, n));
        }
    }
    let mut note = format!("covered: {covered:?}");
    if !artifacts.is_empty() {
        let _ = write!(note, "; length budget flags {artifacts:?} as resolution artifacts");
    }
    let certificate = match best {
        Some((gap, n)) => Certificate::new(Claim::PCoverage, Verdict::Certified, delta, 0, note)
            .with_margin(gap)
            .with_witness(format!("p{n}"), crate::continua::p_point(n)),
        None => Certificate::new(
            Claim::PCoverage,
            Verdict::Inconclusive,
            delta,
            0,
            format!("every p_n with n <= {} lies within 3 delta of the image; {note}", p.n_max),
        ),
    };
    Ok(Coverage { certificate, covered, artifacts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continua::{build_needle, build_p, default_base};
    use crate::geometry::ContinuumModel;

    fn interval_ifs(dim: usize) -> IfsSpec {
        let mut shift = vec![0.0; dim];
        shift[0] = 0.5;
        IfsSpec::new(
            vec![MapSpec::scaling(0.5, vec![0.0; dim]).unwrap(), MapSpec::scaling(0.5, shift).unwrap()],
            IfsMode::Strict,
        )
        .unwrap()
    }

    fn params() -> DichotomyParams {
        DichotomyParams { eps0: 0.1, k_max: 5, seed: 7, pairs: 20_000 }
    }

    #[test]
    fn length_budget_examples() {
        assert!(!length_budget(2, 5).unwrap());
        assert!(length_budget(5, 5).unwrap());
        assert!(length_budget(7, 3).unwrap());
        assert!(length_budget(0, 3).is_err());
        for i in 1..=64 {
            for n in 1..=64 {
                assert_eq!(length_budget(i, n).unwrap(), i >= n);
            }
        }
    }

    #[test]
    fn image_length_examples() {
        let p = build_p(3, 1e-9).unwrap();
        let id = image_length_bound(&MapSpec::identity(2).unwrap(), p.line(2), 1e-3).unwrap();
        assert!((id.bound - 4.0).abs() < 1e-8);
        assert!(id.holds());
        let seg = Polyline::new(&[Point::xy(0.0, 0.0), Point::xy(1.0, 0.0)]).unwrap();
        let half = image_length_bound(&MapSpec::scaling(0.5, vec![0.0, 0.0]).unwrap(), &seg, 1e-3).unwrap();
        assert!((half.bound - 0.5).abs() < 1e-15);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot = MapSpec::affine(vec![c, -s, s, c], vec![0.1, 0.2]).unwrap();
        let r = image_length_bound(&rot, p.line(3), 1e-3).unwrap();
        // Oracle: a rotation preserves polyline length exactly.
        let exact = p.line(3).map(|v| rot.apply(v).unwrap()).unwrap().length();
        assert!((r.bound - exact).abs() < 1e-9 * exact);
        assert!(r.holds());
        let declared = MapSpec::needle_h2(2).unwrap().with_declared_lip(0.5, None).unwrap();
        assert!(matches!(image_length_bound(&declared, &seg, 1e-3), Err(Error::Refused(_))));
    }

    #[test]
    fn constant_to_tip_is_consistent() {
        let needle = build_needle(&default_base(2).unwrap(), 100.0, 1e-3).unwrap();
        let c = needle_dichotomy_check(&MapSpec::constant(Point::xy(0.0, 0.0)), &needle, params()).unwrap();
        assert_eq!(c.verdict, Verdict::Consistent);
        assert_eq!(c.note, "constant");
        assert_eq!(c.margin, 0.0);
        assert_eq!(c.witnesses[0].point, Point::xy(0.0, 0.0));
    }

    #[test]
    fn halving_is_not_a_self_map() {
        let needle = build_needle(&default_base(2).unwrap(), 100.0, 1e-3).unwrap();
        let f = MapSpec::scaling(0.5, vec![0.0, 0.0]).unwrap();
        let c = needle_dichotomy_check(&f, &needle, params()).unwrap();
        assert_eq!(c.verdict, Verdict::Inconclusive);
        assert_eq!(c.note, "not a self-map at resolution");
        assert_eq!(c.exit_code(), 1);
    }

    #[test]
    fn parameter_halving_is_refuted() {
        let needle = build_needle(&default_base(2).unwrap(), 100.0, 1e-3).unwrap();
        let f = MapSpec::needle_half(2).unwrap().with_declared_lip(0.9, None).unwrap();
        let c = needle_dichotomy_check(&f, &needle, params()).unwrap();
        assert_eq!(c.verdict, Verdict::Refuted);
        assert!(c.margin > 0.1);
        assert_eq!(c.witnesses.len(), 2);
        let (x, y) = (&c.witnesses[0].point, &c.witnesses[1].point);
        let ratio = f.eval(x).unwrap().distance(&f.eval(y).unwrap()) / x.distance(y);
        assert!(ratio > 1.0);
        assert_eq!(c.exit_code(), 2);
    }

    #[test]
    fn fixed_tip_case_contradicts_series_bound() {
        // Parameter halving fixes h(p); taking its declared bound at face
        // value, the orbit sum is finite but the chain profile to the tip
        // is not.
        let needle = build_needle(&default_base(2).unwrap(), 100.0, 1e-3).unwrap();
        let f = MapSpec::needle_half(2).unwrap().with_declared_lip(0.9, None).unwrap();
        let p = params();
        let cloud = needle.refine(p.delta()).unwrap();
        let images = f.image(&cloud).unwrap();
        let c = case_fixed_tip(&needle, &cloud, &images, 0.9, p).unwrap();
        assert_eq!(c.verdict, Verdict::Inconclusive, "{}", c.note);
        // With a tight bound the series is small enough to be overtaken.
        let c = case_fixed_tip(&needle, &cloud, &images, 1e-3, p).unwrap();
        assert_eq!(c.verdict, Verdict::Certified, "{}", c.note);
        assert!(c.margin > 0.0);
    }

    #[test]
    fn moved_tip_case_separates_profiles() {
        // z -> h(q) - z sends the tip to the far end and back.
        let needle = build_needle(&default_base(2).unwrap(), 100.0, 1e-3).unwrap();
        let hq = needle.marked_point("h(q)").unwrap().clone();
        let f = MapSpec::affine(vec![-1.0, 0.0, 0.0, -1.0], hq.coords().to_vec()).unwrap();
        let p = params();
        let cloud = needle.refine(p.delta()).unwrap();
        let images = f.image(&cloud).unwrap();
        let c = case_moved_tip(&needle, &cloud, &images, 0.5, p).unwrap();
        assert_ne!(c.verdict, Verdict::Refuted);
    }

    #[test]
    fn fixed_set_examples() {
        let f = interval_ifs(1);
        let seg = ContinuumModel::segment(Point::new(vec![0.0]).unwrap(), Point::new(vec![1.0]).unwrap()).unwrap();
        let c = fixed_set_check(&f, &seg, 1e-3).unwrap();
        assert_eq!(c.verdict, Verdict::Inconclusive);
        let needle = build_needle(&default_base(2).unwrap(), 100.0, 1e-3).unwrap();
        let c = fixed_set_check(&interval_ifs(2), &needle, 1e-3).unwrap();
        assert_eq!(c.verdict, Verdict::Certified);
        assert!(c.margin > 0.0);
        let k = IfsSpec::new(vec![MapSpec::constant(Point::xy(0.0, 0.0))], IfsMode::Strict).unwrap();
        let c = fixed_set_check(&k, &needle, 1e-3).unwrap();
        assert_eq!(c.verdict, Verdict::Certified);
        assert!(c.margin > 0.5);
    }

    #[test]
    fn coverage_examples() {
        let p = build_p(5, 1e-9).unwrap();
        let k = IfsSpec::new(vec![MapSpec::constant(Point::xy(0.0, 0.0))], IfsMode::Strict).unwrap();
        let cov = p_point_coverage(&k, &p, 1e-3).unwrap();
        assert_eq!(cov.covered, vec![0]);
        assert_eq!(cov.certificate.verdict, Verdict::Certified);
        assert_eq!(cov.certificate.witnesses[0].label, "p1");
        let id = IfsSpec::new(vec![MapSpec::identity(2).unwrap()], IfsMode::Weak).unwrap();
        let cov = p_point_coverage(&id, &p, 1e-3).unwrap();
        assert_eq!(cov.covered, (0..=5).collect::<Vec<_>>());
        assert_eq!(cov.certificate.verdict, Verdict::Inconclusive);
        assert!(cov.artifacts.is_empty());
        let q = IfsSpec::new(vec![MapSpec::scaling(0.25, vec![0.0, 0.0]).unwrap()], IfsMode::Strict).unwrap();
        let cov = p_point_coverage(&q, &p, 1e-3).unwrap();
        assert_eq!(cov.certificate.verdict, Verdict::Certified);
        assert!(!cov.covered.contains(&1));
        let unbounded = IfsSpec::new(vec![MapSpec::needle_h2(2).unwrap()], IfsMode::Weak).unwrap();
        assert!(p_point_coverage(&unbounded, &p, 1e-3).is_ok());
    }

    #[test]
    fn serialization() {
        let c = Certificate::new(Claim::FixedSetGap, Verdict::Certified, 1e-3, 3, "gap")
            .with_margin(0.25)
            .with_witness("w", Point::xy(1.0, 2.0));
        let kv = c.to_key_value();
        assert!(kv.starts_with("claim=fixed_set_gap\nverdict=certified\nmargin=2.5000000000000000e-1\n"));
        assert!(kv.contains("witness=w 1.0000000000000000e0 2.0000000000000000e0\n"));
        assert_eq!(c.to_csv_row().split(',').count(), CSV_HEADER.split(',').count());
    }
}
