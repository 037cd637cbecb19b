//! Text formats: polyline model files, IFS descriptions, profile CSV.
//!
//! Model file:
//!
//! ```text
//! dim 2
//! source needle 100            (optional; needle files only)
//! polyline l1 3
//! 0 0
//! ...
//! marked p0 0 0
//! ```
//!
//! IFS file: one map per line (`affine`, `needle_h1 <s>`, `needle_h2`,
//! `needle_half`, `constant <coords>`), `compose` followed by a
//! `begin`/`end` block of maps applied in order, `lip <value>` attaching a
//! declared bound to the preceding map, `mode strict|weak`, `#` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::continua::{build_needle, NeedleModel};
use crate::error::{Error, Result};
use crate::geometry::{Continuum, ContinuumModel, Point, PointCloud, Polyline};
use crate::ifs::{IfsMode, IfsSpec, MapSpec};
use crate::metric::{ChainMetricProfile, ProfileVerdict};

/// 17 significant digits, which round-trips every `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn join17(v: &[f64]) -> String {
    v.iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(" ")
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

/// What a model file describes.
#[derive(Debug, Clone)]
pub enum ModelFile {
    Plain(ContinuumModel),
    /// A needle image rebuilt from its stored base, so it can be resampled
    /// at any pitch.
    Needle { needle: NeedleModel, build_delta: f64 },
}

impl ModelFile {
    pub fn continuum(&self) -> &(dyn Continuum + Sync) {
        match self {
            ModelFile::Plain(m) => m,
            ModelFile::Needle { needle, .. } => needle,
        }
    }

    /// Polylines and marks to draw.
    pub fn drawing(&self) -> (Vec<(String, Polyline)>, BTreeMap<String, Point>) {
        match self {
            ModelFile::Plain(m) => (m.pieces().to_vec(), m.marked().clone()),
            ModelFile::Needle { needle, .. } => {
                let mut pieces: Vec<_> =
                    needle.base.pieces().iter().map(|(n, p)| (format!("base:{n}"), p.clone())).collect();
                pieces.extend(needle.image.pieces().iter().cloned());
                let mut marked = needle.base.marked().clone();
                marked.extend(needle.image.marked().clone());
                (pieces, marked)
            }
        }
    }
}

fn write_pieces(out: &mut String, pieces: &[(String, Polyline)]) {
    for (name, line) in pieces {
        let _ = writeln!(out, "polyline {name} {}", line.vertex_count());
        for v in line.vertices() {
            let _ = writeln!(out, "{}", join17(v));
        }
    }
}

fn write_marks(out: &mut String, marked: &BTreeMap<String, Point>) {
    for (label, p) in marked {
        let _ = writeln!(out, "marked {label} {}", join17(p.coords()));
    }
}

pub fn model_to_string(m: &ContinuumModel) -> String {
    let mut out = format!("dim {}\n", m.dim());
    write_pieces(&mut out, m.pieces());
    write_marks(&mut out, m.marked());
    out
}

/// Needle files carry the base under `base:`-prefixed names and a `source`
/// line so readers can rebuild the exact image.
pub fn needle_to_string(n: &NeedleModel, build_delta: f64) -> String {
    let mut out = format!("dim {}\nsource needle {} {}\n", n.dim, fmt17(n.sharpness), fmt17(build_delta));
    let base: Vec<_> = n.base.pieces().iter().map(|(name, p)| (format!("base:{name}"), p.clone())).collect();
    write_pieces(&mut out, &base);
    write_pieces(&mut out, n.image.pieces());
    for (label, p) in n.base.marked() {
        let _ = writeln!(out, "marked base:{label} {}", join17(p.coords()));
    }
    write_marks(&mut out, n.image.marked());
    out
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("not a number: {tok:?}") })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, msg: format!("non-finite number {tok:?}") });
    }
    Ok(v)
}

fn parse_coords(toks: &[&str], line: usize) -> Result<Vec<f64>> {
    toks.iter().map(|t| parse_f64(t, line)).collect()
}

pub fn parse_model(text: &str) -> Result<ModelFile> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (ln, head) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty model file".into() })?;
    let toks: Vec<&str> = head.split_whitespace().collect();
    let dim: usize = match toks.as_slice() {
        ["dim", d] => d.parse().map_err(|_| Error::Parse { line: ln, msg: format!("bad dimension {d:?}") })?,
        _ => return Err(Error::Parse { line: ln, msg: "expected `dim <n>`".into() }),
    };
    let mut source: Option<(f64, f64)> = None;
    let mut pieces = Vec::new();
    let mut marked = BTreeMap::new();
    while let Some((ln, l)) = lines.next() {
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks.first().copied() {
            Some("source") => match toks.as_slice() {
                ["source", "needle", s, d] => source = Some((parse_f64(s, ln)?, parse_f64(d, ln)?)),
                _ => return Err(Error::Parse { line: ln, msg: "expected `source needle <sharpness> <delta>`".into() }),
            },
            Some("polyline") => {
                let (name, count) = match toks.as_slice() {
                    ["polyline", name, count] => (
                        name.to_string(),
                        count.parse::<usize>().map_err(|_| Error::Parse { line: ln, msg: "bad vertex count".into() })?,
                    ),
                    _ => return Err(Error::Parse { line: ln, msg: "expected `polyline <name> <count>`".into() }),
                };
                let mut coords = Vec::with_capacity(count * dim);
                for _ in 0..count {
                    let (vl, v) = lines.next().ok_or(Error::Parse { line: ln, msg: format!("polyline {name} truncated") })?;
                    let vals = parse_coords(&v.split_whitespace().collect::<Vec<_>>(), vl)?;
                    if vals.len() != dim {
                        return Err(Error::Parse { line: vl, msg: format!("expected {dim} coordinates") });
                    }
                    coords.extend(vals);
                }
                let line = Polyline::from_flat(dim, coords).map_err(|e| Error::Parse { line: ln, msg: e.to_string() })?;
                pieces.push((name, line));
            }
            Some("marked") => {
                if toks.len() != dim + 2 {
                    return Err(Error::Parse { line: ln, msg: format!("expected `marked <label>` and {dim} coordinates") });
                }
                let p = Point::new(parse_coords(&toks[2..], ln)?).map_err(|e| Error::Parse { line: ln, msg: e.to_string() })?;
                marked.insert(toks[1].to_string(), p);
            }
            _ => return Err(Error::Parse { line: ln, msg: format!("unknown directive {l:?}") }),
        }
    }
    match source {
        None => Ok(ModelFile::Plain(ContinuumModel::new(pieces, marked)?)),
        Some((sharpness, build_delta)) => {
            let base_pieces: Vec<_> = pieces
                .into_iter()
                .filter_map(|(n, p)| n.strip_prefix("base:").map(|s| (s.to_string(), p)))
                .collect();
            let base_marks: BTreeMap<_, _> = marked
                .into_iter()
                .filter_map(|(n, p)| n.strip_prefix("base:").map(|s| (s.to_string(), p)))
                .collect();
            let base = ContinuumModel::new(base_pieces, base_marks)?;
            let needle = build_needle(&base, sharpness, build_delta)?;
            Ok(ModelFile::Needle { needle, build_delta })
        }
    }
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    parse_model(&std::fs::read_to_string(path)?)
}

/// Clouds are written as `dim`, `pitch`, then one `point` line per sample.
pub fn cloud_to_string(c: &PointCloud) -> String {
    let mut out = format!("dim {}\npitch {}\n", c.dim(), fmt17(c.pitch()));
    for p in c.points() {
        let _ = writeln!(out, "point {}", join17(p));
    }
    out
}

pub fn parse_cloud(text: &str) -> Result<PointCloud> {
    let mut dim = None;
    let mut pitch = None;
    let mut coords = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks.as_slice() {
            ["dim", d] => dim = Some(d.parse::<usize>().map_err(|_| Error::Parse { line: ln, msg: "bad dimension".into() })?),
            ["pitch", p] => pitch = Some(parse_f64(p, ln)?),
            ["point", rest @ ..] => {
                let d = dim.ok_or(Error::Parse { line: ln, msg: "`point` before `dim`".into() })?;
                if rest.len() != d {
                    return Err(Error::Parse { line: ln, msg: format!("expected {d} coordinates") });
                }
                coords.extend(parse_coords(rest, ln)?);
            }
            _ => return Err(Error::Parse { line: ln, msg: format!("unknown directive {l:?}") }),
        }
    }
    let dim = dim.ok_or(Error::Parse { line: 1, msg: "missing `dim`".into() })?;
    let pitch = pitch.ok_or(Error::Parse { line: 1, msg: "missing `pitch`".into() })?;
    PointCloud::from_flat(dim, coords, pitch)
}

fn parse_map_line(toks: &[&str], ln: usize) -> Result<Option<MapSpec>> {
    let err = |msg: String| Error::Parse { line: ln, msg };
    let wrap = |r: Result<MapSpec>| r.map_err(|e| err(e.to_string()));
    Ok(Some(match toks[0] {
        "affine" => {
            let vals = parse_coords(&toks[1..], ln)?;
            // n^2 + n coefficients: matrix rows, then offset.
            let n = (1..=crate::geometry::MAX_DIM)
                .find(|n| n * n + n == vals.len())
                .ok_or_else(|| err(format!("affine needs n^2+n numbers, got {}", vals.len())))?;
            wrap(MapSpec::affine(vals[..n * n].to_vec(), vals[n * n..].to_vec()))?
        }
        "needle_h1" => match toks {
            [_, s] => wrap(MapSpec::needle_h1(2, parse_f64(s, ln)?))?,
            [_, s, d] => wrap(MapSpec::needle_h1(
                d.parse().map_err(|_| err("bad dimension".into()))?,
                parse_f64(s, ln)?,
            ))?,
            _ => return Err(err("expected `needle_h1 <sharpness> [dim]`".into())),
        },
        "needle_h2" => match toks {
            [_] => wrap(MapSpec::needle_h2(2))?,
            [_, d] => wrap(MapSpec::needle_h2(d.parse().map_err(|_| err("bad dimension".into()))?))?,
            _ => return Err(err("expected `needle_h2 [dim]`".into())),
        },
        "needle_half" => wrap(MapSpec::needle_half(2))?,
        "constant" => MapSpec::constant(Point::new(parse_coords(&toks[1..], ln)?).map_err(|e| err(e.to_string()))?),
        _ => return Ok(None),
    }))
}

pub fn parse_ifs(text: &str) -> Result<IfsSpec> {
    let mut maps: Vec<MapSpec> = Vec::new();
    let mut mode = IfsMode::Strict;
    // Some(parts) while inside a compose block.
    let mut block: Option<Vec<MapSpec>> = None;
    let mut awaiting_begin = false;
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        last_line = ln;
        let l = raw.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let toks: Vec<&str> = l.split_whitespace().collect();
        if awaiting_begin {
            if toks != ["begin"] {
                return Err(Error::Parse { line: ln, msg: "expected `begin` after `compose`".into() });
            }
            awaiting_begin = false;
            block = Some(Vec::new());
            continue;
        }
        match toks[0] {
            "mode" => {
                if block.is_some() {
                    return Err(Error::Parse { line: ln, msg: "`mode` inside a compose block".into() });
                }
                mode = match toks.get(1).copied() {
                    Some("strict") => IfsMode::Strict,
                    Some("weak") => IfsMode::Weak,
                    _ => return Err(Error::Parse { line: ln, msg: "expected `mode strict|weak`".into() }),
                }
            }
            "compose" => {
                if block.is_some() {
                    return Err(Error::Parse { line: ln, msg: "nested compose".into() });
                }
                awaiting_begin = true;
            }
            "begin" => return Err(Error::Parse { line: ln, msg: "`begin` without `compose`".into() }),
            "end" => {
                let parts = block.take().ok_or(Error::Parse { line: ln, msg: "`end` without `begin`".into() })?;
                maps.push(MapSpec::compose(parts).map_err(|e| Error::Parse { line: ln, msg: e.to_string() })?);
            }
            "lip" => {
                let v = match toks.as_slice() {
                    [_, v] => parse_f64(v, ln)?,
                    _ => return Err(Error::Parse { line: ln, msg: "expected `lip <value>`".into() }),
                };
                let target = match block.as_mut() {
                    Some(parts) => parts.last_mut(),
                    None => maps.last_mut(),
                }
                .ok_or(Error::Parse { line: ln, msg: "`lip` before any map".into() })?;
                *target = target
                    .clone()
                    .with_declared_lip(v, None)
                    .map_err(|e| Error::Parse { line: ln, msg: e.to_string() })?;
            }
            _ => {
                let map = parse_map_line(&toks, ln)?
                    .ok_or(Error::Parse { line: ln, msg: format!("unknown map {:?}", toks[0]) })?;
                match block.as_mut() {
                    Some(parts) => parts.push(map),
                    None => maps.push(map),
                }
            }
        }
    }
    if block.is_some() || awaiting_begin {
        return Err(Error::Parse { line: last_line, msg: "unterminated compose block".into() });
    }
    IfsSpec::new(maps, mode).map_err(|e| Error::Parse { line: last_line, msg: e.to_string() })
}

pub fn read_ifs(path: &Path) -> Result<IfsSpec> {
    parse_ifs(&std::fs::read_to_string(path)?)
}

pub const PROFILE_CSV_HEADER: &str = "epsilon,pitch,value";

/// Profile as CSV (empty value for a disconnected entry) followed by a
/// `verdict=...` line.
pub fn profile_to_string(p: &ChainMetricProfile) -> String {
    let mut out = String::from(PROFILE_CSV_HEADER);
    out.push('\n');
    for e in &p.entries {
        let v = e.value.value().map(fmt17).unwrap_or_default();
        let _ = writeln!(out, "{},{},{}", fmt17(e.epsilon), fmt17(e.pitch), v);
    }
    let _ = writeln!(out, "{}", verdict_line(&p.verdict));
    out
}

pub fn verdict_line(v: &ProfileVerdict) -> String {
    match v {
        ProfileVerdict::Diverges { slope } => format!("verdict=diverges slope={}", fmt17(*slope)),
        ProfileVerdict::Converges { limit } => format!("verdict=converges limit={}", fmt17(*limit)),
        ProfileVerdict::Inconclusive { reason } => format!("verdict=inconclusive reason={reason}"),
    }
}

/// Reads the `(epsilon, pitch, value)` rows of a profile CSV.
pub fn parse_profile_csv(text: &str) -> Result<Vec<(f64, f64, Option<f64>)>> {
    let mut rows = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let ln = i + 1;
        let l = l.trim();
        if l.is_empty() || l == PROFILE_CSV_HEADER || l.starts_with("verdict=") {
            continue;
        }
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 3 {
            return Err(Error::Parse { line: ln, msg: "expected three CSV fields".into() });
        }
        let v = if f[2].is_empty() { None } else { Some(parse_f64(f[2], ln)?) };
        rows.push((parse_f64(f[0], ln)?, parse_f64(f[1], ln)?, v));
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 1, msg: "no profile rows".into() });
    }
    Ok(rows)
}
