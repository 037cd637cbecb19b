//! Deterministic SVG figures on a fixed 1000x1000 viewport.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{Point, Polyline};

pub const SIZE: f64 = 1000.0;
const MARGIN: f64 = 60.0;

/// Affine map from data coordinates to the viewport, y pointing up.
struct Frame {
    x0: f64,
    y0: f64,
    scale: f64,
    ox: f64,
    oy: f64,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = (f64, f64)>) -> Result<Frame> {
        let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
        for (x, y) in xs {
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        }
        if !(lo.0.is_finite() && hi.0.is_finite()) {
            return Err(Error::Input("nothing to draw".into()));
        }
        let span = (hi.0 - lo.0).max(hi.1 - lo.1).max(1e-12);
        let scale = (SIZE - 2.0 * MARGIN) / span;
        // Center the shorter side.
        let ox = MARGIN + ((SIZE - 2.0 * MARGIN) - (hi.0 - lo.0) * scale) / 2.0;
        let oy = MARGIN + ((SIZE - 2.0 * MARGIN) - (hi.1 - lo.1) * scale) / 2.0;
        Ok(Frame { x0: lo.0, y0: lo.1, scale, ox, oy })
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (self.ox + (x - self.x0) * self.scale, SIZE - (self.oy + (y - self.y0) * self.scale))
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1000\" height=\"1000\" viewBox=\"0 0 1000 1000\">"
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(out, "<rect x=\"0\" y=\"0\" width=\"1000\" height=\"1000\" fill=\"white\"/>");
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Coordinates are rounded to 1/1000 pixel; consecutive vertices that round
/// to the same position are dropped.
fn path(frame: &Frame, pts: impl Iterator<Item = (f64, f64)>) -> String {
    let mut d = String::new();
    let mut last = String::new();
    for (x, y) in pts {
        let (px, py) = frame.px(x, y);
        let pos = format!("{px:.3} {py:.3}");
        if pos == last {
            continue;
        }
        d.push_str(if d.is_empty() { "M" } else { " L" });
        d.push_str(&pos);
        last = pos;
    }
    d
}

const PALETTE: [&str; 6] = ["#1f4e79", "#a23b2a", "#2e7d32", "#6a1b9a", "#ef6c00", "#00838f"];

/// Draws the first two coordinates of each polyline as a path and each
/// marked point as a labelled circle.
pub fn render_model(title: &str, pieces: &[(String, Polyline)], marked: &BTreeMap<String, Point>) -> Result<String> {
    let xy = |v: &[f64]| (v[0], v.get(1).copied().unwrap_or(0.0));
    let frame = Frame::fit(
        pieces
            .iter()
            .flat_map(|(_, l)| l.vertices().map(xy))
            .chain(marked.values().map(|p| xy(p.coords()))),
    )?;
    let mut out = String::new();
    header(&mut out, title);
    for (k, (name, line)) in pieces.iter().enumerate() {
        let colour = if name.starts_with("base:") { "#9e9e9e" } else { PALETTE[k % PALETTE.len()] };
        let _ = writeln!(
            out,
            "<path id=\"{}\" d=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"1\"/>",
            escape(name),
            path(&frame, line.vertices().map(xy))
        );
    }
    for (label, p) in marked {
        let (x, y) = xy(p.coords());
        let (px, py) = frame.px(x, y);
        let _ = writeln!(out, "<circle cx=\"{px:.3}\" cy=\"{py:.3}\" r=\"4\" fill=\"black\"/>");
        let _ = writeln!(
            out,
            "<text x=\"{:.3}\" y=\"{:.3}\" font-family=\"sans-serif\" font-size=\"14\">{}</text>",
            px + 6.0,
            py - 6.0,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Log-log plot of a chain profile: value against epsilon, with the
/// disconnected entries omitted.
pub fn render_profile(title: &str, rows: &[(f64, f64, Option<f64>)]) -> Result<String> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|&(e, _, v)| v.filter(|v| *v > 0.0).map(|v| (e.log10(), v.log10())))
        .collect();
    if pts.is_empty() {
        return Err(Error::Input("profile has no positive finite entries".into()));
    }
    let frame = Frame::fit(pts.iter().copied())?;
    let mut out = String::new();
    header(&mut out, title);
    let (ax, ay) = (MARGIN / 2.0, SIZE - MARGIN / 2.0);
    let _ = writeln!(
        out,
        "<path d=\"M{ax:.3} {ay:.3} L{:.3} {ay:.3} M{ax:.3} {ay:.3} L{ax:.3} {:.3}\" stroke=\"black\" fill=\"none\"/>",
        SIZE - MARGIN / 2.0,
        MARGIN / 2.0
    );
    let _ = writeln!(
        out,
        "<text x=\"500\" y=\"{:.3}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">log10 epsilon</text>",
        SIZE - 8.0
    );
    let _ = writeln!(
        out,
        "<text x=\"14\" y=\"500\" transform=\"rotate(-90 14 500)\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">log10 chain distance</text>"
    );
    let _ = writeln!(
        out,
        "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>",
        path(&frame, pts.iter().copied()),
        PALETTE[0]
    );
    for &(x, y) in &pts {
        let (px, py) = frame.px(x, y);
        let _ = writeln!(out, "<circle cx=\"{px:.3}\" cy=\"{py:.3}\" r=\"4\" fill=\"{}\"/>", PALETTE[1]);
    }
    out.push_str("</svg>\n");
    Ok(out)
}
