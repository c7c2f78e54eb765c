//! Eccentricity–error plots as standalone SVG.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::EccErrorCurve;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 56.0;
const TICKS: usize = 4;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Binned mean ± std band per curve over a square `[0, range]²` frame, with
/// the `y = x` line that a predictor always answering the DMV would follow.
/// Empty bins are skipped.
pub fn render_curve_svg(curves: &[(&str, &EccErrorCurve)]) -> Result<String> {
    let Some((_, first)) = curves.first() else {
        return Err(Error::arg("render_curve_svg needs at least one curve"));
    };
    let range = first.ecc_range;
    let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + pw * (x / range).clamp(0.0, 1.0);
    let sy = |y: f64| MARGIN_TOP + ph * (1.0 - (y / range).clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in 0..=TICKS {
        let v = range * t as f64 / TICKS as f64;
        let (x, y) = (sx(v), sy(v));
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{b:.2}" x2="{x:.2}" y2="{b2:.2}" stroke="black"/><text x="{x:.2}" y="{ty:.2}" text-anchor="middle">{v:.2}</text>"#,
            b = MARGIN_TOP + ph,
            b2 = MARGIN_TOP + ph + 5.0,
            ty = MARGIN_TOP + ph + 18.0
        );
        let _ = writeln!(
            s,
            r#"<line x1="{l:.2}" y1="{y:.2}" x2="{MARGIN_LEFT}" y2="{y:.2}" stroke="black"/><text x="{tx:.2}" y="{ty:.2}" text-anchor="end">{v:.2}</text>"#,
            l = MARGIN_LEFT - 5.0,
            tx = MARGIN_LEFT - 8.0,
            ty = y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">eccentricity</text>"#,
        MARGIN_LEFT + pw / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{y:.2}" text-anchor="middle" transform="rotate(-90 16 {y:.2})">absolute error</text>"#,
        y = MARGIN_TOP + ph / 2.0
    );
    let _ = writeln!(
        s,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#555" stroke-dasharray="6 4"/>"##,
        sx(0.0),
        sy(0.0),
        sx(range),
        sy(range)
    );

    for (k, (name, curve)) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let bins: Vec<_> = curve.binned.iter().filter(|b| b.count > 0).collect();
        if !bins.is_empty() {
            let upper = bins
                .iter()
                .map(|b| format!("{:.2},{:.2}", sx(b.center), sy(b.mean + b.std)));
            let lower = bins
                .iter()
                .rev()
                .map(|b| format!("{:.2},{:.2}", sx(b.center), sy((b.mean - b.std).max(0.0))));
            let band: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                band.join(" ")
            );
            let line: Vec<String> = bins
                .iter()
                .map(|b| format!("{:.2},{:.2}", sx(b.center), sy(b.mean)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                line.join(" ")
            );
        }
        let ly = MARGIN_TOP + 16.0 + 18.0 * k as f64;
        let lx = MARGIN_LEFT + 12.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.2}" y="{:.2}" width="14" height="4" fill="{color}"/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
            ly - 6.0,
            lx + 20.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn save_curve_svg(curves: &[(&str, &EccErrorCurve)], path: &Path) -> Result<()> {
    let svg = render_curve_svg(curves)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
