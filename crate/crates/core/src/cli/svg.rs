//! Minimal deterministic SVG line charts.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const TICKS: usize = 5;

#[derive(Debug, Clone, Copy)]
pub struct Labels<'a> {
    pub title: &'a str,
    pub x: &'a str,
    pub y: &'a str,
}

/// Axis range, widened when the data are constant to rounding.
fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let flat = 1e-9 * lo.abs().max(hi.abs()).max(1.0);
    if hi - lo < flat {
        let mid = 0.5 * (lo + hi);
        let pad = 1e-3 * mid.abs().max(1.0);
        return (mid - pad, mid + pad);
    }
    (lo, hi)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Standalone SVG chart of one series.
pub fn render_svg(series: &[(f64, f64)], labels: &Labels) -> Result<String> {
    if series.is_empty() {
        return Err(Error::Configuration(format!("no data to plot for '{}'", labels.title)));
    }
    if series.iter().any(|(x, y)| !(x.is_finite() && y.is_finite())) {
        return Err(Error::Configuration(format!("non-finite data in '{}'", labels.title)));
    }
    let (x0, x1) = range(series.iter().map(|p| p.0));
    let (y0, y1) = range(series.iter().map(|p| p.1));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + 0.5 * pw,
        escape(labels.title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT:.1},{TOP:.1} V{:.1} H{:.1}" fill="none" stroke="black"/>"#,
        TOP + ph,
        LEFT + pw
    );
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let (x, y) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(x), sy(y));
        let _ = writeln!(
            s,
            r#"<path d="M{px:.1},{:.1} v5 M{LEFT:.1},{py:.1} h-5" stroke="black"/>"#,
            TOP + ph
        );
        let _ = writeln!(
            s,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{x:.4}</text>"#,
            TOP + ph + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            py + 4.0,
            tick(y, y1 - y0)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + 0.5 * pw,
        HEIGHT - 10.0,
        escape(labels.x)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + 0.5 * ph,
        TOP + 0.5 * ph,
        escape(labels.y)
    );
    let mut d = String::new();
    for (i, &(x, y)) in series.iter().enumerate() {
        let _ = write!(d, "{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, sx(x), sy(y));
    }
    let _ = writeln!(
        s,
        r#"<path d="{d}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#
    );
    s.push_str("</svg>\n");
    Ok(s)
}

/// Tick label with enough digits to separate ticks `span / TICKS` apart.
fn tick(v: f64, span: f64) -> String {
    let step = span / TICKS as f64;
    let digits = (-step.log10().floor() + 1.0).clamp(0.0, 12.0) as usize;
    if v != 0.0 && (v.abs() >= 1e6 || v.abs() < 1e-4) {
        format!("{v:.3e}")
    } else {
        format!("{v:.digits$}")
    }
}

pub fn emit_svg(series: &[(f64, f64)], labels: &Labels, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(series, labels)?)?;
    Ok(())
}
