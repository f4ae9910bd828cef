//! Minimal static SVG charts for experiment outputs.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    /// `(x, y, y_err)`; `y_err` may be zero.
    pub points: Vec<(f64, f64, f64)>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let vals: Vec<f64> = values
            .filter(|v| v.is_finite() && (!log || *v > 0.0))
            .map(|v| if log { v.log10() } else { v })
            .collect();
        let (mut lo, mut hi) = vals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Axis {
            lo: lo - pad,
            hi: hi + pad,
            log,
        }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.max(1e-300).log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn label(&self, t: f64) -> String {
        let v = if self.log { 10f64.powf(t) } else { t };
        format!("{v:.3e}")
    }
}

fn header(out: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + (W - LEFT - RIGHT) / 2.0,
        H - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        TOP + (H - TOP - BOTTOM) / 2.0,
        TOP + (H - TOP - BOTTOM) / 2.0,
        escape(y_label)
    );
}

fn frame(out: &mut String, xa: &Axis, ya: &Axis) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    let _ = writeln!(
        out,
        r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let px = x0 + f * (x1 - x0);
        let py = y0 - f * (y0 - y1);
        let tx = xa.lo + f * (xa.hi - xa.lo);
        let ty = ya.lo + f * (ya.hi - ya.lo);
        let _ = writeln!(
            out,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            y0 + 16.0,
            xa.label(tx)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            py + 4.0,
            ya.label(ty)
        );
    }
}

fn to_px(xa: &Axis, ya: &Axis, x: f64, y: f64) -> (f64, f64) {
    (
        LEFT + xa.frac(x) * (W - LEFT - RIGHT),
        (H - BOTTOM) - ya.frac(y) * (H - TOP - BOTTOM),
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart with error bars; both axes logarithmic when `loglog`.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], loglog: bool) -> String {
    let xa = Axis::new(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)), loglog);
    let ya = Axis::new(
        series
            .iter()
            .flat_map(|s| s.points.iter().flat_map(|p| [p.1, (p.1 - p.2).max(p.1 * 0.5), p.1 + p.2])),
        loglog,
    );
    let mut out = String::new();
    header(&mut out, title, x_label, y_label);
    frame(&mut out, &xa, &ya);
    for (j, s) in series.iter().enumerate() {
        let color = COLORS[j % COLORS.len()];
        let pts: Vec<(f64, f64)> = s.points.iter().map(|p| to_px(&xa, &ya, p.0, p.1)).collect();
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for (p, &(px, py)) in s.points.iter().zip(&pts) {
            let _ = writeln!(out, r#"<circle cx="{px:.1}" cy="{py:.1}" r="3" fill="{color}"/>"#);
            if p.2 > 0.0 {
                let lo = if loglog { (p.1 - p.2).max(p.1 * 0.5) } else { p.1 - p.2 };
                let (_, y_lo) = to_px(&xa, &ya, p.0, lo);
                let (_, y_hi) = to_px(&xa, &ya, p.0, p.1 + p.2);
                let _ = writeln!(
                    out,
                    r#"<line x1="{px:.1}" y1="{y_lo:.1}" x2="{px:.1}" y2="{y_hi:.1}" stroke="{color}"/>"#
                );
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            LEFT + 10.0,
            TOP + 16.0 + 14.0 * j as f64,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Scatter plot with the `y = x` diagonal.
pub fn scatter_with_diagonal(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let all = points.iter().flat_map(|p| [p.0, p.1]);
    let xa = Axis::new(all.clone(), false);
    let ya = Axis::new(all, false);
    let mut out = String::new();
    header(&mut out, title, x_label, y_label);
    frame(&mut out, &xa, &ya);
    let (dx0, dy0) = to_px(&xa, &ya, xa.lo.max(ya.lo), xa.lo.max(ya.lo));
    let (dx1, dy1) = to_px(&xa, &ya, xa.hi.min(ya.hi), xa.hi.min(ya.hi));
    let _ = writeln!(
        out,
        r#"<line x1="{dx0:.1}" y1="{dy0:.1}" x2="{dx1:.1}" y2="{dy1:.1}" stroke="gray" stroke-dasharray="4 3"/>"#
    );
    for &(x, y) in points {
        let (px, py) = to_px(&xa, &ya, x, y);
        let _ = writeln!(
            out,
            r#"<circle cx="{px:.1}" cy="{py:.1}" r="2.5" fill="{}" fill-opacity="0.6"/>"#,
            COLORS[0]
        );
    }
    out.push_str("</svg>\n");
    out
}
