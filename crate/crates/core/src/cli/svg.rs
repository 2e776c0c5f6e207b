//! Small hand-rolled SVG line and stem plots.

use std::fmt::Write as _;

use super::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Line,
    Stem,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 70.0;
const MR: f64 = 150.0;
const MT: f64 = 30.0;
const MB: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn label(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// Plots every column after the first against the first. Clipped or
/// non-finite cells break the line.
pub fn render(table: &Table, title: &str, kind: PlotKind) -> String {
    let xs = table.column(0);
    let series: Vec<(String, Vec<Option<f64>>)> =
        (1..table.header.len()).map(|j| (table.header[j].clone(), table.column(j))).collect();

    let xv: Vec<f64> = xs.iter().flatten().copied().collect();
    let yv: Vec<f64> = series.iter().flat_map(|(_, c)| c.iter().flatten().copied()).collect();
    let (mut x0, mut x1) = bounds(&xv);
    let (mut y0, mut y1) = bounds(&yv);
    if kind == PlotKind::Stem {
        y0 = y0.min(0.0);
        x0 -= 0.5;
        x1 += 0.5;
    }
    if x1 <= x0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y1 <= y0 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    y1 += pad;
    if kind == PlotKind::Line {
        y0 -= pad;
    }
    let px = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let py = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#, (ML + W - MR) / 2.0, esc(title));
    let _ = writeln!(
        s,
        r#"<rect x="{ML}" y="{MT}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - ML - MR,
        H - MT - MB
    );
    for t in nice_ticks(x0, x1) {
        let x = px(t);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, H - MB, H - MB + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, H - MB + 18.0, label(t));
    }
    for t in nice_ticks(y0, y1) {
        let y = py(t);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{ML}" y2="{y:.2}" stroke="black"/>"#, ML - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, ML - 8.0, y + 4.0, label(t));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (ML + W - MR) / 2.0, H - 12.0, esc(&table.header[0]));

    let n_series = series.len().max(1) as f64;
    for (k, (name, col)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        match kind {
            PlotKind::Line => {
                let mut seg: Vec<String> = Vec::new();
                let flush = |seg: &mut Vec<String>, s: &mut String| {
                    if seg.len() > 1 {
                        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, seg.join(" "));
                    }
                    seg.clear();
                };
                for (x, y) in xs.iter().zip(col) {
                    match (x, y) {
                        (Some(x), Some(y)) => seg.push(format!("{:.2},{:.2}", px(*x), py(*y))),
                        _ => flush(&mut seg, &mut s),
                    }
                }
                flush(&mut seg, &mut s);
            }
            PlotKind::Stem => {
                let off = (k as f64 - (n_series - 1.0) / 2.0) * 0.6 / n_series;
                for (x, y) in xs.iter().zip(col) {
                    if let (Some(x), Some(y)) = (x, y) {
                        let (cx, cy) = (px(x + off), py(*y));
                        let _ = writeln!(s, r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{cy:.2}" stroke="{color}"/>"#, py(0.0));
                        let _ = writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="2.5" fill="{color}"/>"#);
                    }
                }
            }
        }
        let ly = MT + 16.0 + 18.0 * k as f64;
        let lx = W - MR + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, esc(name));
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 1.0);
    }
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

fn esc(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
