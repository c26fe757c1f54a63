//! Minimal static SVG charts.

use std::fmt::Write;

use super::distribution::AlignmentMatrix;
use super::groups::GroupMean;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 70.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = (hi - lo) * 0.08;
    (lo - pad, hi + pad)
}

/// Labeled points, e.g. groups in PCA space.
pub fn scatter_svg(title: &str, points: &[(String, [f64; 2])], x_label: &str, y_label: &str) -> String {
    let (x0, x1) = range(points.iter().map(|p| p.1[0]));
    let (y0, y1) = range(points.iter().map(|p| p.1[1]));
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let mut out = String::new();
    open(&mut out, W, H, title);
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    if x0 < 0.0 && x1 > 0.0 {
        let _ = writeln!(out, r##"<line x1="{0}" y1="{MARGIN}" x2="{0}" y2="{1}" stroke="#ccc"/>"##, sx(0.0), H - MARGIN);
    }
    if y0 < 0.0 && y1 > 0.0 {
        let _ = writeln!(out, r##"<line x1="{MARGIN}" y1="{0}" x2="{1}" y2="{0}" stroke="#ccc"/>"##, sy(0.0), W - MARGIN);
    }
    for (name, [x, y]) in points {
        let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#3b6ea5"/>"##, sx(*x), sy(*y));
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, sx(*x) + 6.0, sy(*y) - 4.0, escape(name));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 25.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        H / 2.0,
        escape(y_label)
    );
    out.push_str("</svg>\n");
    out
}

/// Heatmap of p(observer | target); masked cells are left empty.
pub fn heatmap_svg(title: &str, m: &AlignmentMatrix) -> String {
    let cell = 52.0;
    let left = 150.0;
    let top = 150.0;
    let w = left + cell * m.cols.len() as f64 + 20.0;
    let h = top + cell * m.rows.len() as f64 + 40.0;
    let mut out = String::new();
    open(&mut out, w, h, title);
    for (j, c) in m.cols.iter().enumerate() {
        let x = left + cell * (j as f64 + 0.5);
        let _ = writeln!(out, r#"<text x="{x}" y="{}" transform="rotate(-45 {x} {})">{c}</text>"#, top - 8.0, top - 8.0);
    }
    for (i, r) in m.rows.iter().enumerate() {
        let y = top + cell * i as f64;
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{r}</text>"#, left - 6.0, y + cell / 2.0 + 4.0);
        for j in 0..m.cols.len() {
            let x = left + cell * j as f64;
            if m.masked[i][j] {
                let _ = writeln!(out, r##"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="white" stroke="#ddd"/>"##);
                continue;
            }
            let p = m.probabilities[i][j];
            let shade = (255.0 * (1.0 - p)).round() as u8;
            let _ = writeln!(
                out,
                r##"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)" stroke="#ddd"/>"##
            );
            let ink = if p > 0.5 { "white" } else { "black" };
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="{ink}">{p:.2}</text>"#,
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Bars with one standard error whiskers.
pub fn bar_chart_svg(title: &str, groups: &[GroupMean], y_label: &str) -> String {
    let hi = groups.iter().map(|g| g.mean + g.se).fold(0.0f64, f64::max).max(1e-9) * 1.1;
    let lo = groups.iter().map(|g| g.mean - g.se).fold(0.0f64, f64::min) * 1.1;
    let sy = |y: f64| H - MARGIN - (y - lo) / (hi - lo) * (H - 2.0 * MARGIN);
    let slot = (W - 2.0 * MARGIN) / groups.len().max(1) as f64;
    let mut out = String::new();
    open(&mut out, W, H, title);
    let _ = writeln!(out, r#"<line x1="{MARGIN}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#, sy(0.0), W - MARGIN);
    for (k, g) in groups.iter().enumerate() {
        let cx = MARGIN + slot * (k as f64 + 0.5);
        let (top, base) = (sy(g.mean.max(0.0)), sy(g.mean.min(0.0)));
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="#7aa6c2"/>"##,
            cx - slot * 0.35,
            slot * 0.7,
            (base - top).max(0.0)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            sy(g.mean - g.se),
            sy(g.mean + g.se)
        );
        let _ =
            writeln!(out, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, H - MARGIN + 16.0, escape(&g.group));
        let _ =
            writeln!(out, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{:.3}</text>"#, sy(g.mean + g.se) - 4.0, g.mean);
    }
    let _ = writeln!(
        out,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        H / 2.0,
        escape(y_label)
    );
    out.push_str("</svg>\n");
    out
}
