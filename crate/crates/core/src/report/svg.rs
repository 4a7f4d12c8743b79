//! Minimal SVG 1.1 chart writers. Data points are `<circle class="point">`
//! elements and heatmap cells `<rect class="cell">`.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PANEL: f64 = 220.0;
const PANEL_GAP: f64 = 24.0;
const POINT_COLOR: &str = "#1f77b4";
const LINE_COLOR: &str = "#d62728";

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn header(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
}

/// Maps `v` from `[lo, hi]` onto `[a, b]`; a degenerate range maps to the midpoint.
fn scale(v: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    if hi > lo {
        a + (v - lo) / (hi - lo) * (b - a)
    } else {
        (a + b) / 2.0
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT);
    let (x0, x1) = bounds(points.iter().map(|p| p.0));
    let (mut y0, mut y1) = bounds(points.iter().map(|p| p.1));
    let pad = ((y1 - y0) * 0.1).max(0.01);
    y0 -= pad;
    y1 += pad;
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN / 2.0, MARGIN, HEIGHT - MARGIN);
    let px = |x: f64| scale(x, x0, x1, left, right);
    let py = |y: f64| scale(y, y0, y1, bottom, top);

    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(out, r#"<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (left + right) / 2.0, HEIGHT - 14.0, escape(x_label));
    let _ = writeln!(out, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#, (top + bottom) / 2.0, (top + bottom) / 2.0, escape(y_label));
    for (v, y) in [(y0 + pad, py(y0 + pad)), (y1 - pad, py(y1 - pad))] {
        let _ = writeln!(out, r#"<text x="{}" y="{y:.2}" text-anchor="end">{v:.3}</text>"#, left - 6.0);
    }
    for &(x, _) in points {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{}" text-anchor="middle">{x}</text>"#, px(x), bottom + 16.0);
    }

    let path: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect();
    let _ = writeln!(out, r#"<polyline fill="none" stroke="{POINT_COLOR}" stroke-width="2" points="{}"/>"#, path.join(" "));
    for &(x, y) in points {
        let _ = writeln!(
            out,
            r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="4" fill="{POINT_COLOR}"><title>{x}: {y}</title></circle>"#,
            px(x),
            py(y)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Reference (x) against model (y) scores on fixed `[0, 4]` axes with an identity line.
pub fn scatter_panels(panels: &[(String, Vec<(f64, f64)>)]) -> String {
    let columns = panels.len().clamp(1, 4);
    let rows = panels.len().div_ceil(columns).max(1);
    let width = columns as f64 * (PANEL + PANEL_GAP) + PANEL_GAP;
    let height = rows as f64 * (PANEL + PANEL_GAP + 20.0) + PANEL_GAP;
    let mut out = String::new();
    header(&mut out, width, height);
    for (i, (title, points)) in panels.iter().enumerate() {
        let ox = PANEL_GAP + (i % columns) as f64 * (PANEL + PANEL_GAP);
        let oy = PANEL_GAP + 20.0 + (i / columns) as f64 * (PANEL + PANEL_GAP + 20.0);
        let px = |v: f64| scale(v, 0.0, 4.0, ox, ox + PANEL);
        let py = |v: f64| scale(v, 0.0, 4.0, oy + PANEL, oy);
        let _ = writeln!(out, r#"<g class="panel">"#);
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, ox + PANEL / 2.0, oy - 6.0, escape(title));
        let _ = writeln!(out, r#"<rect x="{ox}" y="{oy}" width="{PANEL}" height="{PANEL}" fill="none" stroke="black"/>"#);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{LINE_COLOR}" stroke-dasharray="4 3"/>"#,
            px(0.0),
            py(0.0),
            px(4.0),
            py(4.0)
        );
        for &(x, y) in points {
            let _ = writeln!(
                out,
                r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="3" fill="{POINT_COLOR}" fill-opacity="0.7"/>"#,
                px(x),
                py(y)
            );
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

/// Red-to-green color for r in [-1, 1].
fn heat_color(r: f64) -> String {
    let t = ((r + 1.0) / 2.0).clamp(0.0, 1.0);
    let red = (255.0 * (1.0 - t)).round() as u8;
    let green = (200.0 * t).round() as u8;
    format!("#{red:02x}{green:02x}60")
}

pub fn heatmap(title: &str, rows: &[String], cols: &[String], values: &[Vec<Option<f64>>]) -> String {
    let cell_w = 64.0;
    let cell_h = 28.0;
    let left = 80.0;
    let top = 70.0;
    let width = left + cols.len() as f64 * cell_w + 20.0;
    let height = top + rows.len() as f64 * cell_h + 20.0;
    let mut out = String::new();
    header(&mut out, width, height);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, width / 2.0, escape(title));
    let _ = writeln!(out, r#"<text x="{}" y="44" text-anchor="middle">examples</text>"#, left + cols.len() as f64 * cell_w / 2.0);
    let _ = writeln!(out, r#"<text x="12" y="{}">T</text>"#, top - 8.0);
    for (j, c) in cols.iter().enumerate() {
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, left + (j as f64 + 0.5) * cell_w, top - 8.0, escape(c));
    }
    for (i, r) in rows.iter().enumerate() {
        let y = top + i as f64 * cell_h;
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, left - 8.0, y + cell_h * 0.65, escape(r));
        for (j, v) in values.get(i).map(Vec::as_slice).unwrap_or(&[]).iter().enumerate() {
            let x = left + j as f64 * cell_w;
            let (fill, label) = match v {
                Some(r) => (heat_color(*r), format!("{r:.3}")),
                None => ("#cccccc".to_string(), "failed".to_string()),
            };
            let _ = writeln!(out, r#"<rect class="cell" x="{x}" y="{y}" width="{cell_w}" height="{cell_h}" fill="{fill}" stroke="white"/>"#);
            let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">{label}</text>"#, x + cell_w / 2.0, y + cell_h * 0.65);
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_has_one_circle_per_point() {
        let points: Vec<(f64, f64)> = (0..=10).map(|i| (i as f64 / 10.0, 0.8 + i as f64 / 100.0)).collect();
        let svg = line_chart("t", "x", "y", &points);
        assert_eq!(svg.matches(r#"class="point""#).count(), 11);
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn single_point_does_not_divide_by_zero() {
        let svg = line_chart("t", "x", "y", &[(0.5, 0.9)]);
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn panels_and_cells() {
        let panels: Vec<(String, Vec<(f64, f64)>)> =
            (0..7).map(|k| (format!("k={k}"), vec![(1.0, 2.0), (3.0, 3.5)])).collect();
        let svg = scatter_panels(&panels);
        assert_eq!(svg.matches(r#"<g class="panel">"#).count(), 7);
        let heat = heatmap("h", &["0".into(), "0.1".into()], &["0".into()], &[vec![Some(0.9)], vec![None]]);
        assert_eq!(heat.matches(r#"class="cell""#).count(), 2);
        assert!(heat.contains("failed"));
        assert!(escape("<a&b>").eq("&lt;a&amp;b&gt;"));
    }
}
