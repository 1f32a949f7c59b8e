//! Self-contained SVG line plots of sweep tables.

use std::fmt::Write as _;

use evsim_core::format::sig;

use crate::table::{SweepTable, TableError};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    (0..=4).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect()
}

/// Renders the table's plot, or `None` when it declares none.
pub fn render_svg(table: &SweepTable) -> Result<Option<String>, TableError> {
    let Some(spec) = &table.plot else {
        return Ok(None);
    };
    let xi = table.column(&spec.x)?;
    let yi = table.column(&spec.y)?;
    let si: Vec<usize> = spec.series.iter().map(|s| table.column(s)).collect::<Result<_, _>>()?;

    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for row in table.rows() {
        let (Some(x), Some(y)) = (row[xi].as_f64(), row[yi].as_f64()) else {
            continue;
        };
        let key = si
            .iter()
            .map(|&c| row[c].render())
            .collect::<Vec<_>>()
            .join(" ");
        match series.iter_mut().find(|(k, _)| *k == key) {
            Some((_, pts)) => pts.push((x, y)),
            None => series.push((key, vec![(x, y)])),
        }
    }

    let all = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&table.name));
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(svg, r#"<path d="M{left} {top} V{bottom} H{right}" stroke="black" fill="none"/>"#);
    for t in ticks(x0, x1) {
        let x = px(t);
        let _ = writeln!(svg, r#"<line x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{}" stroke="black"/>"#, bottom + 4.0);
        let _ = writeln!(svg, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, bottom + 16.0, sig(t));
    }
    for t in ticks(y0, y1) {
        let y = py(t);
        let _ = writeln!(svg, r#"<line x1="{}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/>"#, left - 4.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, left - 6.0, y + 4.0, sig(t));
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 20.0, escape(&spec.x));
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(&spec.y)
    );
    for (i, (key, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let d: Vec<String> = pts
            .iter()
            .enumerate()
            .map(|(k, &(x, y))| format!("{}{:.2} {:.2}", if k == 0 { "M" } else { "L" }, px(x), py(y)))
            .collect();
        let _ = writeln!(svg, r#"<path d="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, d.join(" "));
        for &(x, y) in pts {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, px(x), py(y));
        }
        if !key.is_empty() {
            let ly = top + 14.0 * i as f64;
            let _ = writeln!(svg, r#"<text x="{}" y="{ly:.2}" fill="{color}" text-anchor="end">{}</text>"#, right, escape(key));
        }
    }
    svg.push_str("</svg>\n");
    Ok(Some(svg))
}
