//! Scatter plot plus the zero-logit contour traced by marching squares.

use std::fmt::Write;

use equiproj::train::{forward, ToyModelParams};

use crate::error::CliResult;

pub const GRID: usize = 200;
const PIXELS: f64 = 400.0;

/// Segments where the sampled field changes sign, cell by cell.
/// `values[i * n + j]` is the sample at `(x_i, y_j)`.
pub fn zero_crossings(values: &[f64], n: usize) -> Vec<[(f64, f64); 2]> {
    let at = |i: usize, j: usize| values[i * n + j];
    let mut segs = Vec::new();
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            // corners counter-clockwise, coordinates in grid units
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let mut hits = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (corners[e], corners[(e + 1) % 4]);
                let (va, vb) = (at(a.0, a.1), at(b.0, b.1));
                if (va > 0.0) != (vb > 0.0) {
                    let t = va / (va - vb);
                    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
                    hits.push((
                        a.0 as f64 + t * (b.0 as f64 - a.0 as f64),
                        a.1 as f64 + t * (b.1 as f64 - a.1 as f64),
                    ));
                }
            }
            match hits.len() {
                2 => segs.push([hits[0], hits[1]]),
                4 => {
                    // saddle: pair edges so the centre's side stays connected
                    let centre = (at(i, j) + at(i + 1, j) + at(i + 1, j + 1) + at(i, j + 1)) / 4.0;
                    if (centre > 0.0) == (at(i, j) > 0.0) {
                        segs.push([hits[0], hits[1]]);
                        segs.push([hits[2], hits[3]]);
                    } else {
                        segs.push([hits[0], hits[3]]);
                        segs.push([hits[1], hits[2]]);
                    }
                }
                _ => {}
            }
        }
    }
    segs
}

pub fn render(points: &[[f64; 2]], labels: &[f64], params: &ToyModelParams) -> CliResult<String> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in points {
        lo = lo.min(p[0].min(p[1]));
        hi = hi.max(p[0].max(p[1]));
    }
    if !(lo < hi) {
        lo = -1.0;
        hi = 1.0;
    }
    let pad = 0.1 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let step = (hi - lo) / (GRID - 1) as f64;
    let mut values = Vec::with_capacity(GRID * GRID);
    for i in 0..GRID {
        for j in 0..GRID {
            values.push(forward([lo + i as f64 * step, lo + j as f64 * step], params)?);
        }
    }
    let scale = PIXELS / (hi - lo);
    let px = |x: f64| (x - lo) * scale;
    let py = |y: f64| PIXELS - (y - lo) * scale;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PIXELS}" height="{PIXELS}" viewBox="0 0 {PIXELS} {PIXELS}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<g class="points">"#);
    for (p, &y) in points.iter().zip(labels) {
        let fill = if y > 0.0 { "#1f77b4" } else { "#d62728" };
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{fill}"/>"#, px(p[0]), py(p[1]));
    }
    let _ = writeln!(s, "</g>");
    let mut d = String::new();
    for [a, b] in zero_crossings(&values, GRID) {
        let (ax, ay) = (lo + a.0 * step, lo + a.1 * step);
        let (bx, by) = (lo + b.0 * step, lo + b.1 * step);
        let _ = write!(d, "M{:.2} {:.2}L{:.2} {:.2}", px(ax), py(ay), px(bx), py(by));
    }
    let _ = writeln!(s, r#"<g class="contour" data-level="0">"#);
    let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="black" stroke-width="1.5"/>"#);
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}
