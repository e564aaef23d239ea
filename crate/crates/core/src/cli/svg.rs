//! Static SVG plots: line plots for one-dimensional fields and heat maps
//! with set boundaries for the first two axes of higher-dimensional ones.

use std::fmt::Write;

use crate::geometry::IndicatorSet;
use crate::grid::ScalarField;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
/// Plots show `|x_d| ≤ VIEW` only; Gauss–Hermite tails are not informative.
const VIEW: f64 = 4.0;

pub struct Series {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl Series {
    /// Values of a field on a 1D grid, restricted to the view window.
    pub fn from_field(label: impl Into<String>, field: &ScalarField) -> Self {
        let grid = field.grid();
        let (xs, ys) = (0..grid.len())
            .map(|i| (grid.coordinate(i, 0), field.values()[i]))
            .filter(|(x, _)| x.abs() <= VIEW)
            .unzip();
        Self {
            label: label.into(),
            xs,
            ys,
        }
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    (lo - pad, hi + pad)
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(out: &mut String, x: (f64, f64), y: (f64, f64)) {
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        r - l,
        b - t
    );
    let labels = [
        (l, b + 15.0, "middle", x.0),
        (r, b + 15.0, "middle", x.1),
        (l - 5.0, b, "end", y.0),
        (l - 5.0, t + 4.0, "end", y.1),
    ];
    for (px, py, anchor, v) in labels {
        let _ = writeln!(out, r#"<text x="{px}" y="{py}" text-anchor="{anchor}">{v:.3}</text>"#);
    }
}

/// Line plot of several series sharing the axes, with optional horizontal
/// reference lines (thresholds) and shaded x-intervals (sets).
pub fn line_plot(title: &str, series: &[Series], levels: &[f64], shaded: &[(f64, f64)]) -> String {
    let xr = bounds(series.iter().flat_map(|s| s.xs.iter().copied()));
    let yr = bounds(series.iter().flat_map(|s| s.ys.iter().copied()).chain(levels.iter().copied()));
    let sx = |x: f64| MARGIN + (x - xr.0) / (xr.1 - xr.0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - yr.0) / (yr.1 - yr.0) * (HEIGHT - 2.0 * MARGIN);
    let mut out = String::new();
    open(&mut out, title);
    for &(a, b) in shaded {
        let (a, b) = (sx(a.max(xr.0)), sx(b.min(xr.1)));
        if b > a {
            let _ = writeln!(
                out,
                r##"<rect x="{a:.2}" y="{MARGIN}" width="{:.2}" height="{}" fill="#ffd54f" fill-opacity="0.35"/>"##,
                b - a,
                HEIGHT - 2.0 * MARGIN
            );
        }
    }
    for &level in levels {
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN}" x2="{}" y1="{y:.2}" y2="{y:.2}" stroke="#999" stroke-dasharray="3,3"/>"##,
            WIDTH - MARGIN,
            y = sy(level)
        );
    }
    frame(&mut out, xr, yr);
    for (k, s) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = s
            .xs
            .iter()
            .zip(&s.ys)
            .filter(|(_, y)| y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#,
            WIDTH - MARGIN - 36.0,
            MARGIN + 14.0 * (k as f64 + 1.0),
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn colour_map(t: f64) -> String {
    // blue → white → red
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let s = t / 0.5;
        (40.0 + 215.0 * s, 90.0 + 165.0 * s, 200.0 + 55.0 * s)
    } else {
        let s = (t - 0.5) / 0.5;
        (255.0 - 40.0 * s, 255.0 - 200.0 * s, 255.0 - 215.0 * s)
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

/// Heat map of `u` over the first two axes (other axes at the node closest
/// to zero) with the boundaries of the given sets drawn between cells.
pub fn field_map(title: &str, u: &ScalarField, sets: &[&IndicatorSet]) -> String {
    let grid = u.grid();
    let m = grid.dimension();
    assert!(m >= 2, "field maps need at least two axes");
    let mut base = vec![0usize; m];
    for (d, b) in base.iter_mut().enumerate().skip(2) {
        let nodes = &grid.axis(d).nodes;
        *b = (0..nodes.len())
            .min_by(|&a, &c| nodes[a].abs().total_cmp(&nodes[c].abs()))
            .unwrap_or(0);
    }
    let visible = |d: usize| -> Vec<usize> {
        let nodes = &grid.axis(d).nodes;
        (0..nodes.len()).filter(|&j| nodes[j].abs() <= VIEW).collect()
    };
    let (cols, rows) = (visible(0), visible(1));
    let flat = |j0: usize, j1: usize| {
        let mut idx = base.clone();
        idx[0] = j0;
        idx[1] = j1;
        grid.flat_index(&idx)
    };
    let (lo, hi) = bounds(
        cols.iter()
            .flat_map(|&a| rows.iter().map(move |&b| (a, b)))
            .map(|(a, b)| u.values()[flat(a, b)]),
    );
    let side = HEIGHT - 2.0 * MARGIN;
    let (cw, ch) = (side / cols.len().max(1) as f64, side / rows.len().max(1) as f64);
    let mut out = String::new();
    open(&mut out, title);
    for (c, &a) in cols.iter().enumerate() {
        for (r, &b) in rows.iter().enumerate() {
            let v = u.values()[flat(a, b)];
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                MARGIN + c as f64 * cw,
                HEIGHT - MARGIN - (r + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05,
                colour_map((v - lo) / (hi - lo))
            );
        }
    }
    for (k, set) in sets.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let mut path = String::new();
        for (c, &a) in cols.iter().enumerate() {
            for (r, &b) in rows.iter().enumerate() {
                let here = set.contains(flat(a, b));
                if c + 1 < cols.len() && here != set.contains(flat(cols[c + 1], b)) {
                    let x = MARGIN + (c + 1) as f64 * cw;
                    let y = HEIGHT - MARGIN - r as f64 * ch;
                    let _ = write!(path, "M{x:.2},{y:.2}v{:.2}", -ch);
                }
                if r + 1 < rows.len() && here != set.contains(flat(a, rows[r + 1])) {
                    let x = MARGIN + c as f64 * cw;
                    let y = HEIGHT - MARGIN - (r + 1) as f64 * ch;
                    let _ = write!(path, "M{x:.2},{y:.2}h{cw:.2}");
                }
            }
        }
        if !path.is_empty() {
            let _ = writeln!(out, r#"<path d="{path}" stroke="{colour}" stroke-width="1.5" fill="none"/>"#);
        }
    }
    let (l, t) = (MARGIN, MARGIN);
    let _ = writeln!(
        out,
        r#"<rect x="{l}" y="{t}" width="{side}" height="{side}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}">min {lo:.3}, max {hi:.3}</text>"#,
        MARGIN + side + 10.0,
        MARGIN + 14.0
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GaussianGrid, GridSpec};

    #[test]
    fn plots_are_well_formed() {
        let line = GaussianGrid::build(&GridSpec::uniform(1, 33, 5.0)).unwrap();
        let u = ScalarField::from_fn(&line, |x| x[0] * x[0]);
        let svg = line_plot("u <g>", &[Series::from_field("u", &u)], &[1.0], &[(-1.0, 1.0)]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("&lt;g&gt;") && svg.contains("polyline"));

        let square = GaussianGrid::build(&GridSpec::uniform(2, 17, 4.0)).unwrap();
        let u = ScalarField::from_fn(&square, |x| x[0] + x[1]);
        let set = IndicatorSet::sublevel(&u, 0.0).unwrap();
        let svg = field_map("map", &u, &[&set]);
        assert_eq!(svg.matches("<rect").count(), 17 * 17 + 2);
        assert!(svg.contains("<path"));
    }
}
