//! Minimal standalone SVG scatter and line plots on a fixed 800×600 canvas.

use std::fmt::Write as _;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 60.0;

/// Categorical fills; category `i` uses `PALETTE[i % 16]`, noise is grey.
pub const PALETTE: [&str; 16] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94",
];
pub const NOISE_FILL: &str = "#cccccc";

pub fn fill(category: i64) -> &'static str {
    if category < 0 {
        NOISE_FILL
    } else {
        PALETTE[category as usize % PALETTE.len()]
    }
}

#[derive(Debug, Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
}

impl Scale {
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Self { lo: 0.0, hi: 1.0 };
        }
        if hi - lo < 1e-12 {
            return Self { lo: lo - 0.5, hi: hi + 0.5 };
        }
        Self { lo, hi }
    }

    fn map(&self, v: f64, from: f64, to: f64) -> f64 {
        from + (v - self.lo) / (self.hi - self.lo) * (to - from)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(out: &mut String, title: &str, x_label: &str, y_label: &str, xs: Scale, ys: Scale) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" width=\"{WIDTH}\" height=\"{HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"30\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n\
         <line x1=\"{MARGIN}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{MARGIN}\" y1=\"{MARGIN}\" x2=\"{MARGIN}\" y2=\"{}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n\
         <text x=\"15\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 15 {})\">{}</text>\n\
         <text x=\"{MARGIN}\" y=\"{}\" font-size=\"10\">{:.3}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"10\">{:.3}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"10\">{:.3}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"10\">{:.3}</text>\n",
        WIDTH / 2.0,
        escape(title),
        HEIGHT - MARGIN,
        WIDTH - MARGIN,
        HEIGHT - MARGIN,
        HEIGHT - MARGIN,
        WIDTH / 2.0,
        HEIGHT - 15.0,
        escape(x_label),
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label),
        HEIGHT - MARGIN + 15.0,
        xs.lo,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 15.0,
        xs.hi,
        MARGIN - 4.0,
        HEIGHT - MARGIN,
        ys.lo,
        MARGIN - 4.0,
        MARGIN + 4.0,
        ys.hi,
    );
}

fn px(xs: Scale, x: f64) -> f64 {
    xs.map(x, MARGIN, WIDTH - MARGIN)
}

fn py(ys: Scale, y: f64) -> f64 {
    ys.map(y, HEIGHT - MARGIN, MARGIN)
}

/// One circle per `(x, y, category)` point; non-finite points are skipped.
pub fn scatter(points: &[(f64, f64, i64)], title: &str, x_label: &str, y_label: &str) -> String {
    let xs = Scale::fit(points.iter().map(|p| p.0));
    let ys = Scale::fit(points.iter().map(|p| p.1));
    let mut out = String::new();
    frame(&mut out, title, x_label, y_label, xs, ys);
    for &(x, y, c) in points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.8\"/>",
            px(xs, x),
            py(ys, y),
            fill(c)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Polyline through `points` with a circle at each; `highlight` gets a red ring.
pub fn line(points: &[(f64, f64)], highlight: Option<usize>, title: &str, x_label: &str, y_label: &str) -> String {
    let xs = Scale::fit(points.iter().map(|p| p.0));
    let ys = Scale::fit(points.iter().map(|p| p.1));
    let mut out = String::new();
    frame(&mut out, title, x_label, y_label, xs, ys);
    let path: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", px(xs, x), py(ys, y)))
        .collect();
    let _ = writeln!(out, "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>", path.join(" "), PALETTE[0]);
    for (i, &(x, y)) in points.iter().enumerate() {
        let _ = writeln!(out, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{}\"/>", px(xs, x), py(ys, y), PALETTE[0]);
        if highlight == Some(i) {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"9\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\"/>",
                px(xs, x),
                py(ys, y)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
