//! Minimal self-contained SVG line and scatter plots.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// A mean curve with a symmetric error band.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub steps: Vec<usize>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub label: String,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let span = if self.x1 > self.x0 { self.x1 - self.x0 } else { 1.0 };
        LEFT + (x - self.x0) / span * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let span = if self.y1 > self.y0 { self.y1 - self.y0 } else { 1.0 };
        HEIGHT - BOTTOM - (y - self.y0) / span * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (WIDTH - RIGHT + LEFT) / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str, xticks: &[(f64, String)], yticks: &[(f64, String)]) {
    let (l, r, t, b) = (f.px(f.x0), f.px(f.x1), f.py(f.y1), f.py(f.y0));
    let _ = writeln!(
        out,
        r#"<path d="M{l:.1},{t:.1} L{l:.1},{b:.1} L{r:.1},{b:.1}" fill="none" stroke="black"/>"#
    );
    for (v, text) in xticks {
        let x = f.px(*v);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{b:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{text}</text>"#,
            b + 5.0,
            b + 18.0
        );
    }
    for (v, text) in yticks {
        let y = f.py(*v);
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{l:.1}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{text}</text>"#,
            l - 5.0,
            l - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (l + r) / 2.0,
        HEIGHT - 10.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{:.1}" text-anchor="middle" transform="rotate(-90 15 {:.1})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(ylabel)
    );
}

fn ticks(lo: f64, hi: f64, n: usize, fmt: impl Fn(f64) -> String) -> Vec<(f64, String)> {
    (0..=n)
        .map(|i| {
            let v = lo + (hi - lo) * i as f64 / n as f64;
            (v, fmt(v))
        })
        .collect()
}

fn legend(out: &mut String, entries: &[(String, &str)]) {
    for (i, (label, color)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let x = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{:.1}" width="14" height="4" fill="{color}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            y - 4.0,
            x + 20.0,
            y + 1.0,
            escape(label)
        );
    }
}

/// Reward curves over training steps with shaded error bands and a dashed
/// horizontal threshold line.
pub fn reward_curve_svg(title: &str, curves: &[Curve], threshold: f64) -> String {
    let x1 = curves
        .iter()
        .flat_map(|c| c.steps.last().copied())
        .max()
        .unwrap_or(1) as f64;
    let f = Frame {
        x0: 0.0,
        x1,
        y0: 0.0,
        y1: 1.0,
    };
    let mut out = String::new();
    header(&mut out, title);
    axes(
        &mut out,
        &f,
        "time step",
        "reward",
        &ticks(0.0, x1, 5, |v| format!("{}k", (v / 1000.0).round())),
        &ticks(0.0, 1.0, 5, |v| format!("{v:.1}")),
    );
    let _ = writeln!(
        out,
        r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="black" stroke-dasharray="6,4"/><text x="{:.1}" y="{:.1}" text-anchor="end">threshold {threshold}</text>"#,
        f.px(0.0),
        f.px(x1),
        f.px(x1),
        f.py(threshold) - 4.0,
        y = f.py(threshold)
    );
    let mut entries = Vec::new();
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let point = |k: usize, y: f64| format!("{:.1},{:.1}", f.px(c.steps[k] as f64), f.py(y.clamp(0.0, 1.0)));
        let upper: Vec<String> = (0..c.steps.len()).map(|k| point(k, c.mean[k] + c.se[k])).collect();
        let lower: Vec<String> = (0..c.steps.len()).rev().map(|k| point(k, c.mean[k] - c.se[k])).collect();
        if !upper.is_empty() {
            let _ = writeln!(
                out,
                r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                upper.join(" "),
                lower.join(" ")
            );
            let line: Vec<String> = (0..c.steps.len()).map(|k| point(k, c.mean[k])).collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                line.join(" ")
            );
        }
        entries.push((c.label.clone(), color));
    }
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

/// Labelled scatter plot with axes fitted to the data.
pub fn scatter_svg(title: &str, xlabel: &str, ylabel: &str, points: &[ScatterPoint]) -> String {
    let bounds = |vals: Vec<f64>| {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pad = if hi > lo { (hi - lo) * 0.05 } else { 0.5 };
        (lo - pad, hi + pad)
    };
    let (x0, x1) = bounds(points.iter().map(|p| p.x).collect());
    let (y0, y1) = bounds(points.iter().map(|p| p.y).collect());
    let f = Frame { x0, x1, y0, y1 };
    let mut out = String::new();
    header(&mut out, title);
    axes(
        &mut out,
        &f,
        xlabel,
        ylabel,
        &ticks(x0, x1, 5, |v| format!("{v:.2}")),
        &ticks(y0, y1, 5, |v| format!("{v:.2}")),
    );
    for p in points {
        let (x, y) = (f.px(p.x), f.py(p.y));
        let _ = writeln!(
            out,
            r#"<circle cx="{x:.1}" cy="{y:.1}" r="4" fill="{}"/><text x="{:.1}" y="{:.1}" font-size="10">{}</text>"#,
            PALETTE[0],
            x + 6.0,
            y - 4.0,
            escape(&p.label)
        );
    }
    out.push_str("</svg>\n");
    out
}
