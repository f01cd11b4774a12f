//! CSV tables, SVG line plots and content hashes.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::{Result, SimError};

/// Column-oriented table; `None` cells are written as `nan`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    /// (name, unit) per column.
    pub header: Vec<(String, String)>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(header: &[(&str, &str)]) -> Self {
        Self {
            header: header
                .iter()
                .map(|(n, u)| (n.to_string(), u.to_string()))
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// `# name(unit),...` header, then one line per row in `{:.16e}`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * self.header.len() * (self.rows.len() + 1));
        let head: Vec<String> = self
            .header
            .iter()
            .map(|(n, u)| format!("{n}({u})"))
            .collect();
        out.push_str("# ");
        out.push_str(&head.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match cell {
                    Some(v) if v.is_finite() => {
                        let _ = write!(out, "{v:.16e}");
                    }
                    _ => out.push_str("nan"),
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    /// `None` breaks the line.
    pub y: Vec<Option<f64>>,
    /// Abscissae of pull-in outcomes, drawn as crosses along the top edge.
    pub pull_in: Vec<f64>,
}

impl Series {
    pub fn new(name: &str, x: Vec<f64>, y: Vec<Option<f64>>) -> Self {
        Self {
            name: name.into(),
            x,
            y,
            pull_in: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    /// Axis labels including the unit, e.g. `tau2f (s)`.
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLOURS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return None;
    }
    if hi > lo {
        Some((lo, hi))
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        Some((lo - pad, hi + pad))
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if (1e-2..1e4).contains(&v.abs()) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// Renders a line plot. Every series needs at least two points; with a log
/// ordinate only positive finite values are drawn.
pub fn emit_plot(plot: &Plot) -> Result<String> {
    let bad = |reason: String| SimError::Precondition {
        operation: "emit_plot",
        reason,
    };
    if plot.series.is_empty() {
        return Err(bad("no series".into()));
    }
    for s in &plot.series {
        if s.x.len() != s.y.len() {
            return Err(bad(format!("series `{}` has mismatched columns", s.name)));
        }
        if s.x.len() < 2 {
            return Err(bad(format!("series `{}` has fewer than 2 points", s.name)));
        }
    }
    let ty = |v: f64| -> Option<f64> {
        if !v.is_finite() {
            None
        } else if plot.log_y {
            (v > 0.0).then(|| v.log10())
        } else {
            Some(v)
        }
    };
    let xs = plot
        .series
        .iter()
        .flat_map(|s| s.x.iter().chain(&s.pull_in).copied())
        .filter(|v| v.is_finite());
    let (x0, x1) = bounds(xs).ok_or_else(|| bad("no finite abscissa".into()))?;
    let ys = plot
        .series
        .iter()
        .flat_map(|s| s.y.iter().filter_map(|v| v.and_then(ty)));
    let (y0, y1) = bounds(ys).unwrap_or((0.0, 1.0));

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&plot.title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let label_y = if plot.log_y {
            tick_label(10f64.powf(yv))
        } else {
            tick_label(yv)
        };
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{b:.2}" x2="{x:.2}" y2="{b2:.2}" stroke="black"/><text x="{x:.2}" y="{t:.2}" text-anchor="middle">{}</text>"#,
            tick_label(xv),
            x = px(xv),
            b = TOP + ph,
            b2 = TOP + ph + 5.0,
            t = TOP + ph + 20.0,
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{l:.2}" y1="{y:.2}" x2="{l2:.2}" y2="{y:.2}" stroke="black"/><text x="{t:.2}" y="{ty:.2}" text-anchor="end">{}</text>"#,
            label_y,
            l = LEFT - 5.0,
            l2 = LEFT,
            y = py(yv),
            t = LEFT - 8.0,
            ty = py(yv) + 4.0,
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(&plot.x_label)
    );
    let y_label = if plot.log_y {
        format!("{} [log]", plot.y_label)
    } else {
        plot.y_label.clone()
    };
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&y_label)
    );

    for (k, s) in plot.series.iter().enumerate() {
        let colour = COLOURS[k % COLOURS.len()];
        let mut runs: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for (x, y) in s.x.iter().zip(&s.y) {
            match y.and_then(ty) {
                Some(v) if x.is_finite() => runs.last_mut().unwrap().push((px(*x), py(v))),
                _ => {
                    if !runs.last().unwrap().is_empty() {
                        runs.push(Vec::new());
                    }
                }
            }
        }
        for run in runs.iter().filter(|r| !r.is_empty()) {
            let pts: Vec<String> = run.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            if run.len() == 1 {
                let (x, y) = run[0];
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{x:.2}" cy="{y:.2}" r="2" fill="{colour}"/>"#
                );
            } else {
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
                    pts.join(" ")
                );
            }
        }
        for &x in s.pull_in.iter().filter(|x| x.is_finite()) {
            let (cx, cy) = (px(x), TOP + 8.0);
            let _ = writeln!(
                svg,
                r#"<path class="pull-in" d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="black" stroke-width="2"/>"#,
                cx - 4.0,
                cy - 4.0,
                cx + 4.0,
                cy + 4.0,
                cx - 4.0,
                cy + 4.0,
                cx + 4.0,
                cy - 4.0
            );
        }
        let ly = TOP + 15.0 + 16.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            WIDTH - RIGHT - 150.0,
            WIDTH - RIGHT - 130.0,
            WIDTH - RIGHT - 125.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    if plot.series.iter().any(|s| !s.pull_in.is_empty()) {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">x = pull-in</text>"#,
            WIDTH - RIGHT - 5.0,
            TOP + ph - 8.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
