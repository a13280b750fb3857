use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Mat, Result};

/// One named polyline.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
        }
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn header(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">
<rect width="{w}" height="{h}" fill="white"/>
<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        w / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Line chart of `series`; `log_y` plots `log10 y` (non-positive values are
/// an error).
pub fn render_lines(series: &[Series], title: &str, log_y: bool) -> Result<String> {
    if series.is_empty() || series.iter().any(|s| s.points.is_empty()) {
        return Err(Error::InvalidArgument("cannot plot an empty series".into()));
    }
    let mut pts: Vec<Vec<(f64, f64)>> = Vec::with_capacity(series.len());
    for s in series {
        let mut v = Vec::with_capacity(s.points.len());
        for &(x, y) in &s.points {
            let y = if log_y {
                if y <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "non-positive value {y} on a log axis"
                    )));
                }
                y.log10()
            } else {
                y
            };
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::InvalidArgument("non-finite point".into()));
            }
            v.push((x, y));
        }
        pts.push(v);
    }
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT, title);
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let ylab = |y: f64| {
        if log_y {
            format!("1e{y:.1}")
        } else {
            format!("{y:.3}")
        }
    };
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>
<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>
<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{x0}</text>
<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{x1}</text>"#,
        MARGIN - 4.0,
        HEIGHT - MARGIN,
        ylab(y0),
        MARGIN - 4.0,
        MARGIN + 8.0,
        ylab(y1),
        HEIGHT - MARGIN + 14.0,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 14.0,
    );
    for (i, (s, v)) in series.iter().zip(&pts).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = v
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        for &(x, y) in v {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            WIDTH - MARGIN + 4.0 - 120.0,
            MARGIN + 14.0 * (i + 1) as f64,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Heat map of `m` on a symmetric blue-white-red scale.
pub fn render_heatmap(m: &Mat, title: &str) -> Result<String> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Err(Error::InvalidArgument("cannot plot an empty matrix".into()));
    }
    if !m.is_finite() {
        return Err(Error::InvalidArgument("non-finite matrix entry".into()));
    }
    let cell = (360.0 / r.max(c) as f64).max(4.0);
    let (w, h) = (
        c as f64 * cell + 2.0 * MARGIN,
        r as f64 * cell + 2.0 * MARGIN,
    );
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    let mut out = String::new();
    header(&mut out, w, h, title);
    for i in 0..r {
        for j in 0..c {
            let v = m[(i, j)] / scale;
            let fade = (255.0 * (1.0 - v.abs())).round() as u8;
            let color = if v >= 0.0 {
                format!("#ff{fade:02x}{fade:02x}")
            } else {
                format!("#{fade:02x}{fade:02x}ff")
            };
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{cell:.2}" height="{cell:.2}" fill="{color}"/>"#,
                MARGIN + j as f64 * cell,
                MARGIN + i as f64 * cell
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="10">max |entry| = {scale:e}</text>"#,
        h - MARGIN / 2.0
    );
    out.push_str("</svg>\n");
    Ok(out)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Write a line chart to `path`.
pub fn emit_svg(series: &[Series], path: &Path) -> Result<()> {
    let title = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    write(path, &render_lines(series, &title, false)?)
}

/// Write a heat map to `path`.
pub fn emit_heatmap(m: &Mat, path: &Path) -> Result<()> {
    let title = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    write(path, &render_heatmap(m, &title)?)
}
