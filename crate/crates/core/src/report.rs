// SPDX-License-Identifier: MIT OR Apache-2.0

//! SVG charts and HTML token pages.
//!
//! Output is plain text built in a fixed order with fixed number formatting,
//! so identical inputs always give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::embed::Projection2D;
use crate::metrics::HeadLayerMatrix;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid render spec: {0}")]
    Spec(String),
    #[error("invalid plot input: {0}")]
    Input(String),
}

pub type Result<T, E = ReportError> = std::result::Result<T, E>;

pub const MIN_SIDE: u32 = 64;
/// Swatches in a heatmap colour bar; odd so one sits exactly at the middle.
pub const COLORBAR_SWATCHES: usize = 11;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

const SEQUENTIAL: [(f64, [u8; 3]); 5] = [
    (0.0, [247, 251, 255]),
    (0.25, [198, 219, 239]),
    (0.5, [107, 174, 214]),
    (0.75, [33, 113, 181]),
    (1.0, [8, 48, 107]),
];

const DIVERGING: [(f64, [u8; 3]); 5] = [
    (0.0, [33, 102, 172]),
    (0.25, [146, 197, 222]),
    (0.5, [247, 247, 247]),
    (0.75, [244, 165, 130]),
    (1.0, [178, 24, 43]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ColorMap {
    Sequential,
    Diverging,
}

impl ColorMap {
    /// Colour at `t ∈ [0, 1]` (clamped) as `#rrggbb`.
    pub fn color(self, t: f64) -> String {
        let stops = match self {
            ColorMap::Sequential => &SEQUENTIAL,
            ColorMap::Diverging => &DIVERGING,
        };
        let t = if t.is_nan() { 0.5 } else { t.clamp(0.0, 1.0) };
        let k = stops.windows(2).position(|w| t <= w[1].0).unwrap_or(stops.len() - 2);
        let (t0, c0) = stops[k];
        let (t1, c1) = stops[k + 1];
        let f = (t - t0) / (t1 - t0);
        let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * f).round() as u8;
        format!("#{:02x}{:02x}{:02x}", mix(c0[0], c1[0]), mix(c0[1], c1[1]), mix(c0[2], c1[2]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderSpec {
    pub width: u32,
    pub height: u32,
    pub color_map: ColorMap,
    /// Overrides the automatic value range.
    pub range: Option<(f64, f64)>,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self {
            width: 800,
            height: 600,
            color_map: ColorMap::Sequential,
            range: None,
            title: String::new(),
            x_label: String::new(),
            y_label: String::new(),
        }
    }
}

impl RenderSpec {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        let s = Self {
            width,
            height,
            ..Default::default()
        };
        s.check()?;
        Ok(s)
    }

    /// Heatmap defaults for a grid: diverging for signed metrics.
    pub fn for_matrix(m: &HeadLayerMatrix) -> Self {
        Self {
            color_map: if m.metric().is_signed() {
                ColorMap::Diverging
            } else {
                ColorMap::Sequential
            },
            x_label: "head".into(),
            y_label: "layer".into(),
            ..Default::default()
        }
    }

    pub fn with_title(mut self, title: impl Into<String>) -> Self {
        self.title = title.into();
        self
    }

    pub fn with_labels(mut self, x: impl Into<String>, y: impl Into<String>) -> Self {
        self.x_label = x.into();
        self.y_label = y.into();
        self
    }

    pub fn with_range(mut self, min: f64, max: f64) -> Self {
        self.range = Some((min, max));
        self
    }

    pub fn with_color_map(mut self, c: ColorMap) -> Self {
        self.color_map = c;
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.width < MIN_SIDE || self.height < MIN_SIDE {
            return Err(ReportError::Spec(format!(
                "{}x{} is smaller than {MIN_SIDE}x{MIN_SIDE}",
                self.width, self.height
            )));
        }
        if let Some((lo, hi)) = self.range {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(ReportError::Spec(format!("range ({lo}, {hi}) needs min < max")));
            }
        }
        Ok(())
    }
}

/// Escapes text for SVG/HTML content and attribute values.
pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn label(v: f64) -> String {
    let s = if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    };
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn write_file(path: &Path, content: &str) -> Result<PathBuf> {
    fs::write(path, content).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(path.to_path_buf())
}

struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

fn svg_open(out: &mut String, spec: &RenderSpec) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#,
        w = spec.width,
        h = spec.height
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if !spec.title.is_empty() {
        let _ = writeln!(
            out,
            r#"<text class="title" x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            num(spec.width as f64 / 2.0),
            escape(&spec.title)
        );
    }
}

fn axis_labels(out: &mut String, spec: &RenderSpec, f: &Frame) {
    if !spec.x_label.is_empty() {
        let _ = writeln!(
            out,
            r#"<text class="x-label" x="{}" y="{}" text-anchor="middle">{}</text>"#,
            num(f.left + f.width / 2.0),
            num(spec.height as f64 - 8.0),
            escape(&spec.x_label)
        );
    }
    if !spec.y_label.is_empty() {
        let (x, y) = (14.0, f.top + f.height / 2.0);
        let _ = writeln!(
            out,
            r#"<text class="y-label" x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">{}</text>"#,
            num(x),
            num(y),
            num(x),
            num(y),
            escape(&spec.y_label)
        );
    }
}

/// Every `k`-th index so that at most ~10 tick labels are drawn.
fn tick_step(n: usize) -> usize {
    n.div_ceil(10).max(1)
}

/// Value range used for colouring: the spec's range if set, otherwise
/// symmetric about 0 for signed metrics and `[0, max]` for the others.
pub fn heatmap_range(m: &HeadLayerMatrix, spec: &RenderSpec) -> (f64, f64) {
    if let Some(r) = spec.range {
        return r;
    }
    if m.metric().is_signed() {
        let a = m.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let a = if a > 0.0 { a } else { 1.0 };
        (-a, a)
    } else {
        let hi = m.values().iter().fold(0.0f64, |a, &v| a.max(v));
        (0.0, if hi > 0.0 { hi } else { 1.0 })
    }
}

/// Heatmap of a (layer × head) grid as an SVG document. Layers run down the
/// vertical axis from the top, heads along the horizontal axis, with a colour
/// bar on the right.
pub fn heatmap_svg(m: &HeadLayerMatrix, spec: &RenderSpec) -> Result<String> {
    spec.check()?;
    let (lo, hi) = heatmap_range(m, spec);
    let (nl, nh) = (m.n_layers(), m.n_heads());
    let f = Frame {
        left: 56.0,
        top: 34.0,
        width: (spec.width as f64 - 56.0 - 96.0).max(8.0),
        height: (spec.height as f64 - 34.0 - 44.0).max(8.0),
    };
    let (cw, ch) = (f.width / nh as f64, f.height / nl as f64);
    let scale = |v: f64| (v - lo) / (hi - lo);

    let mut out = String::new();
    svg_open(&mut out, spec);
    let _ = writeln!(out, r#"<g class="cells">"#);
    for li in 0..nl {
        for hi_ in 0..nh {
            let v = m.get(li, hi_);
            let _ = writeln!(
                out,
                r#"<rect class="cell" x="{}" y="{}" width="{}" height="{}" fill="{}" data-layer="{}" data-head="{}" data-value="{}"/>"#,
                num(f.left + hi_ as f64 * cw),
                num(f.top + li as f64 * ch),
                num(cw),
                num(ch),
                spec.color_map.color(scale(v)),
                m.layers()[li],
                m.heads()[hi_],
                crate::csvio::fmt_sig9(v)
            );
        }
    }
    let _ = writeln!(out, "</g>");

    let _ = writeln!(out, r#"<g class="ticks">"#);
    for li in (0..nl).step_by(tick_step(nl)) {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            num(f.left - 4.0),
            num(f.top + (li as f64 + 0.5) * ch),
            m.layers()[li]
        );
    }
    for hi_ in (0..nh).step_by(tick_step(nh)) {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            num(f.left + (hi_ as f64 + 0.5) * cw),
            num(f.top + f.height + 14.0),
            m.heads()[hi_]
        );
    }
    let _ = writeln!(out, "</g>");
    axis_labels(&mut out, spec, &f);
    colorbar(&mut out, spec.color_map, lo, hi, &f);
    out.push_str("</svg>\n");
    Ok(out)
}

fn colorbar(out: &mut String, cmap: ColorMap, lo: f64, hi: f64, f: &Frame) {
    let x = f.left + f.width + 20.0;
    let h = f.height / COLORBAR_SWATCHES as f64;
    let _ = writeln!(out, r#"<g class="colorbar">"#);
    // top swatch is the maximum
    for k in 0..COLORBAR_SWATCHES {
        let t = 1.0 - k as f64 / (COLORBAR_SWATCHES - 1) as f64;
        let _ = writeln!(
            out,
            r#"<rect class="swatch" x="{}" y="{}" width="16" height="{}" fill="{}" data-value="{}"/>"#,
            num(x),
            num(f.top + k as f64 * h),
            num(h),
            cmap.color(t),
            crate::csvio::fmt_sig9(lo + t * (hi - lo))
        );
    }
    for (t, y) in [(1.0, f.top + h / 2.0), (0.5, f.top + f.height / 2.0), (0.0, f.top + f.height - h / 2.0)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" dominant-baseline="middle">{}</text>"#,
            num(x + 20.0),
            num(y),
            label(lo + t * (hi - lo))
        );
    }
    let _ = writeln!(out, "</g>");
}

pub fn render_heatmap(m: &HeadLayerMatrix, spec: &RenderSpec, path: impl AsRef<Path>) -> Result<PathBuf> {
    write_file(path.as_ref(), &heatmap_svg(m, spec)?)
}

/// One labelled line of a line plot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            values,
        }
    }
}

fn legend(out: &mut String, entries: &[(String, &str)], x: f64, y: f64) {
    let _ = writeln!(out, r#"<g class="legend">"#);
    for (k, (name, color)) in entries.iter().enumerate() {
        let yy = y + k as f64 * 16.0;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            num(x),
            num(yy),
            num(x + 14.0),
            num(yy + 9.0),
            escape(name)
        );
    }
    let _ = writeln!(out, "</g>");
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn frame_axes(out: &mut String, f: &Frame, xr: (f64, f64), yr: (f64, f64), x_ticks: &[(f64, String)]) {
    let _ = writeln!(out, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(
        out,
        r#"<rect x="{}" y="{}" width="{}" height="{}"/>"#,
        num(f.left),
        num(f.top),
        num(f.width),
        num(f.height)
    );
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r#"<g class="ticks">"#);
    for k in 0..=4 {
        let v = yr.0 + (yr.1 - yr.0) * k as f64 / 4.0;
        let y = f.top + f.height - f.height * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            num(f.left - 4.0),
            num(y),
            label(v)
        );
    }
    for (v, text) in x_ticks {
        let x = f.left + (v - xr.0) / (xr.1 - xr.0) * f.width;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            num(x),
            num(f.top + f.height + 14.0),
            escape(text)
        );
    }
    let _ = writeln!(out, "</g>");
}

/// Line plot of equal-length series against their index (0, 1, …).
pub fn line_plot_svg(series: &[Series], spec: &RenderSpec) -> Result<String> {
    spec.check()?;
    let k = series
        .first()
        .map(|s| s.values.len())
        .ok_or_else(|| ReportError::Input("no series".into()))?;
    if k == 0 || series.iter().any(|s| s.values.len() != k) {
        return Err(ReportError::Input("series must be non-empty and of equal length".into()));
    }
    if series.iter().flat_map(|s| &s.values).any(|v| !v.is_finite()) {
        return Err(ReportError::Input("non-finite value".into()));
    }
    let f = Frame {
        left: 64.0,
        top: 34.0,
        width: (spec.width as f64 - 64.0 - 130.0).max(8.0),
        height: (spec.height as f64 - 34.0 - 44.0).max(8.0),
    };
    let xr = if k == 1 { (-0.5, 0.5) } else { (0.0, (k - 1) as f64) };
    let yr = spec
        .range
        .unwrap_or_else(|| padded_range(series.iter().flat_map(|s| s.values.iter().copied())));
    let px = |i: usize| f.left + (i as f64 - xr.0) / (xr.1 - xr.0) * f.width;
    let py = |v: f64| f.top + f.height - (v - yr.0) / (yr.1 - yr.0) * f.height;

    let mut out = String::new();
    svg_open(&mut out, spec);
    let step = tick_step(k);
    let ticks: Vec<(f64, String)> = (0..k).step_by(step).map(|i| (i as f64, i.to_string())).collect();
    frame_axes(&mut out, &f, xr, yr, &ticks);
    if yr.0 < 0.0 && yr.1 > 0.0 {
        let _ = writeln!(
            out,
            r##"<line class="zero" x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#999999" stroke-dasharray="4 3"/>"##,
            num(f.left),
            num(f.left + f.width),
            y = num(py(0.0))
        );
    }
    let _ = writeln!(out, r#"<g class="series">"#);
    for (s_idx, s) in series.iter().enumerate() {
        let color = PALETTE[s_idx % PALETTE.len()];
        let pts: Vec<String> = s
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{},{}", num(px(i)), num(py(v))))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}" data-label="{}"/>"#,
            pts.join(" "),
            escape(&s.label)
        );
    }
    let _ = writeln!(out, "</g>");
    let entries: Vec<(String, &str)> = series
        .iter()
        .enumerate()
        .map(|(i, s)| (s.label.clone(), PALETTE[i % PALETTE.len()]))
        .collect();
    legend(&mut out, &entries, f.left + f.width + 12.0, f.top);
    axis_labels(&mut out, spec, &f);
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render_line_plot(series: &[Series], spec: &RenderSpec, path: impl AsRef<Path>) -> Result<PathBuf> {
    write_file(path.as_ref(), &line_plot_svg(series, spec)?)
}

/// Scatter plot of a projection, one colour per label (labels sorted).
pub fn scatter_svg(p: &Projection2D, spec: &RenderSpec) -> Result<String> {
    scatter_points_svg(&p.points, &p.labels, spec)
}

/// Scatter plot of labelled 2-D points.
pub fn scatter_points_svg(points: &[[f64; 2]], labels: &[String], spec: &RenderSpec) -> Result<String> {
    spec.check()?;
    if points.is_empty() || labels.len() != points.len() {
        return Err(ReportError::Input("one label per point required".into()));
    }
    if points.iter().any(|q| !q[0].is_finite() || !q[1].is_finite()) {
        return Err(ReportError::Input("non-finite coordinate".into()));
    }
    let mut names: Vec<&String> = labels.iter().collect();
    names.sort();
    names.dedup();
    let color_of = |l: &String| PALETTE[names.iter().position(|n| *n == l).unwrap() % PALETTE.len()];

    let f = Frame {
        left: 64.0,
        top: 34.0,
        width: (spec.width as f64 - 64.0 - 130.0).max(8.0),
        height: (spec.height as f64 - 34.0 - 44.0).max(8.0),
    };
    let xr = padded_range(points.iter().map(|q| q[0]));
    let yr = padded_range(points.iter().map(|q| q[1]));
    let mut out = String::new();
    svg_open(&mut out, spec);
    let ticks: Vec<(f64, String)> = (0..=4)
        .map(|k| {
            let v = xr.0 + (xr.1 - xr.0) * k as f64 / 4.0;
            (v, label(v))
        })
        .collect();
    frame_axes(&mut out, &f, xr, yr, &ticks);
    let _ = writeln!(out, r#"<g class="points">"#);
    for (i, q) in points.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<circle class="point" cx="{}" cy="{}" r="3" fill="{}" data-label="{}"/>"#,
            num(f.left + (q[0] - xr.0) / (xr.1 - xr.0) * f.width),
            num(f.top + f.height - (q[1] - yr.0) / (yr.1 - yr.0) * f.height),
            color_of(&labels[i]),
            escape(&labels[i])
        );
    }
    let _ = writeln!(out, "</g>");
    let entries: Vec<(String, &str)> = names.iter().map(|n| ((*n).clone(), color_of(n))).collect();
    legend(&mut out, &entries, f.left + f.width + 12.0, f.top);
    axis_labels(&mut out, spec, &f);
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render_scatter(p: &Projection2D, spec: &RenderSpec, path: impl AsRef<Path>) -> Result<PathBuf> {
    write_file(path.as_ref(), &scatter_svg(p, spec)?)
}

/// Tokens of one sample with their attention entropy at one (layer, head).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenEntropyPage {
    pub tokens: Vec<String>,
    pub entropies: Vec<f64>,
    pub layer: usize,
    pub head: usize,
}

impl TokenEntropyPage {
    pub fn new(tokens: Vec<String>, entropies: Vec<f64>, layer: usize, head: usize) -> Result<Self> {
        if tokens.len() != entropies.len() {
            return Err(ReportError::Input(format!(
                "{} tokens but {} entropies",
                tokens.len(),
                entropies.len()
            )));
        }
        if entropies.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(ReportError::Input("entropies must be finite and non-negative".into()));
        }
        Ok(Self {
            tokens,
            entropies,
            layer,
            head,
        })
    }

    /// Background opacity per token: entropy divided by the page maximum.
    pub fn opacities(&self) -> Vec<f64> {
        let max = self.entropies.iter().fold(0.0f64, |a, &e| a.max(e));
        self.entropies
            .iter()
            .map(|&e| if max > 0.0 { e / max } else { 0.0 })
            .collect()
    }
}

/// HTML page with each token's background shaded by its entropy.
pub fn token_entropy_html(page: &TokenEntropyPage) -> String {
    let mut out = String::new();
    let title = format!("Attention entropy, layer {}, head {}", page.layer, page.head);
    let _ = writeln!(out, "<!DOCTYPE html>");
    let _ = writeln!(out, r#"<html lang="en">"#);
    let _ = writeln!(out, r#"<head><meta charset="utf-8"><title>{}</title>"#, escape(&title));
    let _ = writeln!(
        out,
        "<style>body{{font-family:monospace;line-height:1.8}} .tok{{white-space:pre-wrap;padding:1px 0}}</style>"
    );
    let _ = writeln!(out, "</head>");
    let _ = writeln!(out, "<body>");
    let _ = writeln!(out, "<h1>{}</h1>", escape(&title));
    let _ = writeln!(out, r#"<p class="tokens">"#);
    for ((tok, e), o) in page.tokens.iter().zip(&page.entropies).zip(page.opacities()) {
        let _ = writeln!(
            out,
            r#"<span class="tok" style="background-color:rgba(214,39,40,{o:.4})" data-opacity="{o:.4}" title="entropy {e:.6} nats">{}</span>"#,
            escape(tok)
        );
    }
    let _ = writeln!(out, "</p>");
    let _ = writeln!(out, "</body>");
    let _ = writeln!(out, "</html>");
    out
}

pub fn render_token_entropy_html(page: &TokenEntropyPage, path: impl AsRef<Path>) -> Result<PathBuf> {
    write_file(path.as_ref(), &token_entropy_html(page))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricKind;

    #[test]
    fn spec_invariants() {
        assert!(RenderSpec::new(63, 100).is_err());
        assert!(RenderSpec::new(64, 64).is_ok());
        let s = RenderSpec::default().with_range(1.0, 1.0);
        assert!(s.check().is_err());
    }

    #[test]
    fn diverging_midpoint_is_zero_color() {
        let m = HeadLayerMatrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, 1.0]], MetricKind::DeltaDistance).unwrap();
        let spec = RenderSpec::for_matrix(&m);
        assert_eq!(heatmap_range(&m, &spec), (-1.0, 1.0));
        let svg = heatmap_svg(&m, &spec).unwrap();
        let zero = ColorMap::Diverging.color(0.5);
        let swatches: Vec<&str> = svg.lines().filter(|l| l.contains(r#"class="swatch""#)).collect();
        assert_eq!(swatches.len(), COLORBAR_SWATCHES);
        assert!(swatches[COLORBAR_SWATCHES / 2].contains(&format!(r#"fill="{zero}""#)));
        let zero_cells = svg
            .lines()
            .filter(|l| l.contains(r#"class="cell""#) && l.contains(&format!(r#"fill="{zero}""#)))
            .count();
        assert_eq!(zero_cells, 2);
    }

    #[test]
    fn layer_zero_is_on_top() {
        let m = HeadLayerMatrix::from_rows(&[vec![1.0], vec![2.0]], MetricKind::Distance).unwrap();
        let svg = heatmap_svg(&m, &RenderSpec::for_matrix(&m)).unwrap();
        let y_of = |layer: usize| {
            let line = svg
                .lines()
                .find(|l| l.contains(&format!(r#"data-layer="{layer}""#)))
                .unwrap();
            let y = line.split("y=\"").nth(1).unwrap().split('"').next().unwrap();
            y.parse::<f64>().unwrap()
        };
        assert!(y_of(0) < y_of(1));
    }

    #[test]
    fn constant_grid() {
        let m = HeadLayerMatrix::from_rows(&vec![vec![0.3; 4]; 3], MetricKind::Entropy).unwrap();
        let svg = heatmap_svg(&m, &RenderSpec::for_matrix(&m)).unwrap();
        let fills: std::collections::BTreeSet<&str> = svg
            .lines()
            .filter(|l| l.contains(r#"class="cell""#))
            .map(|l| l.split("fill=\"").nth(1).unwrap().split('"').next().unwrap())
            .collect();
        assert_eq!(fills.len(), 1);
        assert!(svg.contains(r#"class="colorbar""#));
    }

    #[test]
    fn line_plot_and_scatter() {
        let s = vec![Series::new("a<b", vec![0.0, 1.0, -1.0]), Series::new("c", vec![1.0, 1.0, 1.0])];
        let svg = line_plot_svg(&s, &RenderSpec::default().with_title("t & u")).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a&lt;b") && svg.contains("t &amp; u"));
        assert!(line_plot_svg(&[Series::new("x", vec![1.0]), Series::new("y", vec![])], &RenderSpec::default()).is_err());

        let p = Projection2D {
            points: vec![[0.0, 0.0], [1.0, 2.0], [3.0, -1.0]],
            labels: vec!["web".into(), "code".into(), "web".into()],
            sample_ids: vec!["0".into(), "1".into(), "2".into()],
            final_kl: 0.0,
            kl_checkpoints: vec![],
            perplexity: 2.0,
            learning_rate: 1.0,
            uncalibrated_points: 0,
        };
        let svg = scatter_svg(&p, &RenderSpec::default()).unwrap();
        assert_eq!(svg.matches(r#"class="point""#).count(), 3);
        assert_eq!(svg.matches(&format!(r#"fill="{}""#, PALETTE[1])).count(), 3);
    }

    #[test]
    fn token_page_opacities() {
        let page = TokenEntropyPage::new(
            ["a", "b", "<c>", "d", "e"].map(String::from).to_vec(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0],
            3,
            1,
        )
        .unwrap();
        let html = token_entropy_html(&page);
        let found: Vec<f64> = html
            .lines()
            .filter_map(|l| l.split("data-opacity=\"").nth(1))
            .map(|r| r.split('"').next().unwrap().parse().unwrap())
            .collect();
        assert_eq!(found, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(html.contains("&lt;c&gt;"));

        let zero = TokenEntropyPage::new(vec!["x".into(), "y".into()], vec![0.0, 0.0], 0, 0).unwrap();
        assert_eq!(zero.opacities(), vec![0.0, 0.0]);
        let one = TokenEntropyPage::new(vec!["x".into()], vec![0.7], 0, 0).unwrap();
        assert_eq!(one.opacities(), vec![1.0]);
        assert!(TokenEntropyPage::new(vec!["x".into()], vec![], 0, 0).is_err());
        assert!(TokenEntropyPage::new(vec!["x".into()], vec![f64::NAN], 0, 0).is_err());
    }
}
