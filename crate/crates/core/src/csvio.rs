// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV readers and writers for every numeric output. Floats are written with
//! nine significant digits; each writer has a matching reader.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::Projection2D;
use crate::interdep::Adjacency;
use crate::metrics::{HeadLayerMatrix, MetricError, MetricKind};
use crate::mixture::Bounds;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Content { path: PathBuf, msg: String },
}

pub type Result<T, E = CsvError> = std::result::Result<T, E>;

/// Formats `v` with nine significant digits, trailing zeros trimmed.
///
/// ```
/// use attnprof::csvio::fmt_sig9;
/// assert_eq!(fmt_sig9(1.25 / 3.0), "0.416666667");
/// assert_eq!(fmt_sig9(-2.0), "-2");
/// assert_eq!(fmt_sig9(1.0e-7), "1e-7");
/// ```
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|source| CsvError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::Reader::from_path(path).map_err(|source| CsvError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let wrap = |source| CsvError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = writer(path)?;
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(wrap)?;
    }
    w.flush().map_err(|source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut r = reader(path)?;
    let found = r
        .headers()
        .map_err(|source| CsvError::Csv {
            path: path.to_path_buf(),
            source,
        })?
        .clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(CsvError::Content {
            path: path.to_path_buf(),
            msg: format!("expected header {}, found {}", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        });
    }
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|source| CsvError::Csv {
            path: path.to_path_buf(),
            source,
        })
}

#[derive(Deserialize)]
struct CellRow {
    layer: usize,
    head: usize,
    value: f64,
}

/// `layer,head,value`, one row per cell in layer-major order.
pub fn write_matrix_csv(path: impl AsRef<Path>, m: &HeadLayerMatrix) -> Result<()> {
    let rows = m.layers().iter().enumerate().flat_map(|(li, &layer)| {
        m.heads()
            .iter()
            .enumerate()
            .map(move |(hi, &head)| vec![layer.to_string(), head.to_string(), fmt_sig9(m.get(li, hi))])
    });
    write_rows(path.as_ref(), &["layer", "head", "value"], rows)
}

/// Reads a grid written by [`write_matrix_csv`]. Every (layer, head) pair of
/// the distinct layers and heads present must appear exactly once.
pub fn read_matrix_csv(path: impl AsRef<Path>, metric: MetricKind) -> Result<HeadLayerMatrix> {
    let path = path.as_ref();
    let rows: Vec<CellRow> = read_rows(path, &["layer", "head", "value"])?;
    let content = |msg: String| CsvError::Content {
        path: path.to_path_buf(),
        msg,
    };
    let mut layers: Vec<usize> = Vec::new();
    let mut heads: Vec<usize> = Vec::new();
    for r in &rows {
        if !layers.contains(&r.layer) {
            layers.push(r.layer);
        }
        if !heads.contains(&r.head) {
            heads.push(r.head);
        }
    }
    let mut values = vec![f64::NAN; layers.len() * heads.len()];
    for r in &rows {
        let li = layers.iter().position(|&l| l == r.layer).unwrap();
        let hi = heads.iter().position(|&h| h == r.head).unwrap();
        let slot = &mut values[li * heads.len() + hi];
        if !slot.is_nan() {
            return Err(content(format!("duplicate cell ({}, {})", r.layer, r.head)));
        }
        *slot = r.value;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(content("missing cells".into()));
    }
    HeadLayerMatrix::new(layers, heads, values, metric).map_err(|e: MetricError| content(e.to_string()))
}

/// Two-column `axis,value` file, e.g. a by-layer or by-head marginal.
pub fn write_series_csv(path: impl AsRef<Path>, axis: &str, index: &[usize], values: &[f64]) -> Result<()> {
    let rows = index
        .iter()
        .zip(values)
        .map(|(i, v)| vec![i.to_string(), fmt_sig9(*v)]);
    write_rows(path.as_ref(), &[axis, "value"], rows)
}

pub fn read_series_csv(path: impl AsRef<Path>, axis: &str) -> Result<(Vec<usize>, Vec<f64>)> {
    let rows: Vec<(usize, f64)> = read_rows(path.as_ref(), &[axis, "value"])?;
    Ok(rows.into_iter().unzip())
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// `i,j,weight` for off-diagonal nonzero entries, row-major.
pub fn write_graph_csv(path: impl AsRef<Path>, a: &Adjacency) -> Result<()> {
    let rows = a
        .edges()
        .map(|(i, j, w)| vec![i.to_string(), j.to_string(), fmt_sig9(w)]);
    write_rows(path.as_ref(), &["i", "j", "weight"], rows)
}

pub fn read_graph_csv(path: impl AsRef<Path>) -> Result<Vec<Edge>> {
    read_rows(path.as_ref(), &["i", "j", "weight"])
}

/// Rebuilds an `n`-node adjacency from an edge list.
pub fn edges_to_adjacency(n: usize, edges: &[Edge]) -> std::result::Result<Adjacency, crate::interdep::InterdepError> {
    let mut w = vec![0.0; n * n];
    for e in edges {
        if e.i >= n || e.j >= n {
            return Err(crate::interdep::InterdepError::Shape { n, len: e.i.max(e.j) + 1 });
        }
        w[e.i * n + e.j] = e.weight;
    }
    Adjacency::new(n, w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub sample_id: String,
    pub domain: String,
    pub layer: usize,
    pub x: f64,
    pub y: f64,
}

/// `sample_id,domain,layer,x,y`, one row per point of each projection.
pub fn write_projection_csv(path: impl AsRef<Path>, projections: &[(usize, &Projection2D)]) -> Result<()> {
    let rows = projections.iter().flat_map(|(layer, p)| {
        p.points
            .iter()
            .zip(&p.labels)
            .zip(&p.sample_ids)
            .map(move |((pt, label), id)| {
                vec![id.clone(), label.clone(), layer.to_string(), fmt_sig9(pt[0]), fmt_sig9(pt[1])]
            })
    });
    write_rows(path.as_ref(), &["sample_id", "domain", "layer", "x", "y"], rows)
}

pub fn read_projection_csv(path: impl AsRef<Path>) -> Result<Vec<ProjectionRow>> {
    read_rows(path.as_ref(), &["sample_id", "domain", "layer", "x", "y"])
}

/// One pair of bounds, as fractions and as percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureRow {
    pub quantity: String,
    pub lower: f64,
    pub upper: f64,
    pub lower_percent: f64,
    pub upper_percent: f64,
}

impl MixtureRow {
    pub fn from_bounds(quantity: impl Into<String>, b: &Bounds) -> Self {
        let (lower_percent, upper_percent) = b.percent();
        Self {
            quantity: quantity.into(),
            lower: b.lower,
            upper: b.upper,
            lower_percent,
            upper_percent,
        }
    }
}

const MIXTURE_HEADER: [&str; 5] = ["quantity", "lower", "upper", "lower_percent", "upper_percent"];

/// `quantity,lower,upper,lower_percent,upper_percent`.
pub fn write_mixture_csv(path: impl AsRef<Path>, rows: &[MixtureRow]) -> Result<()> {
    let rows = rows.iter().map(|r| {
        vec![
            r.quantity.clone(),
            fmt_sig9(r.lower),
            fmt_sig9(r.upper),
            fmt_sig9(r.lower_percent),
            fmt_sig9(r.upper_percent),
        ]
    });
    write_rows(path.as_ref(), &MIXTURE_HEADER, rows)
}

pub fn read_mixture_csv(path: impl AsRef<Path>) -> Result<Vec<MixtureRow>> {
    read_rows(path.as_ref(), &MIXTURE_HEADER)
}

/// `key,value` pairs such as a scalar summary.
pub fn write_summary_csv(path: impl AsRef<Path>, pairs: &[(&str, String)]) -> Result<()> {
    let rows = pairs.iter().map(|(k, v)| vec![k.to_string(), v.clone()]);
    write_rows(path.as_ref(), &["key", "value"], rows)
}

pub fn read_summary_csv(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    #[derive(Deserialize)]
    struct Row {
        key: String,
        value: String,
    }
    let rows: Vec<Row> = read_rows(path.as_ref(), &["key", "value"])?;
    Ok(rows.into_iter().map(|r| (r.key, r.value)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRow {
    pub position: usize,
    pub token: String,
    pub value: f64,
}

/// `position,token,value` for per-token quantities (entropy, weight).
pub fn write_token_csv(path: impl AsRef<Path>, tokens: &[String], values: &[f64]) -> Result<()> {
    let rows = tokens
        .iter()
        .zip(values)
        .enumerate()
        .map(|(i, (t, v))| vec![i.to_string(), t.clone(), fmt_sig9(*v)]);
    write_rows(path.as_ref(), &["position", "token", "value"], rows)
}

pub fn read_token_csv(path: impl AsRef<Path>) -> Result<Vec<TokenRow>> {
    read_rows(path.as_ref(), &["position", "token", "value"])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub path: String,
    pub sample_id: String,
    pub valid: bool,
    pub max_deviation: f64,
    pub rows_over_tolerance: usize,
    pub negative_count: usize,
    pub non_finite_count: usize,
    /// Read or header error; empty when the file parsed.
    pub error: String,
}

const VALIDATION_HEADER: [&str; 8] = [
    "path",
    "sample_id",
    "valid",
    "max_deviation",
    "rows_over_tolerance",
    "negative_count",
    "non_finite_count",
    "error",
];

/// One row per checked file.
pub fn write_validation_csv(path: impl AsRef<Path>, rows: &[ValidationRow]) -> Result<()> {
    let rows = rows.iter().map(|r| {
        vec![
            r.path.clone(),
            r.sample_id.clone(),
            r.valid.to_string(),
            fmt_sig9(r.max_deviation),
            r.rows_over_tolerance.to_string(),
            r.negative_count.to_string(),
            r.non_finite_count.to_string(),
            r.error.clone(),
        ]
    });
    write_rows(path.as_ref(), &VALIDATION_HEADER, rows)
}

pub fn read_validation_csv(path: impl AsRef<Path>) -> Result<Vec<ValidationRow>> {
    read_rows(path.as_ref(), &VALIDATION_HEADER)
}
