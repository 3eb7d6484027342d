// SPDX-License-Identifier: MIT OR Apache-2.0

//! Binary containers for attention and hidden-state dumps.
//!
//! An ATNS file holds one text sample's causal attention for a subset of
//! (layer, head) pairs. Only the lower triangle is stored: row `i` (0-based)
//! of a block carries `i + 1` little-endian `f32` values. An HDNS file holds
//! one sample's hidden states at a single layer.
//!
//! ```text
//! "ATNS" | u16 version | u32 header_len | JSON header | payload
//! payload = for layer in layer_indices, for head in head_indices,
//!           rows 0..seq_len, row i has i+1 f32 values
//! ```
//!
//! [`AttentionReader`] parses the header eagerly and serves individual blocks
//! with positioned reads, so a corpus pass never needs a whole file (or the
//! whole corpus) resident.

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ATNS_MAGIC: &[u8; 4] = b"ATNS";
pub const HDNS_MAGIC: &[u8; 4] = b"HDNS";
pub const FORMAT_VERSION: u16 = 1;

/// Row-sum tolerance for softmax output stored as `f32`.
pub const ROW_SUM_TOLERANCE: f64 = 1e-3;

const PREAMBLE_LEN: u64 = 4 + 2 + 4;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: bad magic bytes {found:?}, expected {expected:?}")]
    BadMagic {
        path: PathBuf,
        found: [u8; 4],
        expected: [u8; 4],
    },
    #[error("{path}: unsupported format version {found} (expected {FORMAT_VERSION})")]
    Version { path: PathBuf, found: u16 },
    #[error("{path}: malformed header: {reason}")]
    Header { path: PathBuf, reason: String },
    #[error("{path}: payload is {found} bytes, header implies {expected}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        found: u64,
    },
    #[error("{path}: {count} non-finite entries in layer {layer} head {head}")]
    NonFinite {
        path: PathBuf,
        layer: usize,
        head: usize,
        count: usize,
    },
    #[error("{path}: non-finite hidden state values ({count})")]
    NonFiniteHidden { path: PathBuf, count: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("layer {layer} head {head} not present in sample {sample_id}")]
    MissingBlock {
        sample_id: String,
        layer: usize,
        head: usize,
    },
    #[error("{path}: sample domain {found:?} does not match corpus domain {expected:?}")]
    DomainMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
}

impl StoreError {
    fn io(path: &Path, source: io::Error) -> Self {
        StoreError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn header(path: &Path, reason: impl Into<String>) -> Self {
        StoreError::Header {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "f32")]
    F32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    #[serde(rename = "lower_triangular")]
    LowerTriangular,
}

/// JSON header of an ATNS file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionDumpHeader {
    pub sample_id: String,
    pub domain: String,
    pub model_id: String,
    pub n_layers: usize,
    pub n_heads: usize,
    pub seq_len: usize,
    pub layer_indices: Vec<usize>,
    pub head_indices: Vec<usize>,
    pub dtype: Dtype,
    pub layout: Layout,
}

fn check_indices(name: &str, indices: &[usize], bound: usize) -> Result<(), String> {
    if indices.is_empty() {
        return Err(format!("{name} is empty"));
    }
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(format!("{name} is not strictly ascending"));
    }
    if let Some(&last) = indices.last() {
        if last >= bound {
            return Err(format!("{name} entry {last} out of range 0..{bound}"));
        }
    }
    Ok(())
}

impl AttentionDumpHeader {
    /// Header for a sample that dumps every layer and head.
    pub fn full(
        sample_id: impl Into<String>,
        domain: impl Into<String>,
        model_id: impl Into<String>,
        n_layers: usize,
        n_heads: usize,
        seq_len: usize,
    ) -> Self {
        Self {
            sample_id: sample_id.into(),
            domain: domain.into(),
            model_id: model_id.into(),
            n_layers,
            n_heads,
            seq_len,
            layer_indices: (0..n_layers).collect(),
            head_indices: (0..n_heads).collect(),
            dtype: Dtype::F32,
            layout: Layout::LowerTriangular,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if self.n_layers == 0 || self.n_heads == 0 {
            return Err("n_layers and n_heads must be positive".into());
        }
        if self.seq_len == 0 {
            return Err("seq_len must be at least 1".into());
        }
        check_indices("layer_indices", &self.layer_indices, self.n_layers)?;
        check_indices("head_indices", &self.head_indices, self.n_heads)?;
        Ok(())
    }

    /// Number of stored values in one (layer, head) block.
    pub fn block_len(&self) -> usize {
        triangle_len(self.seq_len)
    }

    pub fn n_blocks(&self) -> usize {
        self.layer_indices.len() * self.head_indices.len()
    }

    pub fn payload_len(&self) -> usize {
        self.n_blocks() * self.block_len()
    }

    /// Position of the (layer, head) block in the payload, if stored.
    pub fn block_index(&self, layer: usize, head: usize) -> Option<usize> {
        let li = self.layer_indices.binary_search(&layer).ok()?;
        let hi = self.head_indices.binary_search(&head).ok()?;
        Some(li * self.head_indices.len() + hi)
    }

    /// `(layer, head)` pairs in payload order.
    pub fn blocks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.layer_indices
            .iter()
            .flat_map(move |&l| self.head_indices.iter().map(move |&h| (l, h)))
    }

    /// Layer index `⌊n_layers / 2⌋`.
    pub fn middle_layer(&self) -> usize {
        self.n_layers / 2
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.layer_indices == other.layer_indices && self.head_indices == other.head_indices
    }
}

#[inline]
pub fn triangle_len(seq_len: usize) -> usize {
    seq_len * (seq_len + 1) / 2
}

/// Borrowed view of one lower-triangular attention block.
#[derive(Debug, Clone, Copy)]
pub struct TriangularBlock<'a> {
    seq_len: usize,
    data: &'a [f32],
}

impl<'a> TriangularBlock<'a> {
    pub fn new(seq_len: usize, data: &'a [f32]) -> Result<Self> {
        if data.len() != triangle_len(seq_len) {
            return Err(StoreError::Dimension(format!(
                "block of {} values cannot be a triangle of seq_len {seq_len}",
                data.len()
            )));
        }
        Ok(Self { seq_len, data })
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    /// Row `i` (0-based): attention from query `i` to keys `0..=i`.
    #[inline]
    pub fn row(&self, i: usize) -> &'a [f32] {
        let start = triangle_len(i);
        &self.data[start..start + i + 1]
    }

    pub fn rows(&self) -> impl Iterator<Item = &'a [f32]> + '_ {
        (0..self.seq_len).map(move |i| self.row(i))
    }

    pub fn values(&self) -> &'a [f32] {
        self.data
    }
}

/// One sample's attention, all stored blocks materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionSample {
    pub header: AttentionDumpHeader,
    data: Vec<f32>,
}

impl AttentionSample {
    /// `data` is the concatenated payload in block order.
    pub fn new(header: AttentionDumpHeader, data: Vec<f32>) -> Result<Self> {
        header.check().map_err(StoreError::Dimension)?;
        if data.len() != header.payload_len() {
            return Err(StoreError::Dimension(format!(
                "payload has {} values, header implies {}",
                data.len(),
                header.payload_len()
            )));
        }
        Ok(Self { header, data })
    }

    /// Builds a sample from one closure call per stored (layer, head, row).
    pub fn from_fn(
        header: AttentionDumpHeader,
        mut row: impl FnMut(usize, usize, usize) -> Vec<f32>,
    ) -> Result<Self> {
        header.check().map_err(StoreError::Dimension)?;
        let mut data = Vec::with_capacity(header.payload_len());
        for (l, h) in header.blocks() {
            for i in 0..header.seq_len {
                let r = row(l, h, i);
                if r.len() != i + 1 {
                    return Err(StoreError::Dimension(format!(
                        "layer {l} head {h} row {i} has {} values, expected {}",
                        r.len(),
                        i + 1
                    )));
                }
                data.extend_from_slice(&r);
            }
        }
        Self::new(header, data)
    }

    pub fn block(&self, layer: usize, head: usize) -> Result<TriangularBlock<'_>> {
        let idx = self
            .header
            .block_index(layer, head)
            .ok_or_else(|| StoreError::MissingBlock {
                sample_id: self.header.sample_id.clone(),
                layer,
                head,
            })?;
        let len = self.header.block_len();
        TriangularBlock::new(self.header.seq_len, &self.data[idx * len..(idx + 1) * len])
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_parts(self) -> (AttentionDumpHeader, Vec<f32>) {
        (self.header, self.data)
    }
}

fn write_container(path: &Path, magic: &[u8; 4], header_json: &[u8], payload: &[f32]) -> Result<()> {
    let file = File::create(path).map_err(|e| StoreError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header_len = u32::try_from(header_json.len())
        .map_err(|_| StoreError::header(path, "header longer than u32::MAX bytes"))?;
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| StoreError::io(path, e));
    put(magic)?;
    put(&FORMAT_VERSION.to_le_bytes())?;
    put(&header_len.to_le_bytes())?;
    put(header_json)?;
    for v in payload {
        put(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| StoreError::io(path, e))
}

/// Writes `sample` as an ATNS file.
pub fn write_attention_sample(path: impl AsRef<Path>, sample: &AttentionSample) -> Result<PathBuf> {
    let path = path.as_ref();
    let json = serde_json::to_vec(&sample.header)
        .map_err(|e| StoreError::header(path, e.to_string()))?;
    write_container(path, ATNS_MAGIC, &json, &sample.data)?;
    Ok(path.to_path_buf())
}

/// Reads the preamble and JSON header; returns the header bytes and payload offset.
fn read_preamble(path: &Path, file: &mut File, magic: &[u8; 4]) -> Result<(Vec<u8>, u64)> {
    let mut pre = [0u8; PREAMBLE_LEN as usize];
    file.read_exact(&mut pre).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => StoreError::header(path, "file shorter than preamble"),
        _ => StoreError::io(path, e),
    })?;
    let found: [u8; 4] = pre[0..4].try_into().unwrap();
    if &found != magic {
        return Err(StoreError::BadMagic {
            path: path.to_path_buf(),
            found,
            expected: *magic,
        });
    }
    let version = u16::from_le_bytes([pre[4], pre[5]]);
    if version != FORMAT_VERSION {
        return Err(StoreError::Version {
            path: path.to_path_buf(),
            found: version,
        });
    }
    let header_len = u32::from_le_bytes(pre[6..10].try_into().unwrap()) as usize;
    let mut json = vec![0u8; header_len];
    file.read_exact(&mut json).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => StoreError::header(path, "header truncated"),
        _ => StoreError::io(path, e),
    })?;
    Ok((json, PREAMBLE_LEN + header_len as u64))
}

fn check_payload_size(path: &Path, file: &File, offset: u64, n_values: usize) -> Result<()> {
    let found = file.metadata().map_err(|e| StoreError::io(path, e))?.len();
    let expected = offset + 4 * n_values as u64;
    if found != expected {
        return Err(StoreError::Truncated {
            path: path.to_path_buf(),
            expected: expected - offset,
            found: found.saturating_sub(offset),
        });
    }
    Ok(())
}

#[cfg(unix)]
fn read_at(file: &File, buf: &mut [u8], offset: u64) -> io::Result<()> {
    use std::os::unix::fs::FileExt;
    file.read_exact_at(buf, offset)
}

#[cfg(windows)]
fn read_at(file: &File, mut buf: &mut [u8], mut offset: u64) -> io::Result<()> {
    use std::os::windows::fs::FileExt;
    while !buf.is_empty() {
        match file.seek_read(buf, offset)? {
            0 => return Err(io::ErrorKind::UnexpectedEof.into()),
            n => {
                buf = &mut buf[n..];
                offset += n as u64;
            }
        }
    }
    Ok(())
}

fn decode_f32(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

/// Open ATNS file. The header is parsed on open; blocks are read on demand
/// with positioned reads, so `&AttentionReader` can be shared across threads.
#[derive(Debug)]
pub struct AttentionReader {
    path: PathBuf,
    file: File,
    header: AttentionDumpHeader,
    payload_offset: u64,
}

impl AttentionReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut file = File::open(path).map_err(|e| StoreError::io(path, e))?;
        let (json, payload_offset) = read_preamble(path, &mut file, ATNS_MAGIC)?;
        let header: AttentionDumpHeader =
            serde_json::from_slice(&json).map_err(|e| StoreError::header(path, e.to_string()))?;
        header.check().map_err(|r| StoreError::header(path, r))?;
        check_payload_size(path, &file, payload_offset, header.payload_len())?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
            header,
            payload_offset,
        })
    }

    pub fn header(&self) -> &AttentionDumpHeader {
        &self.header
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Reads one block without checking its values.
    pub fn read_block_raw(&self, layer: usize, head: usize) -> Result<Vec<f32>> {
        let idx = self
            .header
            .block_index(layer, head)
            .ok_or_else(|| StoreError::MissingBlock {
                sample_id: self.header.sample_id.clone(),
                layer,
                head,
            })?;
        let len = self.header.block_len();
        let mut buf = vec![0u8; 4 * len];
        let offset = self.payload_offset + 4 * (idx * len) as u64;
        read_at(&self.file, &mut buf, offset).map_err(|e| StoreError::io(&self.path, e))?;
        Ok(decode_f32(&buf))
    }

    /// Reads one block, rejecting NaN or infinite entries.
    pub fn read_block(&self, layer: usize, head: usize) -> Result<Vec<f32>> {
        let block = self.read_block_raw(layer, head)?;
        let bad = block.iter().filter(|v| !v.is_finite()).count();
        if bad > 0 {
            return Err(StoreError::NonFinite {
                path: self.path.clone(),
                layer,
                head,
                count: bad,
            });
        }
        Ok(block)
    }

    /// Materializes every block without value checks.
    pub fn read_all_raw(&self) -> Result<AttentionSample> {
        let mut buf = vec![0u8; 4 * self.header.payload_len()];
        read_at(&self.file, &mut buf, self.payload_offset)
            .map_err(|e| StoreError::io(&self.path, e))?;
        AttentionSample::new(self.header.clone(), decode_f32(&buf))
    }

    /// Materializes every block, rejecting non-finite entries.
    pub fn read_all(&self) -> Result<AttentionSample> {
        let sample = self.read_all_raw()?;
        for (l, h) in self.header.blocks() {
            let block = sample.block(l, h)?;
            let bad = block.values().iter().filter(|v| !v.is_finite()).count();
            if bad > 0 {
                return Err(StoreError::NonFinite {
                    path: self.path.clone(),
                    layer: l,
                    head: h,
                    count: bad,
                });
            }
        }
        Ok(sample)
    }
}

/// Reads an ATNS file fully. Non-finite entries are an error.
pub fn read_attention_sample(path: impl AsRef<Path>) -> Result<AttentionSample> {
    AttentionReader::open(path)?.read_all()
}

/// Findings from checking a sample's probability structure.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub sample_id: String,
    /// For each row position, the largest |row sum − 1| over all blocks.
    pub row_max_deviation: Vec<f64>,
    pub max_deviation: f64,
    /// Rows (across all blocks) whose sum deviates by more than the tolerance.
    pub rows_over_tolerance: usize,
    pub negative_count: usize,
    pub non_finite_count: usize,
}

impl ValidationReport {
    pub fn new(sample_id: impl Into<String>, seq_len: usize) -> Self {
        Self {
            sample_id: sample_id.into(),
            row_max_deviation: vec![0.0; seq_len],
            ..Default::default()
        }
    }

    pub fn is_valid(&self) -> bool {
        self.rows_over_tolerance == 0 && self.negative_count == 0 && self.non_finite_count == 0
    }

    /// Folds one block's findings into the report.
    pub fn check_block(&mut self, block: TriangularBlock<'_>) {
        for (i, row) in block.rows().enumerate() {
            let mut sum = 0.0f64;
            let mut finite = true;
            for &v in row {
                if !v.is_finite() {
                    self.non_finite_count += 1;
                    finite = false;
                } else if v < 0.0 {
                    self.negative_count += 1;
                }
                sum += v as f64;
            }
            let dev = if finite { (sum - 1.0).abs() } else { f64::INFINITY };
            if dev > ROW_SUM_TOLERANCE {
                self.rows_over_tolerance += 1;
            }
            if dev > self.row_max_deviation[i] {
                self.row_max_deviation[i] = dev;
            }
            if dev > self.max_deviation {
                self.max_deviation = dev;
            }
        }
    }
}

pub fn validate_sample(sample: &AttentionSample) -> ValidationReport {
    let mut report = ValidationReport::new(&sample.header.sample_id, sample.header.seq_len);
    for (l, h) in sample.header.blocks() {
        // block() cannot fail for indices drawn from the header itself
        if let Ok(block) = sample.block(l, h) {
            report.check_block(block);
        }
    }
    report
}

/// Scalar fields of an HDNS header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiddenStateHeader {
    pub sample_id: String,
    pub domain: String,
    pub layer: usize,
    pub seq_len: usize,
    pub d_model: usize,
}

/// Hidden states of one sample at one layer, `seq_len × d_model` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStateSample {
    pub header: HiddenStateHeader,
    states: Vec<f32>,
}

impl HiddenStateSample {
    pub fn new(header: HiddenStateHeader, states: Vec<f32>) -> Result<Self> {
        if header.seq_len == 0 || header.d_model == 0 {
            return Err(StoreError::Dimension(
                "seq_len and d_model must be positive".into(),
            ));
        }
        if states.len() != header.seq_len * header.d_model {
            return Err(StoreError::Dimension(format!(
                "{} values for a {}x{} hidden state matrix",
                states.len(),
                header.seq_len,
                header.d_model
            )));
        }
        Ok(Self { header, states })
    }

    pub fn states(&self) -> &[f32] {
        &self.states
    }

    pub fn token(&self, t: usize) -> &[f32] {
        let d = self.header.d_model;
        &self.states[t * d..(t + 1) * d]
    }
}

pub fn write_hidden_sample(path: impl AsRef<Path>, sample: &HiddenStateSample) -> Result<PathBuf> {
    let path = path.as_ref();
    let json = serde_json::to_vec(&sample.header)
        .map_err(|e| StoreError::header(path, e.to_string()))?;
    write_container(path, HDNS_MAGIC, &json, &sample.states)?;
    Ok(path.to_path_buf())
}

pub fn read_hidden_sample(path: impl AsRef<Path>) -> Result<HiddenStateSample> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| StoreError::io(path, e))?;
    let (json, offset) = read_preamble(path, &mut file, HDNS_MAGIC)?;
    let header: HiddenStateHeader =
        serde_json::from_slice(&json).map_err(|e| StoreError::header(path, e.to_string()))?;
    let n = header.seq_len * header.d_model;
    check_payload_size(path, &file, offset, n)?;
    let mut buf = vec![0u8; 4 * n];
    file.read_exact(&mut buf)
        .map_err(|e| StoreError::io(path, e))?;
    let states = decode_f32(&buf);
    let bad = states.iter().filter(|v| !v.is_finite()).count();
    if bad > 0 {
        return Err(StoreError::NonFiniteHidden {
            path: path.to_path_buf(),
            count: bad,
        });
    }
    HiddenStateSample::new(header, states).map_err(|e| StoreError::header(path, e.to_string()))
}

/// Sorted list of files with the given extension directly under `root`.
fn list_files(root: &Path, extension: &str) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(root).map_err(|e| StoreError::io(root, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| StoreError::io(root, e))?;
        let path = entry.path();
        if path.is_file() && path.extension().is_some_and(|e| e == extension) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// A directory of `.atns` files forming one domain corpus.
#[derive(Debug, Clone)]
pub struct CorpusHandle {
    root: PathBuf,
    domain: Option<String>,
    files: std::sync::OnceLock<Vec<PathBuf>>,
}

impl CorpusHandle {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            domain: None,
            files: std::sync::OnceLock::new(),
        }
    }

    /// Requires every sample's header domain to equal `domain`.
    pub fn with_domain(mut self, domain: impl Into<String>) -> Self {
        self.domain = Some(domain.into());
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn domain(&self) -> Option<&str> {
        self.domain.as_deref()
    }

    /// ATNS files in lexicographic file-name order. Enumerated once.
    pub fn files(&self) -> Result<&[PathBuf]> {
        if let Some(files) = self.files.get() {
            return Ok(files);
        }
        let files = list_files(&self.root, "atns")?;
        Ok(self.files.get_or_init(|| files))
    }

    /// Opens a reader for `path`, enforcing the corpus domain tag.
    pub fn open(&self, path: &Path) -> Result<AttentionReader> {
        let reader = AttentionReader::open(path)?;
        if let Some(domain) = &self.domain {
            if &reader.header().domain != domain {
                return Err(StoreError::DomainMismatch {
                    path: path.to_path_buf(),
                    expected: domain.clone(),
                    found: reader.header().domain.clone(),
                });
            }
        }
        Ok(reader)
    }

    /// Header of the first file, used to fix the corpus grid.
    pub fn first_header(&self) -> Result<Option<AttentionDumpHeader>> {
        match self.files()?.first() {
            Some(p) => Ok(Some(self.open(p)?.header().clone())),
            None => Ok(None),
        }
    }

    /// Fully materialized samples in file order; unreadable files appear as
    /// `Err` items rather than being dropped.
    pub fn iter(&self) -> Result<impl Iterator<Item = Result<AttentionSample>> + '_> {
        let files = self.files()?;
        Ok(files.iter().map(move |p| self.open(p)?.read_all()))
    }
}

/// Iterates a corpus in deterministic order.
pub fn iterate_corpus(
    handle: &CorpusHandle,
) -> Result<impl Iterator<Item = Result<AttentionSample>> + '_> {
    handle.iter()
}

/// `true` when both headers carry identical layer and head index sets.
pub fn same_grid(a: &AttentionDumpHeader, b: &AttentionDumpHeader) -> bool {
    a.same_grid(b)
}

/// A directory of `.hdns` files.
pub fn hidden_state_files(root: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    list_files(root.as_ref(), "hdns")
}
