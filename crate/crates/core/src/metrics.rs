// SPDX-License-Identifier: MIT OR Apache-2.0

//! Attention distance and attention entropy over (layer, head) grids.
//!
//! Attention distance for one head is the attention-weighted mean gap
//! `i - j` over every causal token pair of every sample in a corpus:
//!
//! ```text
//! D = Σ_x Σ_i Σ_{j≤i} α_ij(x)·(i−j)  /  Σ_x Σ_i Σ_{j≤i} α_ij(x)
//! ```
//!
//! The ratio is taken once over corpus-wide sums, never averaged per sample.
//! Attention entropy is `−Σ_j α_ij ln α_ij` per query token, in nats, and is
//! aggregated as a mean over tokens.
//!
//! Corpus passes stream one (layer, head) block at a time through
//! [`AttentionReader`](crate::store::AttentionReader). Per-sample
//! accumulators are merged in file order, so serial and parallel runs give
//! identical results.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::store::{
    same_grid, AttentionDumpHeader, AttentionReader, AttentionSample, CorpusHandle, StoreError,
    TriangularBlock, ValidationReport,
};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("negative attention weight {value} at position {position}")]
    NegativeEntry { position: usize, value: f64 },
    #[error("corpus {0} contains no usable samples")]
    EmptyCorpus(PathBuf),
    #[error("zero attention mass for layer {layer} head {head}")]
    ZeroDenominator { layer: usize, head: usize },
    #[error("no tokens contribute to entropy for layer {layer} head {head}")]
    NoTokens { layer: usize, head: usize },
    #[error("{path}: layer/head index sets differ from the rest of the corpus")]
    GridMismatch { path: PathBuf },
    #[error("{}: invalid sample (max row deviation {:.3e}, {} negative, {} non-finite)",
        path.display(), report.max_deviation, report.negative_count, report.non_finite_count)]
    InvalidSample {
        path: PathBuf,
        report: Box<ValidationReport>,
    },
    #[error("grid mismatch: {0}")]
    Shape(String),
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

pub type Result<T, E = MetricError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Distance,
    Entropy,
    DeltaDistance,
}

impl MetricKind {
    pub fn is_signed(self) -> bool {
        matches!(self, MetricKind::DeltaDistance)
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Distance => "distance",
            MetricKind::Entropy => "entropy",
            MetricKind::DeltaDistance => "delta_distance",
        }
    }
}

/// A scalar metric per (layer, head). Rows are layers, columns heads, both
/// labelled by the model indices they came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeadLayerMatrix {
    layers: Vec<usize>,
    heads: Vec<usize>,
    values: Vec<f64>,
    metric: MetricKind,
}

impl HeadLayerMatrix {
    pub fn new(
        layers: Vec<usize>,
        heads: Vec<usize>,
        values: Vec<f64>,
        metric: MetricKind,
    ) -> Result<Self> {
        if layers.is_empty() || heads.is_empty() {
            return Err(MetricError::Shape("empty layer or head axis".into()));
        }
        if values.len() != layers.len() * heads.len() {
            return Err(MetricError::Shape(format!(
                "{} values for a {}x{} grid",
                values.len(),
                layers.len(),
                heads.len()
            )));
        }
        if !metric.is_signed() && values.iter().any(|v| *v < 0.0) {
            return Err(MetricError::Shape(format!(
                "{} grid holds negative values",
                metric.name()
            )));
        }
        Ok(Self {
            layers,
            heads,
            values,
            metric,
        })
    }

    /// Grid labelled `0..n_layers` × `0..n_heads`.
    pub fn from_rows(rows: &[Vec<f64>], metric: MetricKind) -> Result<Self> {
        let n_heads = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_heads) {
            return Err(MetricError::Shape("ragged rows".into()));
        }
        Self::new(
            (0..rows.len()).collect(),
            (0..n_heads).collect(),
            rows.concat(),
            metric,
        )
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn heads(&self) -> &[usize] {
        &self.heads
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn n_heads(&self) -> usize {
        self.heads.len()
    }

    /// Row-major values, layer-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at grid position (row `li`, column `hi`).
    pub fn get(&self, li: usize, hi: usize) -> f64 {
        self.values[li * self.heads.len() + hi]
    }

    /// Value for model layer `layer` and head `head`.
    pub fn value_at(&self, layer: usize, head: usize) -> Option<f64> {
        let li = self.layers.iter().position(|&l| l == layer)?;
        let hi = self.heads.iter().position(|&h| h == head)?;
        Some(self.get(li, hi))
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers == other.layers && self.heads == other.heads
    }

    pub(crate) fn with_values(&self, values: Vec<f64>, metric: MetricKind) -> Self {
        Self {
            layers: self.layers.clone(),
            heads: self.heads.clone(),
            values,
            metric,
        }
    }

    /// Mean over heads for each layer.
    pub fn marginal_by_layer(&self) -> Vec<f64> {
        let h = self.heads.len() as f64;
        self.values
            .chunks_exact(self.heads.len())
            .map(|row| row.iter().sum::<f64>() / h)
            .collect()
    }

    /// Mean over layers for each head.
    pub fn marginal_by_head(&self) -> Vec<f64> {
        let nh = self.heads.len();
        let l = self.layers.len() as f64;
        (0..nh)
            .map(|hi| {
                self.values
                    .iter()
                    .skip(hi)
                    .step_by(nh)
                    .sum::<f64>()
                    / l
            })
            .collect()
    }

    /// Unweighted mean of every cell.
    pub fn overall_mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

pub fn marginal_by_layer(m: &HeadLayerMatrix) -> Vec<f64> {
    m.marginal_by_layer()
}

pub fn marginal_by_head(m: &HeadLayerMatrix) -> Vec<f64> {
    m.marginal_by_head()
}

pub fn overall_mean(m: &HeadLayerMatrix) -> f64 {
    m.overall_mean()
}

/// How attention on the first sequence position enters entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FirstToken {
    #[default]
    Keep,
    /// Drop the `j = 1` term without renormalizing; the single-entry first
    /// row contributes nothing.
    Exclude,
    /// Drop the `j = 1` term and renormalize the rest to sum to one.
    ExcludeRenormalized,
}

#[inline]
fn plogp(p: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * p.ln()
    }
}

fn check_non_negative<T: Copy + Into<f64>>(row: &[T]) -> Result<()> {
    for (position, &v) in row.iter().enumerate() {
        let value: f64 = v.into();
        if value < 0.0 {
            return Err(MetricError::NegativeEntry { position, value });
        }
    }
    Ok(())
}

/// Shannon entropy (nats) of one attention row.
///
/// Returns `None` when the row is excluded from aggregation, which happens
/// only for the length-1 first row under the two exclusion modes.
pub fn row_entropy<T: Copy + Into<f64>>(row: &[T], first: FirstToken) -> Result<Option<f64>> {
    check_non_negative(row)?;
    let h = match first {
        FirstToken::Keep => -row.iter().map(|&a| plogp(a.into())).sum::<f64>(),
        _ if row.len() <= 1 => return Ok(None),
        FirstToken::Exclude => -row[1..].iter().map(|&a| plogp(a.into())).sum::<f64>(),
        FirstToken::ExcludeRenormalized => {
            let mass: f64 = row[1..].iter().map(|&a| a.into()).sum();
            if mass == 0.0 {
                0.0
            } else {
                -row[1..]
                    .iter()
                    .map(|&a| plogp(a.into() / mass))
                    .sum::<f64>()
            }
        }
    };
    // -0.0 from an all-zero sum
    Ok(Some(h.max(0.0)))
}

/// The two double sums behind attention distance for one block.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DistanceTerms {
    pub numerator: f64,
    pub denominator: f64,
}

pub fn block_distance_terms(block: TriangularBlock<'_>) -> DistanceTerms {
    let mut terms = DistanceTerms::default();
    for (i, row) in block.rows().enumerate() {
        for (j, &a) in row.iter().enumerate() {
            let a = a as f64;
            terms.numerator += a * (i - j) as f64;
            terms.denominator += a;
        }
    }
    terms
}

pub fn sample_distance_terms(
    sample: &AttentionSample,
    layer: usize,
    head: usize,
) -> Result<DistanceTerms> {
    Ok(block_distance_terms(sample.block(layer, head)?))
}

/// Summed row entropy and the number of contributing rows for one block.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EntropyTerms {
    pub entropy_sum: f64,
    pub token_count: u64,
}

pub fn block_entropy_terms(block: TriangularBlock<'_>, first: FirstToken) -> Result<EntropyTerms> {
    let mut terms = EntropyTerms::default();
    for row in block.rows() {
        if let Some(h) = row_entropy(row, first)? {
            terms.entropy_sum += h;
            terms.token_count += 1;
        }
    }
    Ok(terms)
}

/// Per-cell distance sums. Merging is cell-wise addition.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DistanceAccumulator {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
}

impl DistanceAccumulator {
    pub fn zeros(cells: usize) -> Self {
        Self {
            numerator: vec![0.0; cells],
            denominator: vec![0.0; cells],
        }
    }

    pub fn add(&mut self, cell: usize, terms: DistanceTerms) {
        self.numerator[cell] += terms.numerator;
        self.denominator[cell] += terms.denominator;
    }

    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.numerator.iter_mut().zip(&other.numerator) {
            *a += b;
        }
        for (a, b) in self.denominator.iter_mut().zip(&other.denominator) {
            *a += b;
        }
    }

    pub fn finish(&self, layers: &[usize], heads: &[usize]) -> Result<HeadLayerMatrix> {
        let nh = heads.len();
        let mut values = Vec::with_capacity(self.numerator.len());
        for (cell, (n, d)) in self.numerator.iter().zip(&self.denominator).enumerate() {
            if *d <= 0.0 {
                return Err(MetricError::ZeroDenominator {
                    layer: layers[cell / nh],
                    head: heads[cell % nh],
                });
            }
            values.push(n / d);
        }
        HeadLayerMatrix::new(layers.to_vec(), heads.to_vec(), values, MetricKind::Distance)
    }
}

/// Per-cell entropy sums and token counts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EntropyAccumulator {
    pub entropy_sum: Vec<f64>,
    pub token_count: Vec<u64>,
}

impl EntropyAccumulator {
    pub fn zeros(cells: usize) -> Self {
        Self {
            entropy_sum: vec![0.0; cells],
            token_count: vec![0; cells],
        }
    }

    pub fn add(&mut self, cell: usize, terms: EntropyTerms) {
        self.entropy_sum[cell] += terms.entropy_sum;
        self.token_count[cell] += terms.token_count;
    }

    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.entropy_sum.iter_mut().zip(&other.entropy_sum) {
            *a += b;
        }
        for (a, b) in self.token_count.iter_mut().zip(&other.token_count) {
            *a += b;
        }
    }

    pub fn finish(&self, layers: &[usize], heads: &[usize]) -> Result<HeadLayerMatrix> {
        let nh = heads.len();
        let mut values = Vec::with_capacity(self.entropy_sum.len());
        for (cell, (s, c)) in self.entropy_sum.iter().zip(&self.token_count).enumerate() {
            if *c == 0 {
                return Err(MetricError::NoTokens {
                    layer: layers[cell / nh],
                    head: heads[cell % nh],
                });
            }
            values.push(s / *c as f64);
        }
        HeadLayerMatrix::new(layers.to_vec(), heads.to_vec(), values, MetricKind::Entropy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InvalidPolicy {
    #[default]
    Abort,
    /// Skip the sample, log a warning and list it in the run result.
    SkipWithWarning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricSet {
    Distance,
    Entropy,
    Both,
}

impl MetricSet {
    fn distance(self) -> bool {
        matches!(self, MetricSet::Distance | MetricSet::Both)
    }

    fn entropy(self) -> bool {
        matches!(self, MetricSet::Entropy | MetricSet::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 1 runs on the calling thread.
    pub workers: usize,
    pub on_invalid: InvalidPolicy,
    pub first_token: FirstToken,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            on_invalid: InvalidPolicy::Abort,
            first_token: FirstToken::Keep,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedSample {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct CorpusMetrics {
    pub distance: Option<HeadLayerMatrix>,
    pub entropy: Option<HeadLayerMatrix>,
    pub samples_used: usize,
    pub skipped: Vec<SkippedSample>,
}

/// Sample-local accumulation for one grid shape.
#[derive(Debug, Clone)]
struct SampleAcc {
    distance: Option<DistanceAccumulator>,
    entropy: Option<EntropyAccumulator>,
}

impl SampleAcc {
    fn new(cells: usize, set: MetricSet) -> Self {
        Self {
            distance: set.distance().then(|| DistanceAccumulator::zeros(cells)),
            entropy: set.entropy().then(|| EntropyAccumulator::zeros(cells)),
        }
    }

    fn add_block(&mut self, cell: usize, block: TriangularBlock<'_>, first: FirstToken) -> Result<()> {
        if let Some(d) = &mut self.distance {
            d.add(cell, block_distance_terms(block));
        }
        if let Some(e) = &mut self.entropy {
            e.add(cell, block_entropy_terms(block, first)?);
        }
        Ok(())
    }

    fn merge(&mut self, other: &Self) {
        if let (Some(a), Some(b)) = (&mut self.distance, &other.distance) {
            a.merge(b);
        }
        if let (Some(a), Some(b)) = (&mut self.entropy, &other.entropy) {
            a.merge(b);
        }
    }

    fn finish(&self, layers: &[usize], heads: &[usize], samples_used: usize, skipped: Vec<SkippedSample>) -> Result<CorpusMetrics> {
        Ok(CorpusMetrics {
            distance: self.distance.as_ref().map(|d| d.finish(layers, heads)).transpose()?,
            entropy: self.entropy.as_ref().map(|e| e.finish(layers, heads)).transpose()?,
            samples_used,
            skipped,
        })
    }
}

enum Outcome {
    Used(SampleAcc),
    Rejected(MetricError),
}

/// Streams one file block by block, validating as it goes.
fn process_file(
    corpus: &CorpusHandle,
    path: &Path,
    grid: &AttentionDumpHeader,
    set: MetricSet,
    first: FirstToken,
) -> Result<Outcome> {
    let reader = match corpus.open(path) {
        Ok(r) => r,
        Err(e) => return Ok(Outcome::Rejected(e.into())),
    };
    if !same_grid(reader.header(), grid) {
        return Err(MetricError::GridMismatch {
            path: path.to_path_buf(),
        });
    }
    match accumulate_reader(&reader, set, first) {
        Ok(acc) => Ok(Outcome::Used(acc)),
        Err(e) => Ok(Outcome::Rejected(e)),
    }
}

fn accumulate_reader(reader: &AttentionReader, set: MetricSet, first: FirstToken) -> Result<SampleAcc> {
    let header = reader.header();
    let mut acc = SampleAcc::new(header.n_blocks(), set);
    let mut report = ValidationReport::new(&header.sample_id, header.seq_len);
    for (cell, (l, h)) in header.blocks().enumerate() {
        let data = reader.read_block_raw(l, h)?;
        let block = TriangularBlock::new(header.seq_len, &data)?;
        report.check_block(block);
        if !report.is_valid() {
            return Err(MetricError::InvalidSample {
                path: reader.path().to_path_buf(),
                report: Box::new(report),
            });
        }
        acc.add_block(cell, block, first)?;
    }
    Ok(acc)
}

fn accumulate_sample(sample: &AttentionSample, set: MetricSet, first: FirstToken) -> Result<SampleAcc> {
    let header = &sample.header;
    let mut acc = SampleAcc::new(header.n_blocks(), set);
    for (cell, (l, h)) in header.blocks().enumerate() {
        acc.add_block(cell, sample.block(l, h)?, first)?;
    }
    Ok(acc)
}

/// One streamed pass over `corpus` computing the requested metrics.
pub fn analyze_corpus(corpus: &CorpusHandle, set: MetricSet, opts: &RunOptions) -> Result<CorpusMetrics> {
    let files = corpus.files()?;
    let grid = corpus_grid(corpus)?;
    let layers = grid.layer_indices.clone();
    let heads = grid.head_indices.clone();

    let mut total = SampleAcc::new(grid.n_blocks(), set);
    let mut used = 0usize;
    let mut skipped = Vec::new();
    let mut absorb = |path: &Path, outcome: Outcome| -> Result<()> {
        match outcome {
            Outcome::Used(acc) => {
                total.merge(&acc);
                used += 1;
            }
            Outcome::Rejected(err) => match opts.on_invalid {
                InvalidPolicy::Abort => return Err(err),
                InvalidPolicy::SkipWithWarning => {
                    log::warn!("skipping {}: {err}", path.display());
                    skipped.push(SkippedSample {
                        path: path.to_path_buf(),
                        reason: err.to_string(),
                    });
                }
            },
        }
        Ok(())
    };

    if opts.workers <= 1 {
        for path in files {
            let outcome = process_file(corpus, path, &grid, set, opts.first_token)?;
            absorb(path, outcome)?;
        }
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| MetricError::Pool(e.to_string()))?;
        // Fixed-size chunks merged in file order keep the sum order identical
        // to the serial path.
        for chunk in files.chunks(opts.workers * 8) {
            let outcomes: Vec<Result<Outcome>> = pool.install(|| {
                chunk
                    .par_iter()
                    .map(|p| process_file(corpus, p, &grid, set, opts.first_token))
                    .collect()
            });
            for (path, outcome) in chunk.iter().zip(outcomes) {
                absorb(path, outcome?)?;
            }
        }
    }

    if used == 0 {
        return Err(MetricError::EmptyCorpus(corpus.root().to_path_buf()));
    }
    total.finish(&layers, &heads, used, skipped)
}

fn corpus_grid(corpus: &CorpusHandle) -> Result<AttentionDumpHeader> {
    // The first readable file fixes the grid; unreadable ones are dealt with
    // by the main pass according to the invalid-sample policy.
    for path in corpus.files()? {
        if let Ok(reader) = corpus.open(path) {
            return Ok(reader.header().clone());
        }
    }
    Err(MetricError::EmptyCorpus(corpus.root().to_path_buf()))
}

/// Attention distance per (layer, head) over a corpus.
pub fn corpus_attention_distance(corpus: &CorpusHandle, opts: &RunOptions) -> Result<HeadLayerMatrix> {
    let m = analyze_corpus(corpus, MetricSet::Distance, opts)?;
    Ok(m.distance.expect("distance requested"))
}

/// Token-mean attention entropy per (layer, head) over a corpus.
pub fn corpus_attention_entropy(corpus: &CorpusHandle, opts: &RunOptions) -> Result<HeadLayerMatrix> {
    let m = analyze_corpus(corpus, MetricSet::Entropy, opts)?;
    Ok(m.entropy.expect("entropy requested"))
}

fn analyze_samples(samples: &[AttentionSample], set: MetricSet, first: FirstToken) -> Result<CorpusMetrics> {
    let grid = &samples
        .first()
        .ok_or_else(|| MetricError::EmptyCorpus(PathBuf::from("<memory>")))?
        .header;
    let mut total = SampleAcc::new(grid.n_blocks(), set);
    for s in samples {
        if !same_grid(&s.header, grid) {
            return Err(MetricError::GridMismatch {
                path: PathBuf::from(&s.header.sample_id),
            });
        }
        total.merge(&accumulate_sample(s, set, first)?);
    }
    total.finish(&grid.layer_indices, &grid.head_indices, samples.len(), Vec::new())
}

/// Attention distance over in-memory samples. Same summation order as the
/// streamed corpus pass.
pub fn samples_attention_distance(samples: &[AttentionSample]) -> Result<HeadLayerMatrix> {
    Ok(analyze_samples(samples, MetricSet::Distance, FirstToken::Keep)?
        .distance
        .expect("distance requested"))
}

pub fn samples_attention_entropy(samples: &[AttentionSample], first: FirstToken) -> Result<HeadLayerMatrix> {
    Ok(analyze_samples(samples, MetricSet::Entropy, first)?
        .entropy
        .expect("entropy requested"))
}

/// Mean row entropy at each token position over the given heads of one layer.
/// Used for token highlight pages.
pub fn token_entropies(sample: &AttentionSample, layer: usize, heads: &[usize]) -> Result<Vec<f64>> {
    let n = sample.header.seq_len;
    let mut sums = vec![0.0; n];
    for &h in heads {
        let block = sample.block(layer, h)?;
        for (i, row) in block.rows().enumerate() {
            sums[i] += row_entropy(row, FirstToken::Keep)?.unwrap_or(0.0);
        }
    }
    let k = heads.len().max(1) as f64;
    Ok(sums.into_iter().map(|s| s / k).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{write_attention_sample, AttentionDumpHeader};

    fn sample_from_rows(rows: &[&[f32]]) -> AttentionSample {
        let header = AttentionDumpHeader::full("s", "web", "toy", 1, 1, rows.len());
        AttentionSample::from_fn(header, |_, _, i| rows[i].to_vec()).unwrap()
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn entropy_examples() {
        let one_hot = [0.0f64, 0.0, 1.0];
        assert_eq!(row_entropy(&one_hot, FirstToken::Keep).unwrap(), Some(0.0));
        let uniform = [0.5f64, 0.5];
        let h = row_entropy(&uniform, FirstToken::Keep).unwrap().unwrap();
        assert!((h - 0.693147).abs() < 1e-6);
        assert!((h - 2f64.ln()).abs() < 1e-15);
        let r = [0.25f64, 0.25, 0.5];
        let h = row_entropy(&r, FirstToken::Keep).unwrap().unwrap();
        assert!((h - 1.039721).abs() < 1e-6);
        let h = row_entropy(&r, FirstToken::Exclude).unwrap().unwrap();
        assert!((h - 0.693147).abs() < 1e-6);
    }

    #[test]
    fn entropy_first_token_modes() {
        assert_eq!(row_entropy(&[1.0f32], FirstToken::Keep).unwrap(), Some(0.0));
        assert_eq!(row_entropy(&[1.0f32], FirstToken::Exclude).unwrap(), None);
        assert_eq!(row_entropy(&[1.0f32], FirstToken::ExcludeRenormalized).unwrap(), None);
        // {0.5, 0.25, 0.25}: renormalized tail is {0.5, 0.5}
        let h = row_entropy(&[0.5f64, 0.25, 0.25], FirstToken::ExcludeRenormalized)
            .unwrap()
            .unwrap();
        assert!((h - 2f64.ln()).abs() < 1e-15);
        let h = row_entropy(&[1.0f64, 0.0], FirstToken::ExcludeRenormalized).unwrap();
        assert_eq!(h, Some(0.0));
    }

    #[test]
    fn entropy_rejects_negative() {
        assert!(matches!(
            row_entropy(&[0.5f64, -0.1, 0.6], FirstToken::Keep),
            Err(MetricError::NegativeEntry { position: 1, .. })
        ));
    }

    #[test]
    fn distance_term_examples() {
        let identity = sample_from_rows(&[&[1.0], &[0.0, 1.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0, 1.0]]);
        let t = sample_distance_terms(&identity, 0, 0).unwrap();
        assert_eq!(t, DistanceTerms { numerator: 0.0, denominator: 4.0 });

        let first = sample_from_rows(&[&[1.0], &[1.0, 0.0], &[1.0, 0.0, 0.0]]);
        let t = sample_distance_terms(&first, 0, 0).unwrap();
        assert_eq!(t, DistanceTerms { numerator: 3.0, denominator: 3.0 });

        let mixed = sample_from_rows(&[&[1.0], &[0.5, 0.5], &[0.25, 0.25, 0.5]]);
        let t = sample_distance_terms(&mixed, 0, 0).unwrap();
        assert_eq!(t, DistanceTerms { numerator: 1.25, denominator: 3.0 });
        assert!(sample_distance_terms(&mixed, 0, 1).is_err());

        let d = samples_attention_distance(std::slice::from_ref(&mixed)).unwrap();
        assert!((d.get(0, 0) - 0.416667).abs() < 1e-6);
        let d2 = samples_attention_distance(&[mixed.clone(), mixed]).unwrap();
        assert_eq!(d.get(0, 0), d2.get(0, 0));
    }

    #[test]
    fn entropy_corpus_examples() {
        let uniform = sample_from_rows(&[&[1.0], &[0.5, 0.5], &[1.0 / 3.0; 3], &[0.25; 4]]);
        let e = samples_attention_entropy(&[uniform], FirstToken::Keep).unwrap();
        // mean of {0, ln2, ln3, ln4}
        assert!((e.get(0, 0) - 0.794513).abs() < 1e-6);
        assert!((e.get(0, 0) - 24f64.ln() / 4.0).abs() < 1e-7);

        let one_hot = sample_from_rows(&[&[1.0], &[0.0, 1.0], &[1.0, 0.0, 0.0]]);
        let e = samples_attention_entropy(&[one_hot.clone(), one_hot], FirstToken::Keep).unwrap();
        assert_eq!(e.values(), &[0.0]);
    }

    #[test]
    fn zero_mass_block_is_an_error() {
        let zeros = sample_from_rows(&[&[0.0], &[0.0, 0.0]]);
        assert!(matches!(
            samples_attention_distance(&[zeros]),
            Err(MetricError::ZeroDenominator { layer: 0, head: 0 })
        ));
        let single = sample_from_rows(&[&[1.0]]);
        assert!(matches!(
            samples_attention_entropy(&[single], FirstToken::Exclude),
            Err(MetricError::NoTokens { .. })
        ));
    }

    #[test]
    fn marginals_and_mean() {
        let m = HeadLayerMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]], MetricKind::Distance).unwrap();
        assert_eq!(m.overall_mean(), 2.5);
        assert_eq!(m.marginal_by_layer(), vec![1.5, 3.5]);
        assert_eq!(m.marginal_by_head(), vec![2.0, 3.0]);
        let c = HeadLayerMatrix::from_rows(&vec![vec![0.7; 3]; 4], MetricKind::Entropy).unwrap();
        assert!((c.overall_mean() - 0.7).abs() < 1e-15);
        assert!(HeadLayerMatrix::from_rows(&[vec![-1.0]], MetricKind::Entropy).is_err());
        assert!(HeadLayerMatrix::from_rows(&[vec![-1.0]], MetricKind::DeltaDistance).is_ok());
        assert_eq!(m.value_at(1, 0), Some(3.0));
        assert_eq!(m.value_at(2, 0), None);
    }

    #[test]
    fn corpus_policies() {
        let dir = tempfile::tempdir().unwrap();
        let good = sample_from_rows(&[&[1.0], &[0.5, 0.5], &[0.25, 0.25, 0.5]]);
        let bad = sample_from_rows(&[&[1.0], &[0.45, 0.45], &[0.25, 0.25, 0.5]]);
        write_attention_sample(dir.path().join("a.atns"), &good).unwrap();
        write_attention_sample(dir.path().join("b.atns"), &bad).unwrap();
        let corpus = CorpusHandle::new(dir.path());

        let err = corpus_attention_distance(&corpus, &RunOptions::default()).unwrap_err();
        assert!(matches!(err, MetricError::InvalidSample { .. }));

        let opts = RunOptions {
            on_invalid: InvalidPolicy::SkipWithWarning,
            ..Default::default()
        };
        let m = analyze_corpus(&corpus, MetricSet::Both, &opts).unwrap();
        assert_eq!(m.samples_used, 1);
        assert_eq!(m.skipped.len(), 1);
        assert!((m.distance.unwrap().get(0, 0) - 1.25 / 3.0).abs() < 1e-15);

        let mut other = AttentionDumpHeader::full("o", "web", "toy", 2, 1, 1);
        other.layer_indices = vec![1];
        let other = AttentionSample::new(other, vec![1.0]).unwrap();
        write_attention_sample(dir.path().join("c.atns"), &other).unwrap();
        // file listing is cached per handle
        let corpus = CorpusHandle::new(dir.path());
        assert!(matches!(
            analyze_corpus(&corpus, MetricSet::Both, &opts),
            Err(MetricError::GridMismatch { .. })
        ));

        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(
            corpus_attention_distance(&CorpusHandle::new(empty.path()), &opts),
            Err(MetricError::EmptyCorpus(_))
        ));
    }

    #[test]
    fn token_entropy_profile() {
        let s = sample_from_rows(&[&[1.0], &[0.5, 0.5], &[0.25, 0.25, 0.5]]);
        let t = token_entropies(&s, 0, &[0]).unwrap();
        assert_eq!(t[0], 0.0);
        assert!((t[1] - 2f64.ln()).abs() < 1e-15);
        assert!((t[2] - 1.039721).abs() < 1e-6);
    }
}
