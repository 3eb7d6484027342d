// SPDX-License-Identifier: MIT OR Apache-2.0

//! Token interdependency graphs and the Interdependency Factor.
//!
//! A domain graph has one node per token position (the first `n` of every
//! sample). The weight of edge `i → j` is the attention from position `i` to
//! position `j` at one layer, averaged over heads and then over samples.
//! Self-attention is zeroed when the graph is built.
//!
//! The Interdependency Factor (IF) is the mean weight over all ordered pairs
//! of distinct nodes:
//!
//! ```text
//! IF = Σ_{i≠j} a_ij / (N² − N)
//! ```

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::layer::LayerSelect;
use crate::metrics::{InvalidPolicy, RunOptions, SkippedSample};
use crate::store::{AttentionReader, CorpusHandle, StoreError, TriangularBlock, ValidationReport};

#[derive(Debug, Error)]
pub enum InterdepError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("graph needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("adjacency has {len} entries, expected {n}x{n}")]
    Shape { n: usize, len: usize },
    #[error("adjacency entry ({i}, {j}) = {value} is not a valid weight")]
    BadWeight { i: usize, j: usize, value: f64 },
    #[error("binary adjacency entry ({i}, {j}) = {value} is not 0 or 1")]
    NotBinary { i: usize, j: usize, value: f64 },
    #[error("{path}: layer {layer} not present in dump")]
    LayerMissing { path: PathBuf, layer: usize },
    #[error("no sample in {root} has at least {n} tokens ({excluded} too short)")]
    NoLongSample {
        root: PathBuf,
        n: usize,
        excluded: usize,
    },
    #[error("{path}: invalid attention block at layer {layer}")]
    InvalidSample { path: PathBuf, layer: usize },
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

pub type Result<T, E = InterdepError> = std::result::Result<T, E>;

/// Square weight matrix, row `i` holding the edges leaving node `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Adjacency {
    n: usize,
    weights: Vec<f64>,
}

impl Adjacency {
    pub fn new(n: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n * n {
            return Err(InterdepError::Shape {
                n,
                len: weights.len(),
            });
        }
        for (k, &value) in weights.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(InterdepError::BadWeight {
                    i: k / n.max(1),
                    j: k % n.max(1),
                    value,
                });
            }
        }
        Ok(Self { n, weights })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(InterdepError::Shape { n, len: r.len() * n });
        }
        Self::new(n, rows.concat())
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            weights: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            weights: self.weights.iter().map(|w| w * c).collect(),
        }
    }

    /// Off-diagonal nonzero edges as `(i, j, weight)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.weights.iter().enumerate().filter_map(move |(k, &w)| {
            let (i, j) = (k / self.n, k % self.n);
            (i != j && w != 0.0).then_some((i, j, w))
        })
    }

    fn off_diagonal_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, w)| w)
                    .sum::<f64>()
            })
            .sum()
    }
}

/// Mean weight over ordered pairs of distinct nodes.
pub fn interdependency_factor(a: &Adjacency) -> Result<f64> {
    let n = a.n();
    if n < 2 {
        return Err(InterdepError::TooFewNodes(n));
    }
    Ok(a.off_diagonal_sum() / (n * n - n) as f64)
}

/// IF of a 0/1 dependency graph, i.e. its edge density.
pub fn binary_if(a: &Adjacency) -> Result<f64> {
    for i in 0..a.n() {
        for (j, &value) in a.row(i).iter().enumerate() {
            if value != 0.0 && value != 1.0 {
                return Err(InterdepError::NotBinary { i, j, value });
            }
        }
    }
    interdependency_factor(a)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenWeightProfile {
    /// Outgoing off-diagonal weight per position, divided by the largest.
    pub weights: Vec<f64>,
    /// Mean raw outgoing weight divided by the largest.
    pub mean_weight: f64,
}

/// Aggregate outgoing weight per token position, normalized to a maximum of 1.
pub fn token_weights(a: &Adjacency) -> TokenWeightProfile {
    let raw: Vec<f64> = (0..a.n())
        .map(|i| {
            a.row(i)
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, w)| w)
                .sum()
        })
        .collect();
    let max = raw.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return TokenWeightProfile {
            weights: vec![0.0; raw.len()],
            mean_weight: 0.0,
        };
    }
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    TokenWeightProfile {
        weights: raw.iter().map(|r| r / max).collect(),
        mean_weight: mean / max,
    }
}

/// How per-sample, per-head attention is combined into edge weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Mean over heads, then over samples.
    #[default]
    Mean,
    /// Plain sum over heads and samples, without normalization.
    Sum,
}

#[derive(Debug, Clone, Serialize)]
pub struct InterdepGraph {
    pub adjacency: Adjacency,
    pub source_layer: usize,
    pub sample_count: usize,
    /// Samples shorter than the node count, left out of the average.
    pub excluded_short: usize,
    pub skipped: Vec<SkippedSample>,
    pub weight_mode: WeightMode,
}

impl InterdepGraph {
    pub fn n_nodes(&self) -> usize {
        self.adjacency.n()
    }

    pub fn interdependency_factor(&self) -> Result<f64> {
        interdependency_factor(&self.adjacency)
    }

    pub fn token_weights(&self) -> TokenWeightProfile {
        token_weights(&self.adjacency)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphOptions {
    pub layer: LayerSelect,
    /// Node count: the leading tokens kept from each sample.
    pub n: usize,
    pub weight_mode: WeightMode,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            layer: LayerSelect::Middle,
            n: 512,
            weight_mode: WeightMode::Mean,
        }
    }
}

enum SampleGraph {
    /// Off-diagonal attention summed over heads, the head count and the
    /// resolved layer.
    Used(Vec<f64>, usize, usize),
    Short,
    Rejected(InterdepError),
}

fn sample_graph(reader: &AttentionReader, layer: LayerSelect, n: usize) -> Result<SampleGraph> {
    let header = reader.header();
    let layer = layer.resolve(header.n_layers);
    if header.layer_indices.binary_search(&layer).is_err() {
        return Err(InterdepError::LayerMissing {
            path: reader.path().to_path_buf(),
            layer,
        });
    }
    if header.seq_len < n {
        return Ok(SampleGraph::Short);
    }
    let mut sum = vec![0.0; n * n];
    let mut report = ValidationReport::new(&header.sample_id, header.seq_len);
    for &head in &header.head_indices {
        let data = reader.read_block_raw(layer, head)?;
        let block = TriangularBlock::new(header.seq_len, &data)?;
        report.check_block(block);
        if !report.is_valid() {
            return Ok(SampleGraph::Rejected(InterdepError::InvalidSample {
                path: reader.path().to_path_buf(),
                layer,
            }));
        }
        // attention among the first n tokens of a causal model does not
        // depend on later tokens, so truncation is exact
        for i in 1..n {
            for (j, &a) in block.row(i)[..i].iter().enumerate() {
                sum[i * n + j] += a as f64;
            }
        }
    }
    Ok(SampleGraph::Used(sum, header.head_indices.len(), layer))
}

/// Builds the domain-level token graph from one layer of every sample.
pub fn build_domain_graph(
    corpus: &CorpusHandle,
    graph: &GraphOptions,
    opts: &RunOptions,
) -> Result<InterdepGraph> {
    let n = graph.n;
    if n < 2 {
        return Err(InterdepError::TooFewNodes(n));
    }
    let files = corpus.files()?;
    let per_file = |path: &PathBuf| -> Result<SampleGraph> {
        match corpus.open(path) {
            Ok(reader) => sample_graph(&reader, graph.layer, n),
            Err(e) => Ok(SampleGraph::Rejected(e.into())),
        }
    };

    // Per-sample means over heads, summed over samples.
    let mut total = vec![0.0; n * n];
    let mut used = 0usize;
    let mut excluded_short = 0usize;
    let mut skipped = Vec::new();
    let mut resolved_layer = None;
    let mut absorb = |path: &PathBuf, outcome: SampleGraph| -> Result<()> {
        match outcome {
            SampleGraph::Used(sum, heads, layer) => {
                resolved_layer.get_or_insert(layer);
                let scale = match graph.weight_mode {
                    WeightMode::Mean => 1.0 / heads as f64,
                    WeightMode::Sum => 1.0,
                };
                for (t, s) in total.iter_mut().zip(&sum) {
                    *t += s * scale;
                }
                used += 1;
            }
            SampleGraph::Short => excluded_short += 1,
            SampleGraph::Rejected(err) => match opts.on_invalid {
                InvalidPolicy::Abort => return Err(err),
                InvalidPolicy::SkipWithWarning => {
                    log::warn!("skipping {}: {err}", path.display());
                    skipped.push(SkippedSample {
                        path: path.clone(),
                        reason: err.to_string(),
                    });
                }
            },
        }
        Ok(())
    };

    if opts.workers <= 1 {
        for path in files {
            absorb(path, per_file(path)?)?;
        }
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| InterdepError::Pool(e.to_string()))?;
        for chunk in files.chunks(opts.workers * 2) {
            let outcomes: Vec<Result<SampleGraph>> =
                pool.install(|| chunk.par_iter().map(per_file).collect());
            for (path, outcome) in chunk.iter().zip(outcomes) {
                absorb(path, outcome?)?;
            }
        }
    }

    if used == 0 {
        return Err(InterdepError::NoLongSample {
            root: corpus.root().to_path_buf(),
            n,
            excluded: excluded_short,
        });
    }
    if graph.weight_mode == WeightMode::Mean {
        let k = used as f64;
        total.iter_mut().for_each(|t| *t /= k);
    }
    if excluded_short > 0 {
        log::info!("{excluded_short} samples shorter than {n} tokens excluded");
    }
    Ok(InterdepGraph {
        adjacency: Adjacency::new(n, total)?,
        source_layer: resolved_layer.unwrap_or_default(),
        sample_count: used,
        excluded_short,
        skipped,
        weight_mode: graph.weight_mode,
    })
}
