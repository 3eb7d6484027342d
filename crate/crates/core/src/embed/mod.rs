// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-sample hidden-state embeddings and their 2-D projection.
//!
//! Hidden states are mean-pooled over tokens into one vector per sample,
//! reduced with PCA, then laid out with t-SNE.

mod pca;
mod quadtree;
mod tsne;

pub use pca::{pca_reduce, Pca};
pub use tsne::{
    joint_affinities, kl_objective, tsne, tsne_with_init, Affinities, GradientMethod, Init,
    Projection2D, TsneConfig,
};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::store::HiddenStateSample;

#[derive(Debug, Error, PartialEq)]
pub enum EmbedError {
    #[error("k = {k} is out of range 1..={max}")]
    ComponentsOutOfRange { k: usize, max: usize },
    #[error("need more than {needed} samples for perplexity {perplexity}, got {n}")]
    TooFewSamples {
        n: usize,
        needed: usize,
        perplexity: f64,
    },
    #[error("embedding contains non-finite values")]
    NonFinite,
    #[error("all points coincide; affinities cannot reach the target perplexity")]
    Degenerate,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("inconsistent embedding set: {0}")]
    Shape(String),
}

pub type Result<T, E = EmbedError> = std::result::Result<T, E>;

/// Pooled vectors for a set of labelled samples taken from one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    /// `n_samples × d`
    pub vectors: DMatrix<f64>,
    pub labels: Vec<String>,
    pub sample_ids: Vec<String>,
    pub source_layer: usize,
}

impl EmbeddingSet {
    pub fn new(vectors: DMatrix<f64>, labels: Vec<String>, source_layer: usize) -> Result<Self> {
        let ids = (0..labels.len()).map(|i| i.to_string()).collect();
        Self::with_ids(vectors, labels, ids, source_layer)
    }

    pub fn with_ids(
        vectors: DMatrix<f64>,
        labels: Vec<String>,
        sample_ids: Vec<String>,
        source_layer: usize,
    ) -> Result<Self> {
        if vectors.nrows() < 4 {
            return Err(EmbedError::Shape(format!(
                "at least 4 samples required, got {}",
                vectors.nrows()
            )));
        }
        if labels.len() != vectors.nrows() || sample_ids.len() != vectors.nrows() {
            return Err(EmbedError::Shape("one label and id per row required".into()));
        }
        if labels.iter().any(|l| l.is_empty()) {
            return Err(EmbedError::Shape("empty label".into()));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        Ok(Self {
            vectors,
            labels,
            sample_ids,
            source_layer,
        })
    }

    /// Pools each sample and stacks the results. All samples must come from
    /// the same layer and share `d_model`.
    pub fn from_hidden(samples: &[HiddenStateSample]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| EmbedError::Shape("no samples".into()))?;
        let (layer, d) = (first.header.layer, first.header.d_model);
        let mut data = Vec::with_capacity(samples.len() * d);
        for s in samples {
            if s.header.layer != layer || s.header.d_model != d {
                return Err(EmbedError::Shape(format!(
                    "sample {} is layer {} with d_model {}, expected layer {layer} with {d}",
                    s.header.sample_id, s.header.layer, s.header.d_model
                )));
            }
            data.extend(pool_hidden_states(s));
        }
        let vectors = DMatrix::from_row_slice(samples.len(), d, &data);
        Self::with_ids(
            vectors,
            samples.iter().map(|s| s.header.domain.clone()).collect(),
            samples.iter().map(|s| s.header.sample_id.clone()).collect(),
            layer,
        )
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }
}

/// Unweighted mean of a sample's token vectors.
pub fn pool_hidden_states(h: &HiddenStateSample) -> Vec<f64> {
    let d = h.header.d_model;
    let mut acc = vec![0.0f64; d];
    for t in 0..h.header.seq_len {
        for (a, &v) in acc.iter_mut().zip(h.token(t)) {
            *a += v as f64;
        }
    }
    let n = h.header.seq_len as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}
