// SPDX-License-Identifier: MIT OR Apache-2.0

//! Attention profiling for causal transformers.
//!
//! Reads per-sample attention dumps (ATNS) and hidden-state dumps (HDNS)
//! and computes attention distance and entropy per layer and head,
//! cross-domain distance differences, token interdependency graphs, 2-D
//! projections of pooled hidden states, and mixture-scaled proportion
//! bounds. The [`csvio`] and [`report`] modules write the results as CSV,
//! SVG and HTML.

pub mod compare;
pub mod csvio;
pub mod embed;
pub mod interdep;
pub mod layer;
pub mod metrics;
pub mod mixture;
pub mod report;
pub mod store;

pub use compare::{compare_corpora, distance_difference, DomainComparison};
pub use interdep::{
    build_domain_graph, interdependency_factor, token_weights, Adjacency, GraphOptions,
    InterdepGraph, WeightMode,
};
pub use layer::LayerSelect;
pub use metrics::{
    analyze_corpus, corpus_attention_distance, corpus_attention_entropy, row_entropy,
    FirstToken, HeadLayerMatrix, InvalidPolicy, MetricKind, MetricSet, RunOptions,
};
pub use store::{
    read_attention_sample, read_hidden_sample, validate_sample, write_attention_sample,
    write_hidden_sample, AttentionDumpHeader, AttentionReader, AttentionSample, CorpusHandle,
    HiddenStateHeader, HiddenStateSample, ValidationReport,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/storage.md")]
    mod storage {}
    #[doc = include_str!("../../../book/src/distance.md")]
    mod distance {}
    #[doc = include_str!("../../../book/src/entropy.md")]
    mod entropy {}
    #[doc = include_str!("../../../book/src/comparison.md")]
    mod comparison {}
    #[doc = include_str!("../../../book/src/interdependency.md")]
    mod interdependency {}
    #[doc = include_str!("../../../book/src/embeddings.md")]
    mod embeddings {}
    #[doc = include_str!("../../../book/src/mixture.md")]
    mod mixture {}
    #[doc = include_str!("../../../book/src/reports.md")]
    mod reports {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
