// SPDX-License-Identifier: MIT OR Apache-2.0

//! Attention distance differences between two domain corpora.
//!
//! Sign convention: `delta = D(target) − D(baseline)`. A positive cell means
//! the target domain's attention spans longer token gaps than the
//! baseline's in that (layer, head). Web text is the usual baseline.

use serde::Serialize;

use crate::metrics::{
    corpus_attention_distance, HeadLayerMatrix, MetricError, MetricKind, Result, RunOptions,
};
use crate::store::CorpusHandle;

/// Cell-wise `target − baseline` of two distance grids.
pub fn distance_difference(baseline: &HeadLayerMatrix, target: &HeadLayerMatrix) -> Result<HeadLayerMatrix> {
    for (name, m) in [("baseline", baseline), ("target", target)] {
        if m.metric() != MetricKind::Distance {
            return Err(MetricError::Shape(format!(
                "{name} grid is {}, expected distance",
                m.metric().name()
            )));
        }
    }
    if !baseline.same_shape(target) {
        return Err(MetricError::Shape(
            "baseline and target have different layer/head index sets".into(),
        ));
    }
    let values = target
        .values()
        .iter()
        .zip(baseline.values())
        .map(|(t, b)| t - b)
        .collect();
    Ok(baseline.with_values(values, MetricKind::DeltaDistance))
}

#[derive(Debug, Clone, Serialize)]
pub struct DomainComparison {
    pub baseline_tag: String,
    pub target_tag: String,
    pub baseline: HeadLayerMatrix,
    pub target: HeadLayerMatrix,
    pub delta_grid: HeadLayerMatrix,
    pub by_layer: Vec<f64>,
    pub by_head: Vec<f64>,
    pub overall_delta: f64,
}

impl DomainComparison {
    pub fn from_grids(
        baseline_tag: impl Into<String>,
        target_tag: impl Into<String>,
        baseline: HeadLayerMatrix,
        target: HeadLayerMatrix,
    ) -> Result<Self> {
        let delta_grid = distance_difference(&baseline, &target)?;
        Ok(Self {
            baseline_tag: baseline_tag.into(),
            target_tag: target_tag.into(),
            by_layer: delta_grid.marginal_by_layer(),
            by_head: delta_grid.marginal_by_head(),
            overall_delta: delta_grid.overall_mean(),
            baseline,
            target,
            delta_grid,
        })
    }

    /// `"target - baseline"`, for output headers.
    pub fn operand_label(&self) -> String {
        format!("{} - {}", self.target_tag, self.baseline_tag)
    }
}

fn corpus_tag(c: &CorpusHandle) -> Result<String> {
    if let Some(d) = c.domain() {
        return Ok(d.to_string());
    }
    Ok(c.first_header()?
        .map(|h| h.domain)
        .unwrap_or_else(|| c.root().display().to_string()))
}

/// Runs both corpus passes (concurrently when `opts.workers > 1`) and
/// differences the results.
pub fn compare_corpora(
    baseline: &CorpusHandle,
    target: &CorpusHandle,
    opts: &RunOptions,
) -> Result<DomainComparison> {
    let (b, t) = if opts.workers > 1 {
        rayon::join(
            || corpus_attention_distance(baseline, opts),
            || corpus_attention_distance(target, opts),
        )
    } else {
        (
            corpus_attention_distance(baseline, opts),
            corpus_attention_distance(target, opts),
        )
    };
    DomainComparison::from_grids(corpus_tag(baseline)?, corpus_tag(target)?, b?, t?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(v: f64) -> HeadLayerMatrix {
        HeadLayerMatrix::from_rows(&vec![vec![v; 3]; 2], MetricKind::Distance).unwrap()
    }

    #[test]
    fn self_comparison_is_zero() {
        let a = HeadLayerMatrix::from_rows(&[vec![1.0, 2.5], vec![0.3, 7.0]], MetricKind::Distance).unwrap();
        let d = distance_difference(&a, &a).unwrap();
        assert!(d.values().iter().all(|v| *v == 0.0));
        assert_eq!(d.metric(), MetricKind::DeltaDistance);
    }

    #[test]
    fn constant_offset() {
        let d = distance_difference(&grid(2.0), &grid(5.0)).unwrap();
        assert!(d.values().iter().all(|v| *v == 3.0));
        let cmp = DomainComparison::from_grids("web", "conv", grid(2.0), grid(5.0)).unwrap();
        assert_eq!(cmp.overall_delta, 3.0);
        assert_eq!(cmp.by_layer, vec![3.0, 3.0]);
        assert_eq!(cmp.by_head, vec![3.0, 3.0, 3.0]);
        assert_eq!(cmp.operand_label(), "conv - web");
    }

    #[test]
    fn mismatches_are_rejected() {
        let small = HeadLayerMatrix::from_rows(&[vec![1.0]], MetricKind::Distance).unwrap();
        assert!(distance_difference(&small, &grid(1.0)).is_err());
        let ent = HeadLayerMatrix::from_rows(&vec![vec![1.0; 3]; 2], MetricKind::Entropy).unwrap();
        assert!(distance_difference(&ent, &grid(1.0)).is_err());
    }
}
