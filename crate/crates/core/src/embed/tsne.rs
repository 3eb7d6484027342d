// SPDX-License-Identifier: MIT OR Apache-2.0

//! t-SNE with an exact gradient (default) or a Barnes-Hut approximation.
//!
//! Input affinities are Gaussian conditionals whose per-point bandwidth is
//! found by bisection so that each row's perplexity matches the target,
//! symmetrized as `p_ij = (p_j|i + p_i|j) / 2n`. The output kernel is a
//! Student-t with one degree of freedom. Optimization is gradient descent
//! with momentum and per-coordinate gains; the first
//! `exaggeration_iterations` steps multiply P by `early_exaggeration`.
//!
//! Per-point gradient terms are computed independently (in parallel) and
//! reduced in index order, so results do not depend on the thread count.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use super::quadtree::QuadTree;
use super::{EmbedError, EmbeddingSet, Pca, Result};

const ENTROPY_TOLERANCE: f64 = 1e-5;
const MAX_BISECTION_STEPS: usize = 50;
const KL_CHECKPOINT_EVERY: usize = 50;
const INIT_STD: f64 = 1e-4;
const MIN_GAIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Init {
    /// First two principal components, scaled to standard deviation 1e-4.
    Pca,
    /// Isotropic Gaussian with standard deviation 1e-4 drawn from the seed.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GradientMethod {
    Exact,
    /// Sparse k-NN input affinities and quadtree-summarized repulsion.
    BarnesHut { theta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TsneConfig {
    /// Target perplexity; lowered to just under `(n − 1) / 3` for small sets.
    pub perplexity: f64,
    pub iterations: usize,
    /// Step size; lowered to `n / early_exaggeration` for small sets.
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    /// Dimensions kept by PCA before affinities are computed.
    pub pca_dims: usize,
    pub seed: u64,
    pub init: Init,
    pub gradient: GradientMethod,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            pca_dims: 50,
            seed: 0,
            init: Init::Pca,
            gradient: GradientMethod::Exact,
        }
    }
}

impl TsneConfig {
    fn check(&self) -> Result<()> {
        if self.perplexity.is_nan() || self.perplexity < 2.0 {
            return Err(EmbedError::Config(format!(
                "perplexity must be at least 2, got {}",
                self.perplexity
            )));
        }
        if self.iterations < 250 {
            return Err(EmbedError::Config(format!(
                "at least 250 iterations required, got {}",
                self.iterations
            )));
        }
        if self.learning_rate.is_nan()
            || self.learning_rate <= 0.0
            || self.early_exaggeration.is_nan()
            || self.early_exaggeration < 1.0
        {
            return Err(EmbedError::Config(
                "learning rate must be positive and exaggeration at least 1".into(),
            ));
        }
        if let GradientMethod::BarnesHut { theta } = self.gradient {
            if !(0.0..=1.0).contains(&theta) {
                return Err(EmbedError::Config(format!("theta {theta} outside [0, 1]")));
            }
        }
        if self.pca_dims == 0 {
            return Err(EmbedError::Config("pca_dims must be positive".into()));
        }
        Ok(())
    }

    /// Step size actually used for `n` points. Larger steps make the
    /// exaggerated phase overshoot and the objective oscillate.
    pub fn effective_learning_rate(&self, n: usize) -> f64 {
        self.learning_rate.min(n as f64 / self.early_exaggeration)
    }

    /// Perplexity actually used for `n` points.
    pub fn effective_perplexity(&self, n: usize) -> Result<f64> {
        let limit = n.saturating_sub(1) as f64 / 3.0;
        let p = if self.perplexity < limit {
            self.perplexity
        } else {
            limit * (1.0 - 1e-6)
        };
        if p < 2.0 {
            return Err(EmbedError::TooFewSamples {
                n,
                needed: 7,
                perplexity: self.perplexity,
            });
        }
        Ok(p)
    }
}

/// Symmetric joint input affinities.
#[derive(Debug, Clone, PartialEq)]
pub enum Affinities {
    Dense { n: usize, p: Vec<f64> },
    /// Compressed rows.
    Sparse {
        n: usize,
        row_ptr: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<f64>,
    },
}

impl Affinities {
    pub fn n(&self) -> usize {
        match self {
            Affinities::Dense { n, .. } | Affinities::Sparse { n, .. } => *n,
        }
    }

    /// Nonzero entries of row `i` as `(j, p_ij)`.
    pub fn row(&self, i: usize) -> Box<dyn Iterator<Item = (usize, f64)> + '_> {
        match self {
            Affinities::Dense { n, p } => Box::new(
                p[i * n..(i + 1) * n]
                    .iter()
                    .copied()
                    .enumerate()
                    .filter(|&(_, v)| v > 0.0),
            ),
            Affinities::Sparse {
                row_ptr,
                cols,
                vals,
                ..
            } => {
                let r = row_ptr[i]..row_ptr[i + 1];
                Box::new(cols[r.clone()].iter().copied().zip(vals[r].iter().copied()))
            }
        }
    }

    pub fn total(&self) -> f64 {
        (0..self.n()).map(|i| self.row(i).map(|(_, v)| v).sum::<f64>()).sum()
    }
}

/// Result of a t-SNE run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection2D {
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<String>,
    pub sample_ids: Vec<String>,
    pub final_kl: f64,
    /// `(iteration, KL)` every 50 iterations and at the end.
    pub kl_checkpoints: Vec<(usize, f64)>,
    pub perplexity: f64,
    pub learning_rate: f64,
    /// Points whose bandwidth search stopped before reaching tolerance.
    pub uncalibrated_points: usize,
}

fn squared_distances_row(x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    let n = x.nrows();
    let xi = x.row(i);
    (0..n)
        .map(|j| {
            if i == j {
                0.0
            } else {
                (xi - x.row(j)).norm_squared()
            }
        })
        .collect()
}

/// Bisection on the Gaussian precision for one point. `dist` excludes the
/// point itself. Returns the conditional probabilities and whether the
/// target entropy was met.
fn calibrate_row(dist: &[f64], log_perplexity: f64) -> (Vec<f64>, bool) {
    let min = dist.iter().cloned().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = dist.iter().map(|d| d - min).collect();
    let mean = shifted.iter().sum::<f64>() / shifted.len() as f64;
    let mut beta = if mean > 0.0 { 1.0 / mean } else { 1.0 };
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut probs = vec![0.0; dist.len()];
    let mut converged = false;
    for _ in 0..MAX_BISECTION_STEPS {
        let mut sum = 0.0;
        let mut weighted = 0.0;
        for (p, d) in probs.iter_mut().zip(&shifted) {
            *p = (-beta * d).exp();
            sum += *p;
            weighted += *p * d;
        }
        // H = ln Σ + β·E[d], entropy in nats of the normalized row
        let entropy = sum.ln() + beta * weighted / sum;
        probs.iter_mut().for_each(|p| *p /= sum);
        let diff = entropy - log_perplexity;
        if diff.abs() < ENTROPY_TOLERANCE {
            converged = true;
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    (probs, converged)
}

fn check_finite(x: &DMatrix<f64>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(EmbedError::NonFinite);
    }
    Ok(())
}

fn all_coincide(x: &DMatrix<f64>) -> bool {
    let first = x.row(0);
    x.row_iter().all(|r| r == first)
}

/// Dense joint affinities with per-point perplexity calibration.
/// Returns the affinities and the number of rows that did not converge.
pub fn joint_affinities(x: &DMatrix<f64>, perplexity: f64) -> Result<(Affinities, usize)> {
    check_finite(x)?;
    let n = x.nrows();
    if all_coincide(x) {
        return Err(EmbedError::Degenerate);
    }
    let log_perp = perplexity.ln();
    let rows: Vec<(Vec<f64>, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d = squared_distances_row(x, i);
            d.remove(i);
            let (mut p, ok) = calibrate_row(&d, log_perp);
            p.insert(i, 0.0);
            (p, ok)
        })
        .collect();
    let uncalibrated = rows.iter().filter(|(_, ok)| !ok).count();
    let mut p = vec![0.0; n * n];
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (rows[i].0[j] + rows[j].0[i]) * scale;
        }
    }
    Ok((Affinities::Dense { n, p }, uncalibrated))
}

/// Sparse joint affinities over the `⌊3·perplexity⌋` nearest neighbours.
fn sparse_affinities(x: &DMatrix<f64>, perplexity: f64) -> Result<(Affinities, usize)> {
    check_finite(x)?;
    let n = x.nrows();
    if all_coincide(x) {
        return Err(EmbedError::Degenerate);
    }
    let k = ((3.0 * perplexity).floor() as usize).clamp(1, n - 1);
    let log_perp = perplexity.ln();
    let rows: Vec<(Vec<usize>, Vec<f64>, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let d = squared_distances_row(x, i);
            let mut idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
            idx.truncate(k);
            let nd: Vec<f64> = idx.iter().map(|&j| d[j]).collect();
            let (p, ok) = calibrate_row(&nd, log_perp);
            (idx, p, ok)
        })
        .collect();
    let uncalibrated = rows.iter().filter(|r| !r.2).count();

    let mut triples: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * n * k);
    for (i, (idx, p, _)) in rows.iter().enumerate() {
        for (&j, &v) in idx.iter().zip(p) {
            triples.push((i, j, v));
            triples.push((j, i, v));
        }
    }
    triples.sort_by_key(|t| (t.0, t.1));
    let scale = 1.0 / (2.0 * n as f64);
    let mut row_ptr = vec![0usize; n + 1];
    let mut cols = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    for (i, j, v) in triples {
        if cols.len() > row_ptr[i] && cols.last() == Some(&j) {
            *vals.last_mut().unwrap() += v * scale;
        } else {
            cols.push(j);
            vals.push(v * scale);
        }
        row_ptr[i + 1] = cols.len();
    }
    for i in 0..n {
        row_ptr[i + 1] = row_ptr[i + 1].max(row_ptr[i]);
    }
    Ok((
        Affinities::Sparse {
            n,
            row_ptr,
            cols,
            vals,
        },
        uncalibrated,
    ))
}

#[inline]
fn kernel(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    1.0 / (1.0 + dx * dx + dy * dy)
}

/// Exact `Z = Σ_{i≠j} (1 + ‖y_i − y_j‖²)⁻¹`.
fn normalization(points: &[[f64; 2]]) -> f64 {
    let rows: Vec<f64> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &q)| kernel(points[i], q))
                .sum()
        })
        .collect();
    rows.iter().sum()
}

/// KL(P‖Q) in nats for a 2-D layout, with Q computed exactly.
pub fn kl_objective(p: &Affinities, points: &[[f64; 2]]) -> f64 {
    let z = normalization(points);
    kl_with_z(p, points, z)
}

fn kl_with_z(p: &Affinities, points: &[[f64; 2]], z: f64) -> f64 {
    let rows: Vec<f64> = (0..p.n())
        .into_par_iter()
        .map(|i| {
            p.row(i)
                .filter(|&(j, _)| j != i)
                .map(|(j, pij)| {
                    let q = (kernel(points[i], points[j]) / z).max(f64::MIN_POSITIVE);
                    pij * (pij / q).ln()
                })
                .sum()
        })
        .collect();
    rows.iter().sum()
}

fn exact_gradient(p: &Affinities, points: &[[f64; 2]], exaggeration: f64) -> (Vec<[f64; 2]>, f64) {
    let z = normalization(points);
    let n = points.len();
    let grad = (0..n)
        .into_par_iter()
        .map(|i| {
            let yi = points[i];
            let mut g = [0.0; 2];
            let mut attract = [0.0; 2];
            for (j, pij) in p.row(i) {
                if j == i {
                    continue;
                }
                let w = kernel(yi, points[j]);
                attract[0] += exaggeration * pij * w * (yi[0] - points[j][0]);
                attract[1] += exaggeration * pij * w * (yi[1] - points[j][1]);
            }
            let mut repulse = [0.0; 2];
            for (j, &yj) in points.iter().enumerate() {
                if j == i {
                    continue;
                }
                let w = kernel(yi, yj);
                repulse[0] += w * w * (yi[0] - yj[0]);
                repulse[1] += w * w * (yi[1] - yj[1]);
            }
            for k in 0..2 {
                g[k] = 4.0 * (attract[k] - repulse[k] / z);
            }
            g
        })
        .collect();
    (grad, z)
}

fn barnes_hut_gradient(
    p: &Affinities,
    points: &[[f64; 2]],
    exaggeration: f64,
    theta: f64,
) -> (Vec<[f64; 2]>, f64) {
    let tree = QuadTree::build(points);
    let n = points.len();
    let parts: Vec<([f64; 2], [f64; 2], f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let yi = points[i];
            let mut attract = [0.0; 2];
            for (j, pij) in p.row(i) {
                if j == i {
                    continue;
                }
                let w = kernel(yi, points[j]);
                attract[0] += exaggeration * pij * w * (yi[0] - points[j][0]);
                attract[1] += exaggeration * pij * w * (yi[1] - points[j][1]);
            }
            let (rep, zi) = tree.repulsion(i, theta);
            (attract, rep, zi)
        })
        .collect();
    let z: f64 = parts.iter().map(|p| p.2).sum();
    let grad = parts
        .iter()
        .map(|(a, r, _)| [4.0 * (a[0] - r[0] / z), 4.0 * (a[1] - r[1] / z)])
        .collect();
    (grad, z)
}

fn center(points: &mut [[f64; 2]]) {
    let n = points.len() as f64;
    let mut mean = [0.0; 2];
    for p in points.iter() {
        mean[0] += p[0];
        mean[1] += p[1];
    }
    mean[0] /= n;
    mean[1] /= n;
    for p in points.iter_mut() {
        p[0] -= mean[0];
        p[1] -= mean[1];
    }
}

fn preprocess(e: &EmbeddingSet, c: &TsneConfig) -> Result<DMatrix<f64>> {
    let (n, d) = e.vectors.shape();
    if d > c.pca_dims {
        let k = c.pca_dims.min(n);
        Ok(Pca::fit(&e.vectors, k)?.transform(&e.vectors))
    } else {
        Ok(e.vectors.clone())
    }
}

fn initial_layout(x: &DMatrix<f64>, c: &TsneConfig) -> Result<Vec<[f64; 2]>> {
    let n = x.nrows();
    match c.init {
        Init::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
            Ok((0..n)
                .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
                .collect())
        }
        Init::Pca => {
            let k = 2.min(x.ncols()).min(n);
            let scores = Pca::fit(x, k)?.transform(x);
            let col0 = scores.column(0);
            let mean = col0.mean();
            let std = (col0.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            let scale = if std > 0.0 { INIT_STD / std } else { 1.0 };
            Ok((0..n)
                .map(|i| {
                    let y = if k > 1 { scores[(i, 1)] } else { 0.0 };
                    [scores[(i, 0)] * scale, y * scale]
                })
                .collect())
        }
    }
}

/// Projects an embedding set to 2-D.
pub fn tsne(e: &EmbeddingSet, c: &TsneConfig) -> Result<Projection2D> {
    c.check()?;
    let x = preprocess(e, c)?;
    let init = initial_layout(&x, c)?;
    run(&x, e, c, init)
}

/// Same as [`tsne`] but starting from the given layout instead of `c.init`.
pub fn tsne_with_init(e: &EmbeddingSet, c: &TsneConfig, init: Vec<[f64; 2]>) -> Result<Projection2D> {
    c.check()?;
    if init.len() != e.len() {
        return Err(EmbedError::Shape(format!(
            "{} initial points for {} samples",
            init.len(),
            e.len()
        )));
    }
    let x = preprocess(e, c)?;
    run(&x, e, c, init)
}

fn run(x: &DMatrix<f64>, e: &EmbeddingSet, c: &TsneConfig, mut y: Vec<[f64; 2]>) -> Result<Projection2D> {
    let n = x.nrows();
    let perplexity = c.effective_perplexity(n)?;
    let learning_rate = c.effective_learning_rate(n);
    let (p, uncalibrated) = match c.gradient {
        GradientMethod::Exact => joint_affinities(x, perplexity)?,
        GradientMethod::BarnesHut { .. } => sparse_affinities(x, perplexity)?,
    };

    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut checkpoints = Vec::new();

    for iter in 0..c.iterations {
        let exaggerating = iter < c.exaggeration_iterations;
        let exaggeration = if exaggerating { c.early_exaggeration } else { 1.0 };
        let momentum = if exaggerating {
            c.initial_momentum
        } else {
            c.final_momentum
        };
        let (grad, _) = match c.gradient {
            GradientMethod::Exact => exact_gradient(&p, &y, exaggeration),
            GradientMethod::BarnesHut { theta } => barnes_hut_gradient(&p, &y, exaggeration, theta),
        };
        for i in 0..n {
            for k in 0..2 {
                let g = grad[i][k];
                let u = update[i][k];
                gains[i][k] = if (g > 0.0) != (u > 0.0) {
                    gains[i][k] + 0.2
                } else {
                    (gains[i][k] * 0.8).max(MIN_GAIN)
                };
                update[i][k] = momentum * u - learning_rate * gains[i][k] * g;
                y[i][k] += update[i][k];
            }
        }
        center(&mut y);
        let done = iter + 1;
        if done % KL_CHECKPOINT_EVERY == 0 && done != c.iterations {
            checkpoints.push((done, objective(&p, &y, c.gradient)));
        }
    }
    center(&mut y);
    let final_kl = objective(&p, &y, c.gradient);
    checkpoints.push((c.iterations, final_kl));
    if y.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(EmbedError::NonFinite);
    }
    Ok(Projection2D {
        points: y,
        labels: e.labels.clone(),
        sample_ids: e.sample_ids.clone(),
        final_kl,
        kl_checkpoints: checkpoints,
        perplexity,
        learning_rate,
        uncalibrated_points: uncalibrated,
    })
}

fn objective(p: &Affinities, y: &[[f64; 2]], method: GradientMethod) -> f64 {
    match method {
        GradientMethod::Exact => kl_objective(p, y),
        GradientMethod::BarnesHut { theta } => {
            let tree = QuadTree::build(y);
            let z: f64 = (0..y.len())
                .into_par_iter()
                .map(|i| tree.repulsion(i, theta).1)
                .collect::<Vec<_>>()
                .iter()
                .sum();
            kl_with_z(p, y, z)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_set(n_side: usize) -> EmbeddingSet {
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_side {
            for j in 0..n_side {
                data.extend([i as f64, j as f64, (i * j) as f64 * 0.1]);
                labels.push(if i < n_side / 2 { "a" } else { "b" }.to_string());
            }
        }
        EmbeddingSet::new(DMatrix::from_row_slice(n_side * n_side, 3, &data), labels, 0).unwrap()
    }

    #[test]
    fn calibration_hits_target_perplexity() {
        let e = grid_set(6);
        let (p, uncal) = joint_affinities(&e.vectors, 5.0).unwrap();
        assert_eq!(uncal, 0);
        assert!((p.total() - 1.0).abs() < 1e-12);
        // symmetric
        if let Affinities::Dense { n, p } = &p {
            for i in 0..*n {
                assert_eq!(p[i * n + i], 0.0);
                for j in 0..*n {
                    assert_eq!(p[i * n + j], p[j * n + i]);
                }
            }
        }
        let d = squared_distances_row(&e.vectors, 0)[1..].to_vec();
        let (row, ok) = calibrate_row(&d, 5f64.ln());
        assert!(ok);
        let h: f64 = -row.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>();
        assert!((h - 5f64.ln()).abs() < 1e-5);
    }

    #[test]
    fn sparse_affinities_are_symmetric_and_normalized() {
        let e = grid_set(6);
        let (p, _) = sparse_affinities(&e.vectors, 3.0).unwrap();
        assert!((p.total() - 1.0).abs() < 1e-12);
        let n = p.n();
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for (j, v) in p.row(i) {
                dense[i * n + j] = v;
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert!((dense[i * n + j] - dense[j * n + i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn kl_is_zero_when_q_matches_p() {
        // two points: p_12 = p_21 = 1/2, and q is always 1/2 as well
        let p = Affinities::Dense {
            n: 2,
            p: vec![0.0, 0.5, 0.5, 0.0],
        };
        assert!(kl_objective(&p, &[[0.0, 0.0], [3.0, 1.0]]).abs() < 1e-15);
    }

    #[test]
    fn exact_gradient_matches_finite_differences() {
        let e = grid_set(4);
        let (p, _) = joint_affinities(&e.vectors, 3.0).unwrap();
        let y: Vec<[f64; 2]> = (0..16)
            .map(|i| [((i * 7) % 5) as f64 * 0.3 - 0.6, ((i * 3) % 4) as f64 * 0.4 - 0.5])
            .collect();
        let (grad, _) = exact_gradient(&p, &y, 1.0);
        let h = 1e-6;
        for i in [0usize, 5, 11] {
            for k in 0..2 {
                let mut yp = y.clone();
                yp[i][k] += h;
                let mut ym = y.clone();
                ym[i][k] -= h;
                let fd = (kl_objective(&p, &yp) - kl_objective(&p, &ym)) / (2.0 * h);
                assert!((fd - grad[i][k]).abs() < 1e-6, "{fd} vs {}", grad[i][k]);
            }
        }
    }

    #[test]
    fn barnes_hut_theta_zero_matches_exact_gradient() {
        let e = grid_set(4);
        let (p, _) = joint_affinities(&e.vectors, 3.0).unwrap();
        let y: Vec<[f64; 2]> = (0..16)
            .map(|i| [(i as f64).sin() * 2.0, (i as f64 * 1.3).cos()])
            .collect();
        let (g1, z1) = exact_gradient(&p, &y, 4.0);
        let (g2, z2) = barnes_hut_gradient(&p, &y, 4.0, 0.0);
        assert!((z1 - z2).abs() < 1e-12);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        let same = EmbeddingSet::new(DMatrix::from_element(20, 3, 1.0), vec!["a".into(); 20], 0).unwrap();
        let c = TsneConfig {
            perplexity: 3.0,
            ..Default::default()
        };
        assert_eq!(tsne(&same, &c), Err(EmbedError::Degenerate));

        let tiny = EmbeddingSet::new(DMatrix::from_fn(6, 2, |i, j| (i + j * 3) as f64), vec!["a".into(); 6], 0).unwrap();
        assert!(matches!(tsne(&tiny, &c), Err(EmbedError::TooFewSamples { .. })));

        let bad = TsneConfig {
            iterations: 100,
            ..Default::default()
        };
        assert!(matches!(tsne(&grid_set(4), &bad), Err(EmbedError::Config(_))));
    }

    #[test]
    fn perplexity_is_clamped_for_small_sets() {
        let c = TsneConfig::default();
        let p = c.effective_perplexity(60).unwrap();
        assert!(p < 59.0 / 3.0 && p > 19.6);
        assert_eq!(c.effective_perplexity(1000).unwrap(), 30.0);
        assert_eq!(c.effective_learning_rate(60), 5.0);
        assert_eq!(c.effective_learning_rate(5000), 200.0);
    }

    #[test]
    fn output_is_centered() {
        let c = TsneConfig {
            perplexity: 5.0,
            iterations: 300,
            ..Default::default()
        };
        let proj = tsne(&grid_set(5), &c).unwrap();
        let n = proj.points.len() as f64;
        let mx: f64 = proj.points.iter().map(|p| p[0]).sum::<f64>() / n;
        let my: f64 = proj.points.iter().map(|p| p[1]).sum::<f64>() / n;
        assert!(mx.abs() < 1e-6 && my.abs() < 1e-6);
        assert_eq!(proj.kl_checkpoints.last().unwrap().0, 300);
    }
}
