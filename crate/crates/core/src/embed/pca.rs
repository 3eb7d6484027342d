// SPDX-License-Identifier: MIT OR Apache-2.0

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{EmbedError, Result};

/// Principal components of a data matrix (rows are observations).
///
/// Each component's sign is fixed so that its largest-magnitude loading is
/// positive, which makes projections reproducible across runs and platforms.
#[derive(Debug, Clone)]
pub struct Pca {
    mean: DVector<f64>,
    /// `k × d`, one unit-norm component per row.
    components: DMatrix<f64>,
    explained_variance: Vec<f64>,
    total_variance: f64,
}

impl Pca {
    pub fn fit(x: &DMatrix<f64>, k: usize) -> Result<Self> {
        let (n, d) = x.shape();
        let max = n.min(d);
        if k == 0 || k > max {
            return Err(EmbedError::ComponentsOutOfRange { k, max });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        let mean = x.row_mean().transpose();
        let mut centered = x.clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let dof = (n.saturating_sub(1)).max(1) as f64;
        let total_variance = centered.iter().map(|v| v * v).sum::<f64>() / dof;

        // Eigen-decompose the smaller of the covariance and Gram matrices.
        let (values, vectors) = if d <= n {
            let cov = centered.transpose() * &centered / dof;
            let eig = SymmetricEigen::new(cov);
            (eig.eigenvalues, eig.eigenvectors)
        } else {
            let gram = &centered * centered.transpose() / dof;
            let eig = SymmetricEigen::new(gram);
            // map left singular vectors to loadings: v = Xᵀu / ‖Xᵀu‖
            let mut loadings = centered.transpose() * &eig.eigenvectors;
            for mut col in loadings.column_iter_mut() {
                let norm = col.norm();
                if norm > 0.0 {
                    col /= norm;
                }
            }
            (eig.eigenvalues, loadings)
        };

        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

        let mut components = DMatrix::zeros(k, d);
        let mut explained_variance = Vec::with_capacity(k);
        for (r, &idx) in order.iter().take(k).enumerate() {
            let mut v = vectors.column(idx).clone_owned();
            let pivot = v
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |best, (i, x)| if x.abs() > best.1 { (i, x.abs()) } else { best })
                .0;
            if v[pivot] < 0.0 {
                v.neg_mut();
            }
            components.set_row(r, &v.transpose());
            explained_variance.push(values[idx].max(0.0));
        }
        Ok(Self {
            mean,
            components,
            explained_variance,
            total_variance,
        })
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut centered = x.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        centered * self.components.transpose()
    }

    pub fn inverse_transform(&self, scores: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = scores * &self.components;
        for mut row in x.row_iter_mut() {
            row += self.mean.transpose();
        }
        x
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    pub fn explained_variance_ratio(&self) -> f64 {
        if self.total_variance == 0.0 {
            return 1.0;
        }
        self.explained_variance.iter().sum::<f64>() / self.total_variance
    }
}

/// Projects `x` onto its top `k` principal components.
pub fn pca_reduce(x: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    Ok(Pca::fit(x, k)?.transform(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn exact_subspace_reconstructs() {
        // 30 points spanning a 2-d plane inside R^5
        let coeffs = gaussian(30, 2, 1);
        let basis = gaussian(2, 5, 2);
        let x = &coeffs * &basis;
        let pca = Pca::fit(&x, 2).unwrap();
        let back = pca.inverse_transform(&pca.transform(&x));
        assert!((back - &x).abs().max() < 1e-9);
        // wide data takes the Gram route
        let wide = &gaussian(6, 2, 3) * &gaussian(2, 40, 4);
        let pca = Pca::fit(&wide, 2).unwrap();
        let back = pca.inverse_transform(&pca.transform(&wide));
        assert!((back - &wide).abs().max() < 1e-9);
    }

    #[test]
    fn full_rank_preserves_variance() {
        let x = gaussian(200, 6, 5);
        let pca = Pca::fit(&x, 6).unwrap();
        let y = pca.transform(&x);
        let dof = 199.0;
        let mean = y.row_mean();
        let projected: f64 = y
            .row_iter()
            .map(|r| (r - &mean).norm_squared())
            .sum::<f64>()
            / dof;
        assert!((projected - pca.total_variance()).abs() < 1e-6);
        assert!((pca.explained_variance_ratio() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rank_one_explains_everything() {
        let t = gaussian(50, 1, 6);
        let dir = DMatrix::from_row_slice(1, 4, &[1.0, -2.0, 0.5, 3.0]);
        let x = t * dir;
        let pca = Pca::fit(&x, 1).unwrap();
        assert!(pca.explained_variance_ratio() >= 0.99999);
        // sign rule: largest loading (the 3.0 axis) is positive
        assert!(pca.components()[(0, 3)] > 0.0);
    }

    #[test]
    fn sign_is_fixed_under_negation() {
        let x = gaussian(40, 3, 7);
        let a = pca_reduce(&x, 2).unwrap();
        let b = pca_reduce(&(-&x), 2).unwrap();
        // negated data flips scores but loadings stay sign-normalized
        assert!((a + b).abs().max() < 1e-9);
    }

    #[test]
    fn k_out_of_range() {
        let x = gaussian(5, 3, 8);
        assert_eq!(
            Pca::fit(&x, 4).unwrap_err(),
            EmbedError::ComponentsOutOfRange { k: 4, max: 3 }
        );
        assert!(Pca::fit(&x, 0).is_err());
    }
}
