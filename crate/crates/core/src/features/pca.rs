use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal component model fitted by SVD of the centered data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub means: Vec<f64>,
    /// k × D, one orthonormal component per row.
    pub components: DMatrix<f64>,
    /// Sample variance (n − 1 denominator) along each component, descending.
    pub explained_variance: Vec<f64>,
    /// Sum of the per-feature sample variances of the training data.
    pub total_variance: f64,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    /// Scores `(X − means) · componentsᵀ`.
    pub fn project(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.ncols(),
            });
        }
        let centered = center(x, &self.means);
        Ok(centered * self.components.transpose())
    }

    /// Maps scores back to the input space.
    pub fn reconstruct(&self, scores: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if scores.ncols() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                found: scores.ncols(),
            });
        }
        let mut out = scores * &self.components;
        for mut row in out.row_iter_mut() {
            for (v, m) in row.iter_mut().zip(&self.means) {
                *v += m;
            }
        }
        Ok(out)
    }
}

fn center(x: &DMatrix<f64>, means: &[f64]) -> DMatrix<f64> {
    let mut c = x.clone();
    for (j, mut col) in c.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    c
}

/// Fits the top-`k` principal components.
///
/// Features are centered but not rescaled. Each component's sign is chosen so
/// its largest-magnitude loading is positive. When the data rank is below
/// `k`, only `rank` components are returned and a warning is logged.
pub fn fit_pca(x: &DMatrix<f64>, k: usize) -> Result<PcaModel> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::InvalidArgument("PCA needs at least two rows".into()));
    }
    if k == 0 || k > (n - 1).min(d) {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be in 1..={}",
            (n - 1).min(d)
        )));
    }
    let means: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
    let centered = center(x, &means);
    let total_variance = centered.norm_squared() / (n - 1) as f64;

    let svd = centered.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let s_max = svd.singular_values[order[0]];
    let tol = n.max(d) as f64 * f64::EPSILON * s_max;
    let rank = order.iter().filter(|&&i| svd.singular_values[i] > tol).count();
    let kept = if k > rank {
        log::warn!("requested {k} components but data rank is {rank}; returning {rank}");
        rank
    } else {
        k
    };

    let mut components = DMatrix::zeros(kept, d);
    let mut explained_variance = Vec::with_capacity(kept);
    for (row, &i) in order.iter().take(kept).enumerate() {
        let mut comp: DVector<f64> = v_t.row(i).transpose();
        let lead = comp
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0);
        if lead < 0.0 {
            comp.neg_mut();
        }
        components.set_row(row, &comp.transpose());
        let s = svd.singular_values[i];
        explained_variance.push(s * s / (n - 1) as f64);
    }
    Ok(PcaModel {
        means,
        components,
        explained_variance,
        total_variance,
    })
}

/// Fraction of `total_variance` captured by the model's components.
pub fn explained_fraction(model: &PcaModel, total_variance: f64) -> f64 {
    let captured: f64 = model.explained_variance.iter().sum();
    (captured / total_variance).clamp(0.0, 1.0)
}
