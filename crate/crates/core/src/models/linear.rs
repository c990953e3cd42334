use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RANK_TOL: f64 = 1e-12;
const FALLBACK_RIDGE: f64 = 1e-8;

/// Ordinary least squares with intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub train_rmse: f64,
    pub r_squared: f64,
    #[serde(default)]
    pub columns: Vec<String>,
    /// True when the design was rank deficient and a tiny ridge was applied.
    pub ridge_fallback: bool,
}

/// Coefficient of determination `1 − SS_res / SS_tot`. May be negative out
/// of sample; NaN when `truth` is constant.
pub fn r_squared(truth: &[f64], predicted: &[f64]) -> f64 {
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    let ss_res: f64 = truth.iter().zip(predicted).map(|(t, p)| (t - p).powi(2)).sum();
    if ss_tot == 0.0 {
        return f64::NAN;
    }
    1.0 - ss_res / ss_tot
}

pub fn rmse(truth: &[f64], predicted: &[f64]) -> f64 {
    let ss: f64 = truth.iter().zip(predicted).map(|(t, p)| (t - p).powi(2)).sum();
    (ss / truth.len() as f64).sqrt()
}

/// Least-squares fit of `y` on `[1, X]`.
///
/// A rank-deficient design is solved with ridge 1e-8 on the slopes instead,
/// with a warning.
pub fn fit_linear(x: &DMatrix<f64>, y: &[f64]) -> Result<LinearModel> {
    let (n, p) = x.shape();
    if n != y.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if n <= p + 1 {
        return Err(Error::InvalidArgument(format!(
            "need more rows ({n}) than parameters ({})",
            p + 1
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Data("linear regression inputs contain non-finite values".into()));
    }
    let a = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let target = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let (beta, ridge_fallback) = if s_min > RANK_TOL * s_max {
        let beta = svd.solve(&target, 0.0).map_err(|e| Error::Numerical(e.to_string()))?;
        (beta, false)
    } else {
        log::warn!("rank-deficient design; applying ridge {FALLBACK_RIDGE}");
        let mut normal = a.tr_mul(&a);
        for j in 1..=p {
            normal[(j, j)] += FALLBACK_RIDGE * n as f64;
        }
        let rhs = a.tr_mul(&target);
        let beta = normal
            .clone()
            .cholesky()
            .map(|c| c.solve(&rhs))
            .or_else(|| normal.lu().solve(&rhs))
            .ok_or_else(|| Error::Numerical("ridge fallback system is singular".into()))?;
        (beta, true)
    };
    let fitted: Vec<f64> = (&a * &beta).iter().copied().collect();
    Ok(LinearModel {
        coefficients: beta.rows(1, p).iter().copied().collect(),
        intercept: beta[0],
        train_rmse: rmse(y, &fitted),
        r_squared: r_squared(y, &fitted),
        columns: Vec::new(),
        ridge_fallback,
    })
}

pub fn predict_linear(model: &LinearModel, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x.ncols() != model.coefficients.len() {
        return Err(Error::DimensionMismatch {
            expected: model.coefficients.len(),
            found: x.ncols(),
        });
    }
    Ok(x.row_iter()
        .map(|row| model.intercept + row.iter().zip(&model.coefficients).map(|(a, b)| a * b).sum::<f64>())
        .collect())
}
