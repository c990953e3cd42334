use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{quantile_sorted, sample_sd};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Gaussian kernel density estimate of one feature within one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kde {
    pub points: Vec<f64>,
    pub bandwidth: f64,
}

/// Silverman's rule of thumb `0.9 · min(sd, IQR/1.34) · n^(−1/5)`, floored
/// at 1e-6 × sd (1e-6 when the sample is constant).
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len();
    let sd = if n > 1 { sample_sd(values) } else { 0.0 };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let mut spread = sd.min(iqr / 1.34);
    if spread <= 0.0 {
        spread = sd;
    }
    let h = 0.9 * spread * (n as f64).powf(-0.2);
    let floor = if sd > 0.0 { 1e-6 * sd } else { 1e-6 };
    h.max(floor)
}

impl Kde {
    pub fn fit(values: &[f64]) -> Self {
        Self {
            points: values.to_vec(),
            bandwidth: silverman_bandwidth(values),
        }
    }

    /// Log density, evaluated with a log-sum-exp over kernel centres.
    pub fn log_density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let exps = self.points.iter().map(|&c| {
            let u = (x - c) / h;
            -0.5 * u * u
        });
        let max = exps.clone().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return f64::NEG_INFINITY;
        }
        let sum: f64 = exps.map(|e| (e - max).exp()).sum();
        max + sum.ln() - (self.points.len() as f64).ln() - h.ln() - LN_SQRT_2PI
    }
}

/// Naive Bayes with one kernel density per class and feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelNaiveBayes {
    /// `[P(control), P(case)]`.
    pub class_priors: [f64; 2],
    /// `kernels[j] = [control density, case density]` of feature `j`.
    pub kernels: Vec<[Kde; 2]>,
    #[serde(default)]
    pub features: Vec<String>,
}

pub fn fit_kernel_nb(x: &DMatrix<f64>, y: &[bool]) -> Result<KernelNaiveBayes> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    let n_case = y.iter().filter(|&&v| v).count();
    if n_case == 0 || n_case == y.len() {
        return Err(Error::SingleClass);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("naive Bayes inputs contain non-finite values".into()));
    }
    let prior_case = n_case as f64 / y.len() as f64;
    let kernels = x
        .column_iter()
        .map(|col| {
            let split = |class: bool| -> Vec<f64> {
                col.iter()
                    .zip(y)
                    .filter(|(_, &l)| l == class)
                    .map(|(&v, _)| v)
                    .collect()
            };
            [Kde::fit(&split(false)), Kde::fit(&split(true))]
        })
        .collect();
    Ok(KernelNaiveBayes {
        class_priors: [1.0 - prior_case, prior_case],
        kernels,
        features: Vec::new(),
    })
}

/// Per-class log joint `ln P(c) + Σⱼ ln f_cj(xⱼ)`.
fn log_joint(model: &KernelNaiveBayes, x: &[f64]) -> [f64; 2] {
    let mut out = [model.class_priors[0].ln(), model.class_priors[1].ln()];
    for (k, &v) in model.kernels.iter().zip(x) {
        out[0] += k[0].log_density(v);
        out[1] += k[1].log_density(v);
    }
    out
}

/// Posterior probability of the case class. Falls back to the case prior
/// when both classes have zero density at `x`.
pub fn nb_posterior(model: &KernelNaiveBayes, x: &[f64]) -> Result<f64> {
    if x.len() != model.kernels.len() {
        return Err(Error::DimensionMismatch {
            expected: model.kernels.len(),
            found: x.len(),
        });
    }
    let [l0, l1] = log_joint(model, x);
    Ok(posterior_from_logs(l0, l1, model.class_priors[1]))
}

fn posterior_from_logs(l0: f64, l1: f64, prior: f64) -> f64 {
    match (l0.is_finite(), l1.is_finite()) {
        (false, false) => prior,
        (false, true) => 1.0,
        (true, false) => 0.0,
        (true, true) => 1.0 / (1.0 + (l0 - l1).exp()),
    }
}

/// Posteriors for both classes at `x`; they sum to one.
pub fn nb_class_posteriors(model: &KernelNaiveBayes, x: &[f64]) -> Result<[f64; 2]> {
    let case = nb_posterior(model, x)?;
    let [l0, l1] = log_joint(model, x);
    let control = match (l0.is_finite(), l1.is_finite()) {
        (true, true) => 1.0 / (1.0 + (l1 - l0).exp()),
        _ => 1.0 - case,
    };
    Ok([control, case])
}

pub fn nb_predict(model: &KernelNaiveBayes, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x.ncols() != model.kernels.len() {
        return Err(Error::DimensionMismatch {
            expected: model.kernels.len(),
            found: x.ncols(),
        });
    }
    let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.par_iter().map(|r| nb_posterior(model, r)).collect()
}

/// Combines image-model and covariate-model probabilities with kernel Naive
/// Bayes.
///
/// The model is fitted on training-set scores (which should be out-of-fold
/// predictions) and returns posteriors on the test scores.
pub fn ensemble_naive_bayes(
    img_train: &[f64],
    img_test: &[f64],
    cov_train: &[f64],
    cov_test: &[f64],
    y_train: &[bool],
) -> Result<Vec<f64>> {
    if img_train.len() != cov_train.len() || img_train.len() != y_train.len() {
        return Err(Error::DimensionMismatch {
            expected: y_train.len(),
            found: img_train.len().min(cov_train.len()),
        });
    }
    if img_test.len() != cov_test.len() {
        return Err(Error::DimensionMismatch {
            expected: img_test.len(),
            found: cov_test.len(),
        });
    }
    for &s in img_train.iter().chain(img_test).chain(cov_train).chain(cov_test) {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidArgument(format!(
                "ensemble input {s} is not a probability"
            )));
        }
    }
    let train = DMatrix::from_fn(
        y_train.len(),
        2,
        |i, j| if j == 0 { img_train[i] } else { cov_train[i] },
    );
    let test = DMatrix::from_fn(img_test.len(), 2, |i, j| if j == 0 { img_test[i] } else { cov_test[i] });
    let mut model = fit_kernel_nb(&train, y_train)?;
    model.features = vec!["img".into(), "cov".into()];
    nb_predict(&model, &test)
}
