use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::logistic::{fit_logistic, predict_proba};
use crate::error::{Error, Result};
use crate::seed;
use crate::stats::auc;

pub const DEFAULT_FOLDS: usize = 10;
pub const LAMBDA_GRID: [f64; 4] = [1e-6, 1e-4, 1e-2, 1.0];

/// Fold index per row. Each class is shuffled and dealt round-robin, so every
/// fold holds both classes whenever each class has at least `k` rows. `k` is
/// reduced to the minority class size (never below 2) otherwise.
pub fn stratified_folds(y: &[bool], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n_case = y.iter().filter(|&&v| v).count();
    let n_control = y.len() - n_case;
    let k = k.min(n_case).min(n_control);
    if k < 2 {
        return Err(Error::SingleClass);
    }
    let mut rng = seed::rng(seed);
    let mut fold = vec![0; y.len()];
    for class in [true, false] {
        let mut rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        rows.shuffle(&mut rng);
        for (pos, r) in rows.into_iter().enumerate() {
            fold[r] = pos % k;
        }
    }
    Ok(fold)
}

fn rows_of(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

/// Out-of-fold predictions with an arbitrary fit/predict pair.
pub(crate) fn out_of_fold<M>(
    x: &DMatrix<f64>,
    y: &[bool],
    assignment: &[usize],
    fit: impl Fn(&DMatrix<f64>, &[bool]) -> Result<M>,
    predict: impl Fn(&M, &DMatrix<f64>) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    let mut out = vec![f64::NAN; y.len()];
    for f in 0..k {
        let train: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] != f).collect();
        let held: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] == f).collect();
        let y_train: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let model = fit(&rows_of(x, &train), &y_train)?;
        for (&i, p) in held.iter().zip(predict(&model, &rows_of(x, &held))?) {
            out[i] = p;
        }
    }
    Ok(out)
}

/// Out-of-fold logistic probabilities for every row.
pub fn out_of_fold_logistic(x: &DMatrix<f64>, y: &[bool], lambda: f64, folds: usize, seed: u64) -> Result<Vec<f64>> {
    let assignment = stratified_folds(y, folds, seed)?;
    out_of_fold(x, y, &assignment, |xt, yt| fit_logistic(xt, yt, lambda), predict_proba)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaScore {
    pub lambda: f64,
    /// Mean held-out fold AUC; `None` when a fold failed to converge.
    pub cv_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSelection {
    pub lambda: f64,
    pub scores: Vec<LambdaScore>,
}

/// Picks the ridge strength with the highest mean held-out AUC. Ties go to
/// the stronger penalty; candidates with a non-converged fold are skipped.
pub fn select_lambda(x: &DMatrix<f64>, y: &[bool], grid: &[f64], folds: usize, seed: u64) -> Result<LambdaSelection> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    let assignment = stratified_folds(y, folds, seed)?;
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    let mut scores = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let mut total = 0.0;
        let mut ok = true;
        for f in 0..k {
            let train: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] != f).collect();
            let held: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] == f).collect();
            let yt: Vec<bool> = train.iter().map(|&i| y[i]).collect();
            let yh: Vec<bool> = held.iter().map(|&i| y[i]).collect();
            match fit_logistic(&rows_of(x, &train), &yt, lambda) {
                Ok(m) => total += auc(&predict_proba(&m, &rows_of(x, &held))?, &yh)?,
                Err(Error::NonConvergence { .. }) => {
                    ok = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        scores.push(LambdaScore {
            lambda,
            cv_auc: ok.then(|| total / k as f64),
        });
    }
    let best =
        scores
            .iter()
            .filter_map(|s| s.cv_auc.map(|a| (s.lambda, a)))
            .fold(None, |best: Option<(f64, f64)>, (l, a)| match best {
                Some((bl, ba)) if a < ba || (a == ba && l < bl) => Some((bl, ba)),
                _ => Some((l, a)),
            });
    match best {
        Some((lambda, _)) => Ok(LambdaSelection { lambda, scores }),
        None => Err(Error::NonConvergence {
            iterations: 100,
            gradient_norm: f64::NAN,
        }),
    }
}
