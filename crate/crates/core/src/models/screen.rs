use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::{fit_linear, predict_linear, r_squared, rmse};
use super::predictors::{fit_predictor_set, Design, FitOptions, PredictorGroup, PredictorSet};
use crate::dataset::{Dataset, Kind, Partition};
use crate::error::{Error, Result};
use crate::seed;
use crate::stats::roc_analysis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScreenStatus {
    Ok,
    SingleClassTrain,
    SingleClassTest,
    TooFewRows,
    NonConvergence,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenRow {
    pub target: String,
    #[serde(with = "crate::serde_float")]
    pub auc: f64,
    #[serde(with = "crate::serde_float")]
    pub ci_low: f64,
    #[serde(with = "crate::serde_float")]
    pub ci_high: f64,
    #[serde(with = "crate::serde_float")]
    pub lambda: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub status: ScreenStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub target: String,
    #[serde(with = "crate::serde_float")]
    pub r_squared: f64,
    #[serde(with = "crate::serde_float")]
    pub rmse: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub status: ScreenStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenOptions {
    pub replicates: usize,
    pub seed: u64,
    pub lambda_grid: Vec<f64>,
    pub folds: usize,
}

impl Default for ScreenOptions {
    fn default() -> Self {
        let fit = FitOptions::default();
        Self {
            replicates: 2000,
            seed: 0,
            lambda_grid: fit.lambda_grid,
            folds: fit.folds,
        }
    }
}

fn img_only() -> PredictorSet {
    PredictorSet::new(&[PredictorGroup::Img]).expect("non-empty")
}

fn status_of(e: &Error) -> ScreenStatus {
    match e {
        Error::NonConvergence { .. } => ScreenStatus::NonConvergence,
        Error::SingleClass => ScreenStatus::SingleClassTrain,
        _ => ScreenStatus::Failed,
    }
}

fn screen_one(
    ds: &Dataset,
    img: &DMatrix<f64>,
    part: &Partition,
    target: &str,
    opts: &ScreenOptions,
) -> Result<ScreenRow> {
    let col = ds.column(target)?;
    if col.spec.kind != Kind::Binary {
        return Err(Error::InvalidArgument(format!(
            "screen target `{target}` is not binarized"
        )));
    }
    let labels = col.flags()?;
    let count = |rows: &[usize]| {
        let pos = rows.iter().filter(|&&r| labels[r] == Some(true)).count();
        let neg = rows.iter().filter(|&&r| labels[r] == Some(false)).count();
        (pos, neg)
    };
    let (tr_pos, tr_neg) = count(&part.train_indices);
    let (te_pos, te_neg) = count(&part.test_indices);
    let mut row = ScreenRow {
        target: target.to_string(),
        auc: f64::NAN,
        ci_low: f64::NAN,
        ci_high: f64::NAN,
        lambda: f64::NAN,
        n_train: tr_pos + tr_neg,
        n_test: te_pos + te_neg,
        status: ScreenStatus::Ok,
    };
    if tr_pos < 2 || tr_neg < 2 {
        row.status = ScreenStatus::SingleClassTrain;
        return Ok(row);
    }
    if te_pos < 2 || te_neg < 2 {
        row.status = ScreenStatus::SingleClassTest;
        return Ok(row);
    }
    let target_seed = seed::derive(opts.seed, target);
    let fit_opts = FitOptions {
        lambda_grid: opts.lambda_grid.clone(),
        folds: opts.folds,
        seed: target_seed,
        out_of_fold: false,
    };
    let fitted = match fit_predictor_set(
        ds,
        Some(img),
        &img_only(),
        &labels,
        &part.train_indices,
        &part.test_indices,
        &fit_opts,
    ) {
        Ok(f) => f,
        Err(e) => {
            log::warn!("screen target `{target}`: {e}");
            row.status = status_of(&e);
            return Ok(row);
        }
    };
    let test_labels: Vec<bool> = fitted.test_rows.iter().map(|&r| labels[r].expect("labelled")).collect();
    let roc = roc_analysis(
        &fitted.test_scores,
        &test_labels,
        opts.replicates,
        seed::derive(target_seed, "ci"),
    )?;
    row.auc = roc.auc;
    row.ci_low = roc.ci_low;
    row.ci_high = roc.ci_high;
    row.lambda = fitted.model.ridge_lambda;
    Ok(row)
}

/// How well image features predict each binarized covariate.
///
/// For every target, a logistic model on the IMG principal components is
/// fitted on the training rows and its AUC with a bootstrap interval is
/// measured on the test rows. Rows missing the target are excluded per
/// target. Targets are processed in parallel; output follows `targets`.
pub fn predictability_screen(
    ds: &Dataset,
    img: &DMatrix<f64>,
    part: &Partition,
    targets: &[String],
    opts: &ScreenOptions,
) -> Result<Vec<ScreenRow>> {
    targets.par_iter().map(|t| screen_one(ds, img, part, t, opts)).collect()
}

fn regress_one(ds: &Dataset, img: &DMatrix<f64>, part: &Partition, target: &str) -> Result<RegressionRow> {
    let col = ds.column(target)?;
    if col.spec.kind != Kind::Continuous {
        return Err(Error::InvalidArgument(format!(
            "regression target `{target}` is not continuous"
        )));
    }
    let values = col.numeric()?;
    let observed = |rows: &[usize]| -> Vec<usize> { rows.iter().copied().filter(|&r| values[r].is_some()).collect() };
    let train = observed(&part.train_indices);
    let test = observed(&part.test_indices);
    let mut row = RegressionRow {
        target: target.to_string(),
        r_squared: f64::NAN,
        rmse: f64::NAN,
        n_train: train.len(),
        n_test: test.len(),
        status: ScreenStatus::Ok,
    };
    if train.len() <= img.ncols() + 1 || test.len() < 2 {
        row.status = ScreenStatus::TooFewRows;
        return Ok(row);
    }
    let design = Design::fit(ds, Some(img), &img_only(), &train)?;
    let y_train: Vec<f64> = train.iter().map(|&r| values[r].expect("observed")).collect();
    let y_test: Vec<f64> = test.iter().map(|&r| values[r].expect("observed")).collect();
    let model = fit_linear(&design.matrix(ds, Some(img), &train)?, &y_train)?;
    let predicted = predict_linear(&model, &design.matrix(ds, Some(img), &test)?)?;
    row.r_squared = r_squared(&y_test, &predicted);
    row.rmse = rmse(&y_test, &predicted);
    Ok(row)
}

/// Out-of-sample R² of linear models predicting each continuous covariate
/// from the IMG principal components. Negative values are reported as is.
pub fn regression_screen(
    ds: &Dataset,
    img: &DMatrix<f64>,
    part: &Partition,
    targets: &[String],
) -> Result<Vec<RegressionRow>> {
    targets.par_iter().map(|t| regress_one(ds, img, part, t)).collect()
}
