use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::cv::{out_of_fold_logistic, select_lambda, LambdaSelection, DEFAULT_FOLDS, LAMBDA_GRID};
use super::logistic::{fit_logistic, predict_proba, LogisticModel};
use crate::dataset::{CovariateEncoder, Dataset, Group};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PredictorGroup {
    Img,
    Pt,
    Hp,
}

impl PredictorGroup {
    pub fn label(self) -> &'static str {
        match self {
            PredictorGroup::Img => "IMG",
            PredictorGroup::Pt => "PT",
            PredictorGroup::Hp => "HP",
        }
    }
}

/// A non-empty combination of predictor groups.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PredictorSet {
    groups: Vec<PredictorGroup>,
}

impl PredictorSet {
    pub fn new(groups: &[PredictorGroup]) -> Result<Self> {
        let mut groups = groups.to_vec();
        groups.sort();
        groups.dedup();
        if groups.is_empty() {
            return Err(Error::InvalidArgument("predictor set must not be empty".into()));
        }
        Ok(Self { groups })
    }

    pub fn groups(&self) -> &[PredictorGroup] {
        &self.groups
    }

    pub fn has_img(&self) -> bool {
        self.groups.contains(&PredictorGroup::Img)
    }

    /// Covariate variables (PT then HP, schema order within each group).
    pub fn covariates(&self, ds: &Dataset) -> Vec<String> {
        let mut out = Vec::new();
        if self.groups.contains(&PredictorGroup::Pt) {
            out.extend(ds.names_in(&[Group::Pt]));
        }
        if self.groups.contains(&PredictorGroup::Hp) {
            out.extend(ds.names_in(&[Group::Hp]));
        }
        out
    }

    /// The six combinations evaluated by the audit.
    pub fn standard() -> Vec<PredictorSet> {
        use PredictorGroup::*;
        [
            vec![Img],
            vec![Pt],
            vec![Hp],
            vec![Pt, Hp],
            vec![Img, Pt],
            vec![Img, Pt, Hp],
        ]
        .iter()
        .map(|g| PredictorSet::new(g).expect("non-empty"))
        .collect()
    }
}

impl fmt::Display for PredictorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<&str> = self.groups.iter().map(|g| g.label()).collect();
        f.write_str(&labels.join("+"))
    }
}

impl FromStr for PredictorSet {
    type Err = Error;

    /// Parses `img,pt,hp` or `IMG+PT` style lists.
    fn from_str(s: &str) -> Result<Self> {
        let groups = s
            .split([',', '+'])
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| match t.to_ascii_lowercase().as_str() {
                "img" => Ok(PredictorGroup::Img),
                "pt" => Ok(PredictorGroup::Pt),
                "hp" => Ok(PredictorGroup::Hp),
                other => Err(Error::InvalidArgument(format!("unknown predictor group `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        PredictorSet::new(&groups)
    }
}

/// Maps a predictor set to a standardized numeric design matrix.
///
/// IMG contributes the supplied PCA score columns; covariates are coded by a
/// [`CovariateEncoder`] fitted on the imputed data. Column means and standard
/// deviations come from the fitting rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub set: PredictorSet,
    encoder: Option<CovariateEncoder>,
    img_width: usize,
    pub columns: Vec<String>,
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl Design {
    pub fn fit(ds: &Dataset, img: Option<&DMatrix<f64>>, set: &PredictorSet, rows: &[usize]) -> Result<Self> {
        let img_width = if set.has_img() {
            let m = img.ok_or_else(|| Error::InvalidArgument("IMG predictors need feature scores".into()))?;
            m.ncols()
        } else {
            0
        };
        let covariates = set.covariates(ds);
        let encoder = if covariates.is_empty() {
            None
        } else {
            Some(CovariateEncoder::fit(&ds.subset(rows), &covariates)?)
        };
        let mut columns: Vec<String> = (0..img_width).map(|k| format!("PC{}", k + 1)).collect();
        if let Some(e) = &encoder {
            columns.extend(e.column_names());
        }
        if columns.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "predictor set {set} resolves to no columns"
            )));
        }
        let mut design = Design {
            set: set.clone(),
            encoder,
            img_width,
            columns,
            means: Vec::new(),
            scales: Vec::new(),
        };
        let raw = design.raw(ds, img, rows)?;
        for col in raw.column_iter() {
            let n = col.len() as f64;
            let mean = col.mean();
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            design.means.push(mean);
            design.scales.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Ok(design)
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    fn raw(&self, ds: &Dataset, img: Option<&DMatrix<f64>>, rows: &[usize]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(rows.len(), self.width());
        if self.img_width > 0 {
            let scores = img.ok_or_else(|| Error::InvalidArgument("IMG predictors need feature scores".into()))?;
            if scores.ncols() != self.img_width || scores.nrows() != ds.n_rows() {
                return Err(Error::DimensionMismatch {
                    expected: self.img_width,
                    found: scores.ncols(),
                });
            }
            for (i, &r) in rows.iter().enumerate() {
                for k in 0..self.img_width {
                    m[(i, k)] = scores[(r, k)];
                }
            }
        }
        if let Some(e) = &self.encoder {
            let cov = e.transform_rows(ds, rows)?;
            m.view_mut((0, self.img_width), (rows.len(), cov.ncols()))
                .copy_from(&cov);
        }
        Ok(m)
    }

    /// Standardized design rows. `img` holds one row of scores per dataset row.
    pub fn matrix(&self, ds: &Dataset, img: Option<&DMatrix<f64>>, rows: &[usize]) -> Result<DMatrix<f64>> {
        let mut m = self.raw(ds, img, rows)?;
        for (j, mut col) in m.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.means[j]);
            col /= self.scales[j];
        }
        Ok(m)
    }
}

/// Binary target restricted to rows where it is observed.
pub fn labelled_rows(labels: &[Option<bool>], rows: &[usize]) -> (Vec<usize>, Vec<bool>) {
    rows.iter().filter_map(|&r| labels[r].map(|l| (r, l))).unzip()
}

/// A logistic model over a predictor set, with its test-set scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPredictor {
    pub design: Design,
    pub model: LogisticModel,
    pub selection: LambdaSelection,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub test_scores: Vec<f64>,
    /// Out-of-fold probabilities on the training rows, when requested.
    pub train_oof: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub lambda_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub out_of_fold: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            lambda_grid: LAMBDA_GRID.to_vec(),
            folds: DEFAULT_FOLDS,
            seed: 0,
            out_of_fold: false,
        }
    }
}

/// Selects the ridge strength by cross-validation on `train`, fits on all of
/// `train` and scores `test`. Rows with a missing label are dropped.
pub fn fit_predictor_set(
    ds: &Dataset,
    img: Option<&DMatrix<f64>>,
    set: &PredictorSet,
    labels: &[Option<bool>],
    train: &[usize],
    test: &[usize],
    opts: &FitOptions,
) -> Result<FittedPredictor> {
    let (train_rows, y_train) = labelled_rows(labels, train);
    let (test_rows, _) = labelled_rows(labels, test);
    let design = Design::fit(ds, img, set, &train_rows)?;
    let x_train = design.matrix(ds, img, &train_rows)?;
    let selection = select_lambda(&x_train, &y_train, &opts.lambda_grid, opts.folds, opts.seed)?;
    let mut model = fit_logistic(&x_train, &y_train, selection.lambda)?;
    model.columns = design.columns.clone();
    let test_scores = predict_proba(&model, &design.matrix(ds, img, &test_rows)?)?;
    let train_oof = if opts.out_of_fold {
        Some(out_of_fold_logistic(
            &x_train,
            &y_train,
            selection.lambda,
            opts.folds,
            opts.seed,
        )?)
    } else {
        None
    };
    Ok(FittedPredictor {
        design,
        model,
        selection,
        train_rows,
        test_rows,
        test_scores,
        train_oof,
    })
}
