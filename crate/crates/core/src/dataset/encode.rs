use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{ColumnData, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Encoding {
    Numeric {
        name: String,
    },
    /// One indicator per non-reference level.
    Indicators {
        name: String,
        levels: Vec<String>,
    },
}

/// Numeric coding of covariates for regression models.
///
/// Numeric variables pass through. Categorical variables become one 0/1
/// indicator per level except the reference (the most frequent level when
/// fitted, ties alphabetical). Levels unseen at fit time encode as all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateEncoder {
    encodings: Vec<Encoding>,
}

impl CovariateEncoder {
    pub fn fit(ds: &Dataset, variables: &[String]) -> Result<Self> {
        let mut encodings = Vec::with_capacity(variables.len());
        for name in variables {
            let col = ds.column(name)?;
            match &col.data {
                ColumnData::Numeric(_) => encodings.push(Encoding::Numeric { name: name.clone() }),
                ColumnData::Levels(values) => {
                    let mut counts: HashMap<&str, usize> = HashMap::new();
                    for v in values.iter().flatten() {
                        *counts.entry(v.as_str()).or_default() += 1;
                    }
                    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
                    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
                    let mut levels: Vec<String> = ranked.iter().skip(1).map(|(l, _)| l.to_string()).collect();
                    levels.sort();
                    encodings.push(Encoding::Indicators {
                        name: name.clone(),
                        levels,
                    });
                }
            }
        }
        Ok(Self { encodings })
    }

    pub fn width(&self) -> usize {
        self.encodings
            .iter()
            .map(|e| match e {
                Encoding::Numeric { .. } => 1,
                Encoding::Indicators { levels, .. } => levels.len(),
            })
            .sum()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.width());
        for e in &self.encodings {
            match e {
                Encoding::Numeric { name } => out.push(name.clone()),
                Encoding::Indicators { name, levels } => {
                    out.extend(levels.iter().map(|l| format!("{name}={l}")));
                }
            }
        }
        out
    }

    /// Encodes the selected rows. Fails on any missing cell.
    pub fn transform_rows(&self, ds: &Dataset, rows: &[usize]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(rows.len(), self.width());
        let mut j = 0;
        for e in &self.encodings {
            match e {
                Encoding::Numeric { name } => {
                    let values = ds.column(name)?.numeric()?;
                    for (i, &r) in rows.iter().enumerate() {
                        m[(i, j)] = values[r].ok_or_else(|| {
                            Error::Data(format!("missing value in `{name}` at row {r}; impute first"))
                        })?;
                    }
                    j += 1;
                }
                Encoding::Indicators { name, levels } => {
                    let values = ds.column(name)?.levels()?;
                    for (i, &r) in rows.iter().enumerate() {
                        let v = values[r].as_deref().ok_or_else(|| {
                            Error::Data(format!("missing value in `{name}` at row {r}; impute first"))
                        })?;
                        if let Some(k) = levels.iter().position(|l| l == v) {
                            m[(i, j + k)] = 1.0;
                        }
                    }
                    j += levels.len();
                }
            }
        }
        Ok(m)
    }

    pub fn transform(&self, ds: &Dataset) -> Result<DMatrix<f64>> {
        let rows: Vec<usize> = (0..ds.n_rows()).collect();
        self.transform_rows(ds, &rows)
    }
}
