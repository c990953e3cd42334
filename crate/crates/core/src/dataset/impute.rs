use nalgebra::{DMatrix, DVector};

use super::{Column, ColumnData, CovariateEncoder, Dataset, Kind};
use crate::error::{Error, Result};
use crate::stats::median;

/// Explicit level substituted for missing categorical values.
pub const MISSING_LEVEL: &str = "(Missing)";

/// Condition number above which regression imputation falls back to the median.
const MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Clone)]
pub struct Imputed {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

fn observed_median(name: &str, values: &[Option<f64>]) -> Result<f64> {
    let observed: Vec<f64> = values.iter().flatten().copied().collect();
    if observed.is_empty() {
        return Err(Error::DegenerateVariable(name.to_string()));
    }
    Ok(median(&observed))
}

fn fill_simple(col: &Column) -> Result<Column> {
    let data = match (&col.data, col.spec.kind) {
        (ColumnData::Levels(v), _) => ColumnData::Levels(
            v.iter()
                .map(|x| Some(x.clone().unwrap_or_else(|| MISSING_LEVEL.to_string())))
                .collect(),
        ),
        // Binary variables with gaps gain an explicit missing level.
        (ColumnData::Numeric(v), Kind::Binary) if v.iter().any(Option::is_none) => {
            let mut spec = col.spec.clone();
            spec.kind = Kind::Categorical;
            let data = ColumnData::Levels(
                v.iter()
                    .map(|x| {
                        Some(match x {
                            Some(b) if *b == 0.0 => "0".to_string(),
                            Some(_) => "1".to_string(),
                            None => MISSING_LEVEL.to_string(),
                        })
                    })
                    .collect(),
            );
            return Ok(Column { spec, data });
        }
        (ColumnData::Numeric(v), _) => {
            if !v.iter().any(Option::is_none) {
                return Ok(col.clone());
            }
            let m = observed_median(&col.spec.name, v)?;
            ColumnData::Numeric(v.iter().map(|x| Some(x.unwrap_or(m))).collect())
        }
    };
    Ok(Column {
        spec: col.spec.clone(),
        data,
    })
}

/// Largest over smallest singular value after scaling columns to unit norm.
fn condition_number(x: &DMatrix<f64>) -> f64 {
    let mut scaled = x.clone();
    for mut c in scaled.column_iter_mut() {
        let norm = c.norm();
        if norm > 0.0 {
            c /= norm;
        }
    }
    let sv = scaled.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Fills every missing covariate (PT and HP) cell.
///
/// Categorical gaps become the explicit `(Missing)` level, binary variables
/// with gaps become categorical with that level, continuous gaps take the
/// observed median. Variables listed in `regression_targets` are instead
/// predicted by least squares (with intercept) from all other covariates,
/// after those are imputed as above. Observed cells are never modified.
pub fn impute(ds: &Dataset, regression_targets: &[String]) -> Result<Imputed> {
    let mut warnings = Vec::new();
    for t in regression_targets {
        let col = ds.column(t)?;
        if col.spec.kind != Kind::Continuous {
            return Err(Error::InvalidArgument(format!(
                "regression imputation target `{t}` must be continuous"
            )));
        }
        if col.numeric()?.iter().all(Option::is_none) {
            return Err(Error::DegenerateVariable(t.clone()));
        }
    }

    let mut out = ds.clone();
    let covariates: Vec<usize> = (0..ds.columns().len())
        .filter(|&i| ds.columns()[i].spec.group.is_covariate())
        .collect();
    for &i in &covariates {
        if regression_targets.contains(&ds.columns()[i].spec.name) {
            continue;
        }
        let filled = fill_simple(&ds.columns()[i])?;
        out = out.with_column(i, filled);
    }

    for target in regression_targets {
        let idx = out.column_index(target)?;
        let values = out.columns()[idx].numeric()?.to_vec();
        if !values.iter().any(Option::is_none) {
            continue;
        }
        let predictors: Vec<String> = covariates
            .iter()
            .map(|&i| out.columns()[i].spec.name.clone())
            .filter(|n| !regression_targets.contains(n))
            .collect();
        let filled = match regression_fill(&out, &predictors, &values)? {
            Some(v) => v,
            None => {
                let msg = format!("regression imputation of `{target}` is ill-conditioned; using the median");
                log::warn!("{msg}");
                warnings.push(msg);
                let m = observed_median(target, &values)?;
                values.iter().map(|x| x.unwrap_or(m)).collect()
            }
        };
        let spec = out.columns()[idx].spec.clone();
        out = out.with_column(
            idx,
            Column {
                spec,
                data: ColumnData::Numeric(filled.into_iter().map(Some).collect()),
            },
        );
    }
    Ok(Imputed { dataset: out, warnings })
}

/// Least-squares fill; `None` when the design is too ill-conditioned.
fn regression_fill(ds: &Dataset, predictors: &[String], target: &[Option<f64>]) -> Result<Option<Vec<f64>>> {
    let observed: Vec<usize> = (0..target.len()).filter(|&r| target[r].is_some()).collect();
    let encoder = CovariateEncoder::fit(ds, predictors)?;
    let all = encoder.transform(ds)?;
    // Columns constant over the observed rows carry no information there.
    let keep: Vec<usize> = (0..all.ncols())
        .filter(|&j| {
            let first = all[(observed[0], j)];
            observed.iter().any(|&r| all[(r, j)] != first)
        })
        .collect();
    let p = keep.len() + 1;
    if observed.len() < p {
        return Ok(None);
    }
    let design = |rows: &[usize]| {
        DMatrix::from_fn(
            rows.len(),
            p,
            |i, j| if j == 0 { 1.0 } else { all[(rows[i], keep[j - 1])] },
        )
    };
    let x = design(&observed);
    if condition_number(&x) > MAX_CONDITION {
        return Ok(None);
    }
    let y = DVector::from_iterator(observed.len(), observed.iter().map(|&r| target[r].unwrap()));
    let beta = x
        .clone()
        .svd(true, true)
        .solve(&y, 0.0)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let rows: Vec<usize> = (0..target.len()).collect();
    let fitted = design(&rows) * beta;
    Ok(Some(
        target.iter().enumerate().map(|(r, v)| v.unwrap_or(fitted[r])).collect(),
    ))
}
