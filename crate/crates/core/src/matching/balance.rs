use serde::{Deserialize, Serialize};

use super::cohort::{MatchLevel, MatchedCohort};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::stats::{fisher_exact, AssociationResult, Table2x2};

pub const ALPHA: f64 = 0.05;

/// Fisher test of a binarized covariate against case status over `rows`.
/// Rows missing either value are skipped. `None` when a margin is empty,
/// i.e. the covariate or the status is constant over the usable rows.
pub fn covariate_association(ds: &Dataset, rows: &[usize], covariate: &str) -> Result<Option<AssociationResult>> {
    let x = ds.column(covariate)?.flags()?;
    let y = ds.outcome();
    let table = Table2x2::from_pairs(rows.iter().filter_map(|&r| Some((x[r]?, y[r]?))));
    match fisher_exact(table) {
        Ok(r) => Ok(Some(r)),
        Err(Error::ZeroMargin) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub covariate: String,
    /// Over every labelled row of the pre-matching population.
    pub before: Option<AssociationResult>,
    /// Over the cohort rows.
    pub after: Option<AssociationResult>,
}

impl BalanceRow {
    pub fn significant_before(&self) -> bool {
        self.before.is_some_and(|r| r.p_value < ALPHA)
    }

    pub fn significant_after(&self) -> bool {
        self.after.is_some_and(|r| r.p_value < ALPHA)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub level: MatchLevel,
    pub rows: Vec<BalanceRow>,
    pub significant_before: usize,
    pub significant_after: usize,
}

/// Covariate balance before and after matching.
///
/// `ds` is the binarized view of the same rows the cohort was built from.
/// Covariates constant within a population are reported without a test.
pub fn balance_report(ds: &Dataset, cohort: &MatchedCohort, covariates: &[String]) -> Result<BalanceReport> {
    let all: Vec<usize> = (0..ds.n_rows()).collect();
    let in_cohort = cohort.rows();
    if in_cohort.last().is_some_and(|&r| r >= ds.n_rows()) {
        return Err(Error::DimensionMismatch {
            expected: ds.n_rows(),
            found: in_cohort.last().copied().unwrap_or(0) + 1,
        });
    }
    let rows = covariates
        .iter()
        .map(|c| {
            Ok(BalanceRow {
                covariate: c.clone(),
                before: covariate_association(ds, &all, c)?,
                after: covariate_association(ds, &in_cohort, c)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BalanceReport {
        level: cohort.spec.level,
        significant_before: rows.iter().filter(|r| r.significant_before()).count(),
        significant_after: rows.iter().filter(|r| r.significant_after()).count(),
        rows,
    })
}
