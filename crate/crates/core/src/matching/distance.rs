use std::collections::HashMap;

use crate::dataset::{ColumnData, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum Coding {
    /// Values pre-divided by the variable's range.
    Scaled(Vec<f64>),
    Codes(Vec<u32>),
    /// Zero range: contributes nothing.
    Flat,
}

/// Gower-style distance over a fixed set of imputed covariates.
///
/// Continuous variables contribute `|a − b| / range` (range taken over the
/// supplied dataset), binary and categorical ones `1{a ≠ b}`. The distance is
/// the mean over variables, so it lies in [0, 1]. An empty variable list gives
/// distance 0 everywhere.
#[derive(Debug, Clone)]
pub struct DistanceSpace {
    codings: Vec<Coding>,
    zero_range: Vec<String>,
}

impl DistanceSpace {
    pub fn new(ds: &Dataset, variables: &[String]) -> Result<Self> {
        let mut codings = Vec::with_capacity(variables.len());
        let mut zero_range = Vec::new();
        for name in variables {
            let col = ds.column(name)?;
            if col.data.missing_count() > 0 {
                return Err(Error::Data(format!(
                    "matching variable `{name}` has missing values; impute first"
                )));
            }
            let coding = match &col.data {
                ColumnData::Numeric(v) => {
                    let values: Vec<f64> = v.iter().map(|x| x.expect("no missing")).collect();
                    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                        (lo.min(x), hi.max(x))
                    });
                    let range = hi - lo;
                    if values.is_empty() || range <= 0.0 {
                        zero_range.push(name.clone());
                        Coding::Flat
                    } else if col.spec.kind == crate::dataset::Kind::Binary {
                        Coding::Codes(values.iter().map(|&x| u32::from(x != 0.0)).collect())
                    } else {
                        Coding::Scaled(values.iter().map(|x| x / range).collect())
                    }
                }
                ColumnData::Levels(v) => {
                    let mut ids: HashMap<&str, u32> = HashMap::new();
                    let codes: Vec<u32> = v
                        .iter()
                        .map(|x| {
                            let next = ids.len() as u32;
                            *ids.entry(x.as_deref().expect("no missing")).or_insert(next)
                        })
                        .collect();
                    if ids.len() < 2 {
                        zero_range.push(name.clone());
                        Coding::Flat
                    } else {
                        Coding::Codes(codes)
                    }
                }
            };
            codings.push(coding);
        }
        if !zero_range.is_empty() {
            log::warn!(
                "matching variables without spread contribute nothing: {}",
                zero_range.join(", ")
            );
        }
        Ok(Self { codings, zero_range })
    }

    /// Variables that were constant over the dataset.
    pub fn zero_range(&self) -> &[String] {
        &self.zero_range
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        if self.codings.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .codings
            .iter()
            .map(|c| match c {
                Coding::Scaled(v) => (v[a] - v[b]).abs(),
                Coding::Codes(v) => f64::from(u8::from(v[a] != v[b])),
                Coding::Flat => 0.0,
            })
            .sum();
        total / self.codings.len() as f64
    }
}

/// Distance between rows `a` and `b` of `ds`; see [`DistanceSpace`].
pub fn mixed_distance(ds: &Dataset, a: usize, b: usize, variables: &[String]) -> Result<f64> {
    Ok(DistanceSpace::new(ds, variables)?.distance(a, b))
}
